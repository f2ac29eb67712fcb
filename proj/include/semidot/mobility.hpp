#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semidot/domain.hpp"

namespace semidot {

// Logarithmic mean (a-b)/(log a - log b), with theta_log(a,a) = a and theta_log(a,0) = 0.
double theta_log(double a, double b);
// d/da theta_log(a,b), a,b > 0
double dtheta_log_da(double a, double b);

class Mobility {
public:
    enum class Kind { MassIndependent, LogMeanScaled };

    Mobility() = default;
    static Mobility mass_independent(const Eigen::VectorXd& W);
    static Mobility log_mean(const Field& V);

    Kind kind() const { return kind_; }
    std::string name() const;
    int num_points() const;

    // theta_{x_p, g, h}(s, t)
    double theta(int p, int g, int h, double s, double t) const;
    // partial derivative in s
    double dtheta1(int p, int g, int h, double s, double t) const;
    // C_{x,g,h} = int_0^1 theta(1-t, t)^{-1/2} dt
    double a5_constant(int p, int g, int h, int panels = 256) const;

    const Eigen::VectorXd& W() const { return W_; }
    const Field& V() const { return V_; }

private:
    Kind kind_ = Kind::MassIndependent;
    Eigen::VectorXd W_;
    Field V_;
};

struct AssumptionReport {
    struct Item {
        std::string name;
        bool pass = true;
        double worst = 0.0;
        std::string detail;
    };
    std::vector<Item> items;
    double max_C = 0.0;
    bool all_pass() const;
};

// Randomized sampling of symmetry, positivity, monotonicity, homogeneity and
// finiteness of C. Mass-independent mobilities are also checked for (s,t)-independence.
AssumptionReport check_assumptions(const Mobility& mob, int num_nodes, int samples, std::uint64_t seed,
                                   double tol = 1e-12);

} // namespace semidot
