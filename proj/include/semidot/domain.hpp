#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semidot/graph.hpp"

namespace semidot {

// Uniform grid on [-L, L]^d, n points per axis, dx = 2L/(n-1), no-flux walls.
// Points are flattened with axis 0 fastest.
class GridDomain {
public:
    struct Face {
        int lo;
        int hi;
        int axis;
    };

    GridDomain() = default;
    GridDomain(int dimension, double L, int n);

    int dimension() const { return dim_; }
    double L() const { return L_; }
    int n() const { return n_; }
    double dx() const { return dx_; }
    int num_points() const { return npts_; }
    double weight() const { return weight_; } // dx^d
    double coord(int point, int axis) const;
    int axis_index(int point, int axis) const;
    Eigen::VectorXd axis_coords(int axis) const;
    // interior faces between neighbouring points; boundary faces carry no flux
    const std::vector<Face>& faces() const { return faces_; }

private:
    int dim_ = 1;
    double L_ = 1.0;
    int n_ = 3;
    double dx_ = 1.0;
    int npts_ = 3;
    double weight_ = 1.0;
    std::vector<Face> faces_;
};

// values(point, node)
using Field = Eigen::MatrixXd;

struct PotentialSpec {
    std::string kind = "quadratic"; // quadratic | double_well | tilted
    double a = 1.0;
    double b = 1.0;
    double c = 0.0;
    double t = 0.0;
    double offset = 0.0;
};

// quadratic:   a/2 |x - c|^2 + offset
// double_well: a (x0^2 - b^2)^2 + a/2 sum_{k>0} x_k^2 + offset
// tilted:      double_well + t x0
Eigen::VectorXd evaluate_potential(const PotentialSpec& spec, const GridDomain& domain);

struct PotentialPair {
    Field V;
    Eigen::VectorXd W;
    std::vector<Field> gradV; // per axis
    double lambda_prime = 0.0;
    double Lambda_prime = 0.0;
    double weight_integral = 0.0; // sum e^{-W} dx^d
};

PotentialPair make_potentials(const Field& V, const Eigen::VectorXd& W, const GridDomain& domain);
PotentialPair make_potentials(const std::vector<PotentialSpec>& V, const PotentialSpec& W, const GridDomain& domain);

// centred differences inside, one-sided at walls
Field centered_gradient(const Field& u, const GridDomain& domain, int axis);

double total_mass(const Field& f, const GridDomain& domain);
Eigen::VectorXd node_masses(const Field& f, const GridDomain& domain);
// throws unless finite, nonnegative and of unit mass within tol
void validate_density(const Field& f, const GridDomain& domain, double tol = 1e-10);

double entropy(const Field& f, const PotentialPair& pot, const GridDomain& domain);
double equilibrium_constant(const PotentialPair& pot, const GridDomain& domain);
Field equilibrium_density(const PotentialPair& pot, const GridDomain& domain);
double second_moment(const Field& f, const GridDomain& domain);

struct BarrierReport {
    double min_ratio = 0.0; // min f e^V
    double max_ratio = 0.0;
    int min_point = -1, min_node = -1;
    int max_point = -1, max_node = -1;
    bool pass = false;
    std::string message;
};

// lambda e^{-V} <= f <= Lambda e^{-V} with relative slack rel_tol
BarrierReport barrier_check(const Field& f, const PotentialPair& pot, double lambda, double Lambda,
                            double rel_tol = 1e-12);

// Initial data. u = f e^V is built first, then normalized.
Field perturbed_equilibrium(const PotentialPair& pot, const GridDomain& domain, double amplitude,
                            const std::vector<double>& node_weights);
Field random_barrier_density(const PotentialPair& pot, const GridDomain& domain, std::uint64_t seed,
                             double spread = 2.0);

} // namespace semidot
