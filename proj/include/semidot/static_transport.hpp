#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semidot/model.hpp"

namespace semidot {

// plans[g](i, j) = mass moved from cell i to cell j inside fiber g
struct TransportPlanSet {
    std::vector<Eigen::MatrixXd> plans;
};

// h[p](g, g'), antisymmetric in (g, g') at every grid point p
struct ExchangeField {
    std::vector<Eigen::MatrixXd> h;

    static ExchangeField zero(int points, int nodes);
    double operator()(int p, int g, int k) const { return h[p](g, k); }
    int points() const { return static_cast<int>(h.size()); }
    bool antisymmetric() const;
};

struct AdmissiblePair {
    TransportPlanSet plan;
    ExchangeField exchange;
    double tau = 0.0;
};

TransportPlanSet identity_plans(const Field& mu, const GridDomain& domain);

// second marginals divided by the cell weight
Field transported_density(const TransportPlanSet& plan, const GridDomain& domain);
// f_bar - tau sum_{g'} h K e^{-W}
Field balance_density(const AdmissiblePair& pair, const Model& model);

// (tau/4) sum_{g,g'} sum_p h^2 K e^{-W} dx^d
double exchange_cost(const ExchangeField& h, double tau, const Model& model);
// plan term sum_g (1/2tau) sum_ij |x_i - x_j|^2 gamma_ij, times the multiplicity, plus the exchange cost
double cost_of_pair(const AdmissiblePair& pair, const Model& model, int plan_term_multiplicity = 1);

// max cell violation of the balance constraint plus max row-sum violation
double feasibility_residual(const AdmissiblePair& pair, const Field& mu, const Field& sigma, const Model& model);

// Gradient-form exchange field h = grad eta solving, per grid point,
// div_g(grad eta e^{-W}) = 2 (f_bar - sigma) / tau on each connected component.
ExchangeField gradient_exchange(const Field& fbar, const Field& sigma, double tau, const Model& model);

struct StaticOptions {
    double tol = 1e-7;         // feasibility tolerance
    double opt_tol = 1e-9;     // stationarity tolerance (potential units)
    int max_iter = 200;
    int plan_term_multiplicity = 1;
};

struct StaticSolution {
    AdmissiblePair pair;
    Field fbar;
    double cost = 0.0;      // cost_of_pair of the returned pair
    double objective = 0.0; // cell-resolved value that the solver minimizes
    double feasibility = 0.0;
    double stationarity = 0.0;
    int iterations = 0;
    bool converged = false;
};

StaticSolution solve_static_cost(const Field& mu, const Field& sigma, double tau, const Model& model,
                                 const StaticOptions& opts = {});

struct OptimalityReport {
    bool cycle_ok = true;
    double cycle_defect = 0.0;
    std::string cycle_witness;
    bool gradient_ok = true;
    double gradient_residual = 0.0;
    bool monotone_ok = true;
    std::string monotone_witness;
    bool antisymmetric = true;
    bool all_ok() const { return cycle_ok && gradient_ok && monotone_ok && antisymmetric; }
};

OptimalityReport verify_optimality(const AdmissiblePair& pair, const Field& mu, const Field& sigma, const Model& model,
                                   double tol = 1e-8);

// shared with the JKO solver
namespace detail {
void require_line(const Model& model);
double cell_left_edge(const GridDomain& domain);
} // namespace detail

} // namespace semidot
