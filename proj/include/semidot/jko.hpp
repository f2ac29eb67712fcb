#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semidot/domain.hpp"
#include "semidot/pde_flow.hpp"
#include "semidot/static_transport.hpp"

namespace semidot {

struct JkoConfig {
    double tau = 0.05;
    int steps = 1;
    double tol = 1e-8; // stationarity, in potential units
    int max_iter = 200;
    int plan_term_multiplicity = 1;
    // barrier constants to certify; taken from the initial density when absent
    std::optional<Barrier> barrier;
};

struct JkoDiagnostics {
    double objective = 0.0;     // E(sigma) + A(mu, sigma), cell-resolved
    double energy = 0.0;        // E(sigma)
    double energy_before = 0.0; // E(mu)
    double cost = 0.0;          // A(mu, sigma) as minimized
    double pair_cost = 0.0;     // cost_of_pair of the returned pair
    bool energy_inequality = true;

    double lambda = 0.0, Lambda = 0.0;
    BarrierReport barrier;

    double max_displacement = 0.0;
    double displacement_bound = 0.0;
    bool displacement_ok = true;

    double el_exchange = 0.0;  // max |h - (phi(g) - phi(g'))|, phi = log f + V
    double el_transport = 0.0; // max |(S - y)/tau f - (f' + f V')|
    long exchange_sign_violations = 0;

    int iterations = 0;
    double stationarity = 0.0;
    bool converged = false;
};

struct JkoStep {
    Field sigma;
    Field fbar;
    AdmissiblePair pair;
    JkoDiagnostics diag;
};

// One minimizing-movement step: argmin E(sigma) + A(mu, sigma).
JkoStep jko_step(const Field& mu, const JkoConfig& cfg, const Model& model);

struct JkoTrajectory {
    std::vector<double> times;     // n tau
    std::vector<Field> densities;  // f_n, starting with f_0
    std::vector<double> energies;
    std::vector<JkoDiagnostics> diagnostics; // one per step
    long barrier_violations = 0;
    std::string first_violation;
    bool all_converged = true;

    // piecewise-constant interpolation f(t) = f_n for t in ((n-1) tau, n tau]
    const Field& at(double t) const;
};

JkoTrajectory jko_run(const Field& f0, const JkoConfig& cfg, const Model& model);

struct ConvergenceTable {
    std::vector<double> taus;
    std::vector<double> errors; // sup over common times of the grid L2 error
    std::vector<double> ratios; // errors[i] / errors[i+1]
    double reference_dt = 0.0;
    std::string reference_scheme;
    bool strictly_decreasing = false;
};

// Every tau must be an integer multiple of the smallest one, and the smallest
// an integer multiple of reference_dt. Worker count from SEMIDOT_THREADS.
ConvergenceTable compare_to_pde(const Field& f0, const std::vector<double>& taus, double T, double reference_dt,
                                const Model& model, const JkoConfig& base = {});

} // namespace semidot
