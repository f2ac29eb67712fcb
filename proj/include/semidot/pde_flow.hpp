#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semidot/model.hpp"

namespace semidot {

enum class Scheme { Explicit, SemiImplicit };

struct FlowConfig {
    double dt = 0.0;
    double T = 0.0;
    Scheme scheme = Scheme::Explicit;
    int record_every = 1;
};

struct Barrier {
    double lambda;
    double Lambda;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Field> densities;
    std::vector<double> energies;
    std::vector<double> barrier_min; // min f e^V per recorded time
    std::vector<double> barrier_max;

    // per-step diagnostics over every step, recorded or not
    long steps = 0;
    double max_energy_increase = -INFINITY;
    double max_mass_defect = 0.0;
    long barrier_violations = 0;
    std::string first_violation;
};

// dt <= 0.25 dx^2 / (1 + max|grad V| dx), divided by the dimension
double explicit_dt_limit(const Model& model);

// Scharfetter-Gummel face fluxes of Laplace f + div(f grad V), zero flux at walls.
Field spatial_rhs(const Field& f, const Model& model);
// -sum_{g'} [(log f + V)(g) - (log f + V)(g')] K theta(f_g, f_g')
Field exchange_rhs(const Field& f, const Model& model);
Field rhs(const Field& f, const Model& model);

Field step(const Field& f, const FlowConfig& cfg, const Model& model);

Trajectory run(const Field& f0, const FlowConfig& cfg, const Model& model,
               std::optional<Barrier> barrier = std::nullopt);

// |sum zeta (f(s) - f(r)) - int_r^s <zeta, generator>| with trapezoidal time quadrature;
// r and s must be recorded times.
double weak_form_residual(const Trajectory& traj, const Field& zeta, double r, double s, const Model& model);

} // namespace semidot
