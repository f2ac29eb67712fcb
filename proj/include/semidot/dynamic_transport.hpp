#pragma once

#include <string>
#include <vector>

#include "semidot/model.hpp"

namespace semidot {

// graph_weight scales div_g and the graph kinetic term together. With 1 the
// graph divergence carries its full factor 2; 1/2 gives the time scale of the flow.
struct DynamicOptions {
    double graph_weight = 1.0;
};

struct VelocityPotentials {
    Field phi; // spatial potential
    Field psi; // graph potential
    static VelocityPotentials single(const Field& phi) { return {phi, phi}; }
};

struct DiscretePath {
    std::vector<double> times;
    std::vector<Field> densities;                // T_steps + 1
    std::vector<VelocityPotentials> potentials; // one per interval
    std::vector<double> residuals;              // continuity residual per interval
};

// div_x(f grad phi) + div_g(theta(f) grad psi), flux form, no flux at walls
Field transport_divergence(const Field& f, const VelocityPotentials& v, const Model& model,
                           const DynamicOptions& opts = {});

// sup |(fb - fa)/dt + div_x(fm grad phi) + div_g(theta(fm) grad psi)|, fm = (fa + fb)/2
double continuity_residual(const Field& fa, const Field& fb, const VelocityPotentials& v, double dt, const Model& model,
                           const DynamicOptions& opts = {});

// <phi, psi>_f: sum_faces f_face |d phi/dx|^2 dx^d + kappa sum_{g,g'} (grad psi)^2 K theta(f) dx^d
double kinetic_norm(const Field& f, const VelocityPotentials& v, const Model& model, const DynamicOptions& opts = {});

// sum_k dt_k <phi_k, psi_k> evaluated at the interval midpoint densities
double kinetic_action(const DiscretePath& path, const Model& model, const DynamicOptions& opts = {});

// The single potential with div_x(f grad phi) + div_g(theta grad phi) = source of
// least kinetic norm, normalized to zero mean on each connected component.
Field minimal_selection(const Field& f, const Field& source, const Model& model, const DynamicOptions& opts = {});

struct DecompositionReport {
    double residual = 0.0;      // relative least-squares residual of phi - psi ~ a(x) + b(g)
    double max_four_point = 0.0; // max |D(i,g) - D(i,g') - D(i0,g) + D(i0,g')|
    bool separable = true;
    std::string witness;
};

DecompositionReport decomposition_check(const Field& phi, const Field& psi, const GridDomain& domain,
                                        const std::vector<std::string>& node_names, double tol = 1e-10);

struct DynamicW2Options {
    int T_steps = 8;
    int max_iter = 5000;
    double tol = 1e-7; // relative decrease of the action over 100 iterations
    DynamicOptions op;
};

struct DynamicW2Result {
    double action = 0.0;   // upper bound on the squared distance
    double distance = 0.0; // sqrt(action)
    DiscretePath path;
    int iterations = 0;
    bool converged = false;
    double max_continuity_residual = 0.0;
};

DynamicW2Result dynamic_w2(const Field& mu0, const Field& mu1, const Model& model, const DynamicW2Options& opts = {});

// Forward Euler for the geodesic system: continuity plus
// d phi/dt + 1/2 |grad_x phi|^2 + kappa sum_g' (grad_g phi)^2 K d1 theta = 0.
std::pair<Field, Field> geodesic_step(const Field& f, const Field& phi, double dt, const Model& model,
                                      const DynamicOptions& opts = {});

// Same with the extra forcing -(gamma phi + log f + V) in the phi equation.
std::pair<Field, Field> second_order_step(const Field& f, const Field& phi, double dt, double gamma, const Model& model,
                                          const DynamicOptions& opts = {});

// 1/2 <phi, phi>_f + E(f)
double lyapunov(const Field& f, const Field& phi, const Model& model, const DynamicOptions& opts = {});

} // namespace semidot
