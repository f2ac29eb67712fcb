#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace semidot {

// Finite node set with a symmetric, nonnegative, zero-diagonal kernel K.
// Connectivity is recorded, not enforced: decoupled graphs (K = 0) are valid
// inputs for the flow, and only the Poisson solver rejects them.
class WeightedGraph {
public:
    WeightedGraph() = default;
    WeightedGraph(std::vector<std::string> nodes, Eigen::MatrixXd kernel);

    static WeightedGraph complete(int m, double weight = 1.0);
    static WeightedGraph path(int m, double weight = 1.0);

    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const Eigen::MatrixXd& kernel() const { return K_; }
    double K(int g, int h) const { return K_(g, h); }
    bool connected() const { return n_components_ == 1; }
    int component_count() const { return n_components_; }
    // component id per node, ids numbered in order of first appearance
    const std::vector<int>& components() const { return component_; }
    // unordered pairs (g < h) with K(g,h) > 0
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    WeightedGraph permuted(const std::vector<int>& perm) const;

private:
    std::vector<std::string> nodes_;
    Eigen::MatrixXd K_;
    std::vector<int> component_;
    int n_components_ = 0;
    std::vector<std::pair<int, int>> edges_;
};

using NodeFunction = Eigen::VectorXd;

// Values on ordered node pairs. The flag records antisymmetry when the field
// was built that way; it is checked against the values on construction.
struct EdgeField {
    Eigen::MatrixXd values;
    bool antisymmetric = false;

    EdgeField() = default;
    explicit EdgeField(Eigen::MatrixXd v, bool anti = false);
    static EdgeField constant(int m, double value);

    double operator()(int g, int h) const { return values(g, h); }
    int size() const { return static_cast<int>(values.rows()); }
};

EdgeField discrete_gradient(const NodeFunction& phi, const WeightedGraph& graph);
NodeFunction discrete_divergence(const EdgeField& h, const WeightedGraph& graph);
double integration_by_parts_defect(const EdgeField& h, const NodeFunction& phi, const WeightedGraph& graph);

// L_S(g,g') = 1{g=g'} sum_k 2 S K - 2 S K
Eigen::MatrixXd weighted_laplacian(const EdgeField& S, const WeightedGraph& graph);

// Connected components of the pattern S*K > 0.
std::vector<int> effective_components(const EdgeField& S, const WeightedGraph& graph, int* count = nullptr);

// Solves div_g(grad eta * S) = rhs with sum(eta) = 0.
NodeFunction solve_graph_poisson(const NodeFunction& rhs, const EdgeField& S, const WeightedGraph& graph);

double laplacian_spectral_gap(const EdgeField& S, const WeightedGraph& graph);

// sum_{g,g'} |grad eta|^2 S K
double dirichlet_energy(const NodeFunction& eta, const EdgeField& S, const WeightedGraph& graph);

} // namespace semidot
