#pragma once

#include <random>

#include "semidot/model.hpp"

namespace semidot::test {

inline Model default_model(int n, int dim = 1) {
    GridDomain d(dim, 3.0, n);
    PotentialSpec v1{"double_well", 0.25, 1.0, 0, 0, 0}, v2{"tilted", 0.25, 1.0, 0, 0.5, 0};
    PotentialPair pot = make_potentials({v1, v2}, v1, d);
    WeightedGraph G({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished());
    return Model{d, G, pot, Mobility::mass_independent(pot.W)};
}

inline Model model_with(const GridDomain& d, const WeightedGraph& G, const std::vector<PotentialSpec>& V,
                        const PotentialSpec& W, bool log_mean = false) {
    PotentialPair pot = make_potentials(V, W, d);
    Mobility mob = log_mean ? Mobility::log_mean(pot.V) : Mobility::mass_independent(pot.W);
    return Model{d, G, pot, mob};
}

inline WeightedGraph random_graph(std::mt19937_64& rng, int m) {
    std::uniform_real_distribution<double> U(0.2, 1.5);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) K(a, b) = K(b, a) = U(rng);
    std::vector<std::string> names;
    for (int a = 0; a < m; ++a) names.push_back("n" + std::to_string(a));
    return WeightedGraph(names, K);
}

inline Field random_positive(std::mt19937_64& rng, int points, int nodes, double lo = 0.5, double hi = 1.5) {
    std::uniform_real_distribution<double> U(lo, hi);
    Field f(points, nodes);
    for (int g = 0; g < nodes; ++g)
        for (int p = 0; p < points; ++p) f(p, g) = U(rng);
    return f;
}

} // namespace semidot::test
