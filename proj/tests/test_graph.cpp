#include <doctest.h>

#include <random>

#include "semidot/error.hpp"
#include "semidot/graph.hpp"
#include "support.hpp"

using namespace semidot;

TEST_CASE("two-node poisson solve") {
    WeightedGraph G({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished());
    NodeFunction rhs(2);
    rhs << 1, -1;
    NodeFunction eta = solve_graph_poisson(rhs, EdgeField::constant(2, 1.0), G);
    CHECK(eta(0) == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(eta(1) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(laplacian_spectral_gap(EdgeField::constant(2, 1.0), G) == doctest::Approx(4.0));
}

TEST_CASE("triangle poisson solve") {
    WeightedGraph G = WeightedGraph::complete(3);
    NodeFunction rhs(3);
    rhs << 2, -1, -1;
    NodeFunction eta = solve_graph_poisson(rhs, EdgeField::constant(3, 1.0), G);
    CHECK(eta(0) == doctest::Approx(-1.0 / 3.0));
    CHECK(eta(1) == doctest::Approx(1.0 / 6.0));
    CHECK(eta(2) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("complete graph spectral gap is 2m") {
    for (int m = 2; m <= 6; ++m)
        CHECK(laplacian_spectral_gap(EdgeField::constant(m, 1.0), WeightedGraph::complete(m)) == doctest::Approx(2.0 * m));
}

TEST_CASE("gradient and divergence on a path") {
    WeightedGraph G = WeightedGraph::path(3);
    NodeFunction phi(3);
    phi << 1, 3, 6;
    EdgeField grad = discrete_gradient(phi, G);
    CHECK(grad(0, 1) == 2.0);
    CHECK(grad(1, 0) == -2.0);
    CHECK(grad(1, 2) == 3.0);
    // div_g of the gradient is -L_1 phi / 2 * 2
    NodeFunction div = discrete_divergence(grad, G);
    CHECK(div(0) == doctest::Approx(4.0));
    CHECK(div(1) == doctest::Approx(-4.0 + 6.0));
    CHECK(div(2) == doctest::Approx(-6.0));
    CHECK(div.sum() == doctest::Approx(0.0));
}

TEST_CASE("integration by parts on random instances") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int s = 0; s < 200; ++s) {
        int m = 2 + s % 5;
        WeightedGraph G = test::random_graph(rng, m);
        Eigen::MatrixXd h(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) h(a, b) = U(rng);
        NodeFunction phi(m);
        for (int a = 0; a < m; ++a) phi(a) = U(rng);
        CHECK(integration_by_parts_defect(EdgeField(h), phi, G) <= 1e-13 * m * m);
    }
}

TEST_CASE("poisson rejects non zero-sum and disconnected input") {
    WeightedGraph G = WeightedGraph::complete(3);
    NodeFunction rhs(3);
    rhs << 1, 0, 0;
    CHECK_THROWS_AS(solve_graph_poisson(rhs, EdgeField::constant(3, 1.0), G), Error);
    WeightedGraph D({"a", "b", "c"}, (Eigen::MatrixXd(3, 3) << 0, 1, 0, 1, 0, 0, 0, 0, 0).finished());
    CHECK_FALSE(D.connected());
    CHECK(D.component_count() == 2);
}

TEST_CASE("graph construction validates the kernel") {
    CHECK_THROWS_AS(WeightedGraph({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0, 1, 2, 0).finished()), Error);
    CHECK_THROWS_AS(WeightedGraph({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0, -1, -1, 0).finished()), Error);
    CHECK_THROWS_AS(WeightedGraph({"a", "a"}, (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished()), Error);
}
