#include <doctest.h>

#include <cmath>

#include "semidot/dynamic_transport.hpp"
#include "semidot/error.hpp"
#include "support.hpp"

using namespace semidot;

namespace {

Field zero_sum_source(std::mt19937_64& rng, const Model& M) {
    Field s = test::random_positive(rng, M.points(), M.nodes(), -1.0, 1.0);
    s.array() -= s.mean();
    return s;
}

} // namespace

TEST_CASE("kinetic norm of a pure exchange potential") {
    GridDomain d(1, 1.0, 9);
    PotentialSpec v{"quadratic", 0.0, 1.0, 0, 0, 0}, w{"quadratic", 0.6, 1.0, 0, 0, 0};
    Model M = test::model_with(d, WeightedGraph({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0, 2, 2, 0).finished()), {v, v}, w);
    Field f = Field::Constant(9, 2, 0.3);
    Field phi = Field::Zero(9, 2);
    phi.col(1).setConstant(0.7);
    double ref = 0.0;
    for (int p = 0; p < 9; ++p) ref += 2.0 * 2.0 * std::exp(-M.pot.W(p)) * 0.49 * d.dx();
    CHECK(kinetic_norm(f, VelocityPotentials::single(phi), M) == doctest::Approx(ref).epsilon(1e-14));
    DynamicOptions half{0.5};
    CHECK(kinetic_norm(f, VelocityPotentials::single(phi), M, half) == doctest::Approx(0.5 * ref).epsilon(1e-14));
}

TEST_CASE("minimal selection solves the continuity constraint") {
    Model M = test::default_model(24);
    std::mt19937_64 rng(8);
    Field f = random_barrier_density(M.pot, M.domain, 1, 1.5);
    CHECK(minimal_selection(f, Field::Zero(24, 2), M).cwiseAbs().maxCoeff() == 0.0);
    Field src = zero_sum_source(rng, M);
    Field phi = minimal_selection(f, src, M);
    Field div = transport_divergence(f, VelocityPotentials::single(phi), M);
    CHECK((div - src).cwiseAbs().maxCoeff() <= 1e-8 * src.cwiseAbs().maxCoeff());
    CHECK(std::abs(phi.mean()) <= 1e-12);
    Field bad = src;
    bad(0, 0) += 1.0;
    CHECK_THROWS_AS(minimal_selection(f, bad, M), Error);
}

TEST_CASE("recovers a known potential through the operator") {
    Model M = test::default_model(20);
    Field f = random_barrier_density(M.pot, M.domain, 2, 1.5);
    std::mt19937_64 rng(9);
    Field star = test::random_positive(rng, 20, 2, -1, 1);
    Field src = transport_divergence(f, VelocityPotentials::single(star), M);
    Field phi = minimal_selection(f, src, M);
    Field back = transport_divergence(f, VelocityPotentials::single(phi), M);
    CHECK((back - src).cwiseAbs().maxCoeff() <= 1e-8 * src.cwiseAbs().maxCoeff());
    CHECK(kinetic_norm(f, VelocityPotentials::single(phi), M) ==
          doctest::Approx(kinetic_norm(f, VelocityPotentials::single(star), M)).epsilon(1e-8));
}

TEST_CASE("minimal selection beats feasible competitors") {
    Model M = test::default_model(20);
    std::mt19937_64 rng(10);
    Field f = random_barrier_density(M.pot, M.domain, 3, 1.5);
    Field src = zero_sum_source(rng, M);
    Field phi = minimal_selection(f, src, M);
    double best = kinetic_norm(f, VelocityPotentials::single(phi), M);
    for (int k = 0; k < 20; ++k) {
        Field a = test::random_positive(rng, 20, 2, -1, 1), b = test::random_positive(rng, 20, 2, -1, 1);
        Field r = transport_divergence(f, VelocityPotentials{a, b}, M);
        Field chi = minimal_selection(f, -r, M);
        VelocityPotentials comp{phi + a + chi, phi + b + chi};
        CHECK((transport_divergence(f, comp, M) - src).cwiseAbs().maxCoeff() <= 1e-8 * src.cwiseAbs().maxCoeff());
        CHECK(kinetic_norm(f, comp, M) >= best);
    }
}

TEST_CASE("without exchange the problem splits per node") {
    Model M = test::default_model(20);
    M.graph = WeightedGraph({"a", "b"}, Eigen::MatrixXd::Zero(2, 2));
    Field f = random_barrier_density(M.pot, M.domain, 5, 1.5);
    std::mt19937_64 rng(12);
    Field src = test::random_positive(rng, 20, 2, -1, 1);
    for (int g = 0; g < 2; ++g) src.col(g).array() -= src.col(g).mean();
    Field phi = minimal_selection(f, src, M);
    for (int g = 0; g < 2; ++g) {
        Model one = M;
        one.graph = WeightedGraph({"a"}, Eigen::MatrixXd::Zero(1, 1));
        one.pot.V = M.pot.V.col(g);
        Field fg = f.col(g), sg = src.col(g);
        Field pg = minimal_selection(fg, sg, one);
        CHECK((pg.col(0) - phi.col(g)).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + pg.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("decomposition check") {
    GridDomain d(1, 2.0, 15);
    std::vector<std::string> names{"a", "b", "c"};
    Field psi = Field::Random(15, 3), phi = psi;
    CHECK(decomposition_check(phi, psi, d, names).separable);
    for (int p = 0; p < 15; ++p)
        for (int g = 0; g < 3; ++g) phi(p, g) = psi(p, g) + std::sin(d.coord(p, 0)) + (g == 1 ? 1.0 : 0.0);
    DecompositionReport ok = decomposition_check(phi, psi, d, names);
    CHECK(ok.separable);
    CHECK(ok.residual <= 1e-12);
    for (int p = 0; p < 15; ++p)
        for (int g = 0; g < 3; ++g) phi(p, g) = psi(p, g) + (g == 0 ? d.coord(p, 0) : 0.0);
    DecompositionReport bad = decomposition_check(phi, psi, d, names);
    CHECK_FALSE(bad.separable);
    CHECK(bad.residual > 0.1);
    CHECK(bad.max_four_point > 1.0);
    CHECK(bad.witness.find("a") != std::string::npos);
}

TEST_CASE("continuity residual and action of a constant path") {
    Model M = test::default_model(16);
    Field f = equilibrium_density(M.pot, M.domain);
    VelocityPotentials z = VelocityPotentials::single(Field::Zero(16, 2));
    CHECK(continuity_residual(f, f, z, 0.1, M) == 0.0);
    DiscretePath p{{0.0, 0.5, 1.0}, {f, f, f}, {z, z}, {0.0, 0.0}};
    CHECK(kinetic_action(p, M) == 0.0);
}

TEST_CASE("pure exchange path action") {
    GridDomain d(1, 1.0, 9);
    PotentialSpec v{"quadratic", 0.0, 1.0, 0, 0, 0};
    Model M = test::model_with(d, WeightedGraph({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished()), {v, v}, v);
    const double c = 1.0 / (9 * d.dx());
    Field a(9, 2), b(9, 2);
    a.col(0).setConstant(0.7 * c);
    a.col(1).setConstant(0.3 * c);
    b.col(0).setConstant(0.4 * c);
    b.col(1).setConstant(0.6 * c);
    DynamicW2Options o;
    o.T_steps = 4;
    DynamicW2Result r = dynamic_w2(a, b, M, o);
    // theta = K = 1: d_t u = 2 (psi_a - psi_b) per cell, norm 2 (psi_b - psi_a)^2 dx = (d_t u)^2 dx / 2,
    // straight line in u is optimal
    const double du = 0.3 * c;
    double ref = 9 * d.dx() * du * du / 2.0;
    CHECK(r.converged);
    CHECK(r.action == doctest::Approx(ref).epsilon(1e-6));
    CHECK(r.max_continuity_residual <= 1e-8 * c);
}

TEST_CASE("self distance vanishes") {
    Model M = test::default_model(16);
    Field f = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    DynamicW2Options o;
    o.T_steps = 4;
    CHECK(dynamic_w2(f, f, M, o).action <= 1e-8);
}

TEST_CASE("rest is a geodesic and equilibrium is stationary") {
    Model M = test::default_model(24);
    Field f = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    Field z = Field::Zero(24, 2);
    auto [f1, p1] = geodesic_step(f, z, 1e-3, M);
    CHECK((f1 - f).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p1.cwiseAbs().maxCoeff() == 0.0);
    Field finf = equilibrium_density(M.pot, M.domain);
    auto [f2, p2] = second_order_step(finf, z, 1e-3, 1.0, M);
    CHECK((f2 - finf).cwiseAbs().maxCoeff() <= 1e-14);
    // log f + V is constant at equilibrium, so phi only shifts by a constant
    CHECK(p2.maxCoeff() - p2.minCoeff() <= 1e-12);
}

TEST_CASE("affine potential on a single fiber") {
    GridDomain d(1, 3.0, 61);
    PotentialSpec v{"quadratic", 1.0, 1.0, 0, 0, 0};
    Model M = test::model_with(d, WeightedGraph({"a"}, Eigen::MatrixXd::Zero(1, 1)), {v}, v);
    Field f = equilibrium_density(M.pot, M.domain);
    const double a = 0.8, dt = 1e-3;
    Field phi(61, 1);
    for (int p = 0; p < 61; ++p) phi(p, 0) = a * d.coord(p, 0);
    auto [f1, p1] = geodesic_step(f, phi, dt, M);
    for (int p = 5; p < 56; ++p) CHECK((p1(p, 0) - phi(p, 0)) / dt == doctest::Approx(-0.5 * a * a).epsilon(1e-10));
    CHECK(total_mass(f1, d) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("damped system decreases the Lyapunov functional") {
    Model M = test::default_model(32);
    Field f = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    Field phi = Field::Zero(32, 2);
    DynamicOptions op{0.5};
    const double dt = 2e-3;
    double L0 = lyapunov(f, phi, M, op), L = L0;
    for (int s = 0; s < 200; ++s) {
        std::tie(f, phi) = second_order_step(f, phi, dt, 2.0, M, op);
        double Ln = lyapunov(f, phi, M, op);
        CHECK(Ln <= L + 10 * dt * dt);
        L = Ln;
    }
    CHECK(L < L0);
}
