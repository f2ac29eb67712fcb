#include <doctest.h>

#include <cmath>

#include "semidot/error.hpp"
#include "semidot/pde_flow.hpp"
#include "support.hpp"

using namespace semidot;

namespace {

double bern(double z) { return std::abs(z) < 1e-12 ? 1.0 : z / std::expm1(z); }

} // namespace

TEST_CASE("equilibrium is a fixed point") {
    Model M = test::default_model(96);
    Field finf = equilibrium_density(M.pot, M.domain);
    CHECK(rhs(finf, M).cwiseAbs().maxCoeff() <= 1e-8 * finf.maxCoeff());
    FlowConfig c{explicit_dt_limit(M), 0.0, Scheme::Explicit, 1};
    CHECK((step(finf, c, M) - finf).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("spatial part matches a standalone drift-diffusion stencil") {
    GridDomain d(1, 2.0, 9);
    PotentialSpec v{"double_well", 0.5, 1.0, 0, 0, 0};
    WeightedGraph G({"a"}, Eigen::MatrixXd::Zero(1, 1));
    Model M = test::model_with(d, G, {v}, v);
    std::mt19937_64 rng(3);
    Field f = test::random_positive(rng, 9, 1);
    Eigen::VectorXd V = evaluate_potential(v, d);
    Field r = rhs(f, M);
    const double h2 = d.dx() * d.dx();
    for (int i = 0; i < 9; ++i) {
        double in = 0.0;
        if (i + 1 < 9) in += (bern(-(V(i + 1) - V(i))) * f(i + 1, 0) - bern(V(i + 1) - V(i)) * f(i, 0)) / h2;
        if (i > 0) in -= (bern(-(V(i) - V(i - 1))) * f(i, 0) - bern(V(i) - V(i - 1)) * f(i - 1, 0)) / h2;
        CHECK(r(i, 0) == doctest::Approx(in).epsilon(1e-12));
    }
}

TEST_CASE("exchange part by hand on three cells") {
    GridDomain d(1, 1.0, 3);
    PotentialSpec v1{"quadratic", 1.0, 1.0, 0, 0, 0}, v2{"quadratic", 0.0, 1.0, 0, 0, 0.5};
    WeightedGraph G({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0, 2, 2, 0).finished());
    Model M = test::model_with(d, G, {v1, v2}, v1);
    Field f(3, 2);
    f << 0.2, 0.3, 0.4, 0.1, 0.5, 0.2;
    Field r = exchange_rhs(f, M);
    for (int p = 0; p < 3; ++p) {
        double x = d.coord(p, 0);
        double V1 = 0.5 * x * x, V2 = 0.5;
        double phi1 = std::log(f(p, 0)) + V1, phi2 = std::log(f(p, 1)) + V2;
        double flow = (phi1 - phi2) * 2.0 * std::exp(-V1);
        CHECK(r(p, 0) == doctest::Approx(-flow).epsilon(1e-14));
        CHECK(r(p, 1) == doctest::Approx(flow).epsilon(1e-14));
    }
}

TEST_CASE("log-mean exchange is linear in f") {
    Model M = test::default_model(32);
    M.mob = Mobility::log_mean(M.pot.V);
    std::mt19937_64 rng(5);
    for (int s = 0; s < 10; ++s) {
        Field a = test::random_positive(rng, 32, 2), b = test::random_positive(rng, 32, 2);
        Field lhs = rhs(0.3 * a + 1.7 * b, M), rr = 0.3 * rhs(a, M) + 1.7 * rhs(b, M);
        CHECK((lhs - rr).cwiseAbs().maxCoeff() <= 1e-10 * rr.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("flow conserves mass and dissipates entropy") {
    Model M = test::default_model(64);
    Field f0 = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    FlowConfig c{explicit_dt_limit(M), 0.3, Scheme::Explicit, 20};
    Trajectory t = run(f0, c, M);
    CHECK(t.max_mass_defect <= 1e-12);
    CHECK(t.max_energy_increase <= 1e-8);
    CHECK(t.energies.back() < t.energies.front());
    Field finf = equilibrium_density(M.pot, M.domain);
    CHECK((t.densities.back() - finf).cwiseAbs().sum() < (f0 - finf).cwiseAbs().sum());
}

TEST_CASE("node masses are frozen without exchange") {
    Model M = test::default_model(32);
    M.graph = WeightedGraph({"a", "b"}, Eigen::MatrixXd::Zero(2, 2));
    Field f0 = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    Trajectory t = run(f0, FlowConfig{explicit_dt_limit(M), 0.2, Scheme::Explicit, 50}, M);
    Eigen::VectorXd m0 = node_masses(f0, M.domain);
    for (const Field& f : t.densities) CHECK((node_masses(f, M.domain) - m0).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("node masses relax toward equilibrium") {
    Model M = test::default_model(32);
    Field f0 = perturbed_equilibrium(M.pot, M.domain, 0.0, {0.95, 0.05});
    Field finf = equilibrium_density(M.pot, M.domain);
    Trajectory t = run(f0, FlowConfig{1e-3, 4.0, Scheme::SemiImplicit, 4000}, M);
    double e0 = (node_masses(f0, M.domain) - node_masses(finf, M.domain)).norm();
    double e1 = (node_masses(t.densities.back(), M.domain) - node_masses(finf, M.domain)).norm();
    CHECK(e1 < 1e-2 * e0);
}

TEST_CASE("explicit step beyond the stability bound is refused") {
    Model M = test::default_model(64);
    Field f0 = equilibrium_density(M.pot, M.domain);
    CHECK_THROWS_AS(run(f0, FlowConfig{10 * explicit_dt_limit(M), 0.1, Scheme::Explicit, 1}, M), Error);
}

TEST_CASE("time refinement of one step") {
    Model M = test::default_model(32);
    Field f0 = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    auto err = [&](Scheme s, double dt) {
        Field one = step(f0, FlowConfig{dt, dt, s, 1}, M);
        Field half = step(step(f0, FlowConfig{dt / 2, dt, s, 1}, M), FlowConfig{dt / 2, dt, s, 1}, M);
        return (one - half).cwiseAbs().maxCoeff();
    };
    double dt = 0.5 * explicit_dt_limit(M);
    double r = err(Scheme::Explicit, dt) / err(Scheme::Explicit, dt / 2);
    CHECK(r == doctest::Approx(4.0).epsilon(0.1));
    double rs = err(Scheme::SemiImplicit, dt) / err(Scheme::SemiImplicit, dt / 2);
    CHECK(rs == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("weak form residual") {
    auto residual = [](int n, bool constant) {
        Model M = test::default_model(n);
        Field finf = equilibrium_density(M.pot, M.domain);
        Trajectory t = run(finf, FlowConfig{explicit_dt_limit(M), 0.05, Scheme::Explicit, 1}, M);
        Field z(M.points(), M.nodes());
        for (int p = 0; p < M.points(); ++p) z.row(p).setConstant(constant ? 1.0 : M.domain.coord(p, 0));
        return std::abs(weak_form_residual(t, z, 0.0, 0.05, M));
    };
    CHECK(residual(32, true) <= 1e-10);
    double r32 = residual(32, false), r64 = residual(64, false);
    CHECK(r32 <= 1e-2);
    CHECK(r64 < 0.5 * r32);
}

TEST_CASE("global time error is first order") {
    Model M = test::default_model(32);
    Field f0 = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    for (Scheme s : {Scheme::Explicit, Scheme::SemiImplicit}) {
        double dt = 0.5 * explicit_dt_limit(M);
        const double T = 64 * dt;
        auto final = [&](double h) { return run(f0, FlowConfig{h, T, s, 1000000}, M).densities.back(); };
        Field a = final(dt), b = final(dt / 2), c = final(dt / 4);
        double r = (a - b).cwiseAbs().maxCoeff() / (b - c).cwiseAbs().maxCoeff();
        CHECK(r == doctest::Approx(2.0).epsilon(0.1));
    }
}
