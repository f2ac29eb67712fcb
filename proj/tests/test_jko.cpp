#include <doctest.h>

#include <cmath>

#include "semidot/error.hpp"
#include "semidot/jko.hpp"
#include "support.hpp"

using namespace semidot;

TEST_CASE("two-node spatially flat step matches the scalar minimizer") {
    GridDomain d(1, 1.0, 12);
    PotentialSpec v1{"quadratic", 0.0, 1.0, 0, 0, 0}, v2{"quadratic", 0.0, 1.0, 0, 0, 0.7};
    PotentialSpec w{"quadratic", 0.0, 1.0, 0, 0, 0.2};
    const double K = 1.3;
    Model M = test::model_with(d, WeightedGraph({"a", "b"}, (Eigen::MatrixXd(2, 2) << 0, K, K, 0).finished()), {v1, v2}, w);
    const double c = 1.0 / (12 * d.dx()), tau = 0.1, kw = K * std::exp(-0.2);
    Field mu(12, 2);
    mu.col(0).setConstant(0.8 * c);
    mu.col(1).setConstant(0.2 * c);

    // log s - log(c - s) - 0.7 - (mu1 - s) / (tau K w) = 0, increasing in s
    double lo = 1e-12, hi = c - 1e-12;
    for (int it = 0; it < 200; ++it) {
        double s = 0.5 * (lo + hi);
        double F = std::log(s) - std::log(c - s) - 0.7 - (0.8 * c - s) / (tau * kw);
        (F > 0 ? hi : lo) = s;
    }
    const double s = 0.5 * (lo + hi);

    JkoConfig cfg;
    cfg.tau = tau;
    JkoStep st = jko_step(mu, cfg, M);
    REQUIRE(st.diag.converged);
    for (int p = 0; p < 12; ++p) {
        CHECK(st.sigma(p, 0) == doctest::Approx(s).epsilon(1e-7));
        CHECK(st.sigma(p, 1) == doctest::Approx(c - s).epsilon(1e-7));
    }
}

TEST_CASE("equilibrium is a fixed point of the step") {
    Model M = test::default_model(32);
    Field finf = equilibrium_density(M.pot, M.domain);
    JkoStep st = jko_step(finf, JkoConfig{}, M);
    CHECK((st.sigma - finf).cwiseAbs().maxCoeff() <= 1e-7 * finf.maxCoeff());
}

TEST_CASE("default step: Euler-Lagrange identities, barriers, displacement") {
    Model M = test::default_model(64);
    Field f0 = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    JkoConfig cfg;
    cfg.tau = 0.05;
    BarrierReport b0 = barrier_check(f0, M.pot, 0.0, INFINITY);
    cfg.barrier = Barrier{b0.min_ratio, b0.max_ratio};
    JkoStep st = jko_step(f0, cfg, M);
    const auto& dg = st.diag;
    CHECK(dg.converged);
    CHECK(dg.el_exchange <= 1e-5);
    CHECK(dg.el_transport <= 5 * (M.domain.dx() * M.domain.dx() + 1e-8));
    CHECK(dg.barrier.pass);
    CHECK(dg.displacement_ok);
    CHECK(dg.energy_inequality);
    CHECK(dg.exchange_sign_violations == 0);
    CHECK(total_mass(st.sigma, M.domain) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dg.pair_cost == doctest::Approx(dg.cost).epsilon(0.05));
}

TEST_CASE("run of several steps decreases the entropy") {
    Model M = test::default_model(32);
    Field f0 = random_barrier_density(M.pot, M.domain, 2, 1.5);
    JkoConfig cfg;
    cfg.tau = 0.1;
    cfg.steps = 4;
    JkoTrajectory tr = jko_run(f0, cfg, M);
    CHECK(tr.all_converged);
    CHECK(tr.barrier_violations == 0);
    for (std::size_t k = 1; k < tr.energies.size(); ++k) CHECK(tr.energies[k] <= tr.energies[k - 1] + 1e-12);
    CHECK(&tr.at(0.15) == &tr.densities[2]);
}

TEST_CASE("coarse comparison with the flow") {
    Model M = test::default_model(32);
    Field f0 = perturbed_equilibrium(M.pot, M.domain, 0.3, {0.7, 0.3});
    ConvergenceTable t = compare_to_pde(f0, {0.1, 0.05}, 0.2, 1e-4, M);
    REQUIRE(t.errors.size() == 2);
    CHECK(t.strictly_decreasing);
    CHECK(t.errors[1] < t.errors[0]);
    CHECK_THROWS_AS(compare_to_pde(f0, {0.1, 0.03}, 0.2, 1e-4, M), Error);
}

TEST_CASE("step preconditions") {
    Model M = test::default_model(16);
    Field f0 = equilibrium_density(M.pot, M.domain);
    JkoConfig cfg;
    cfg.tau = 0.6;
    CHECK_THROWS_AS(jko_step(f0, cfg, M), Error);
    cfg.tau = 0.05;
    Model L = M;
    L.mob = Mobility::log_mean(M.pot.V);
    CHECK_THROWS_AS(jko_step(f0, cfg, L), Error);
}
