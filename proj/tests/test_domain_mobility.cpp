#include <doctest.h>

#include <cmath>

#include "semidot/error.hpp"
#include "semidot/mobility.hpp"
#include "semidot/model.hpp"
#include "support.hpp"

using namespace semidot;

TEST_CASE("entropy of a uniform density") {
    // n dx = 1
    GridDomain d(1, 0.5 * 10.0 / 11.0, 11);
    CHECK(d.dx() * d.n() == doctest::Approx(1.0));
    PotentialSpec zero{"quadratic", 0.0, 1.0, 0, 0, 0}, one{"quadratic", 0.0, 1.0, 0, 0, 1.0};
    Field f = Field::Constant(11, 2, 0.5);
    CHECK(entropy(f, make_potentials({zero, zero}, zero, d), d) == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
    CHECK(entropy(f, make_potentials({one, one}, zero, d), d) == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-14));
    f(3, 0) = 0.0;
    CHECK(std::isfinite(entropy(f, make_potentials({zero, zero}, zero, d), d)));
}

TEST_CASE("equilibrium density") {
    GridDomain d(1, 1.0, 21);
    PotentialSpec zero{"quadratic", 0.0, 1.0, 0, 0, 0};
    Field u = equilibrium_density(make_potentials({zero, zero}, zero, d), d);
    CHECK((u.array() - u(0, 0)).abs().maxCoeff() < 1e-15);
    CHECK(total_mass(u, d) == doctest::Approx(1.0));

    PotentialSpec q{"quadratic", 2.0, 1.0, 0, 0, 0};
    PotentialPair pot = make_potentials({q}, q, d);
    Field finf = equilibrium_density(pot, d);
    double Z = 0.0;
    for (int p = 0; p < 21; ++p) Z += std::exp(-d.coord(p, 0) * d.coord(p, 0)) * d.dx();
    for (int p = 0; p < 21; ++p) CHECK(finf(p, 0) == doctest::Approx(std::exp(-d.coord(p, 0) * d.coord(p, 0)) / Z));

    // node-dependent shift changes node masses
    PotentialSpec shifted{"quadratic", 2.0, 1.0, 0, 0, 1.0};
    Eigen::VectorXd m = node_masses(equilibrium_density(make_potentials({q, shifted}, q, d), d), d);
    CHECK(m(0) / m(1) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("barrier check") {
    Model M = test::default_model(32);
    Field finf = equilibrium_density(M.pot, M.domain);
    double c = equilibrium_constant(M.pot, M.domain);
    CHECK(barrier_check(finf, M.pot, c, c).pass);
    Field f = finf;
    f(5, 1) *= 0.5;
    BarrierReport r = barrier_check(f, M.pot, c, c);
    CHECK_FALSE(r.pass);
    CHECK(r.min_point == 5);
    CHECK(r.min_node == 1);
    CHECK(r.message.find("5") != std::string::npos);
}

TEST_CASE("second moment of a uniform density") {
    GridDomain d(1, 1.0, 401);
    PotentialSpec zero{"quadratic", 0.0, 1.0, 0, 0, 0};
    Field u = equilibrium_density(make_potentials({zero}, zero, d), d);
    CHECK(second_moment(u, d) == doctest::Approx(1.0 / 3.0).epsilon(1e-2));
}

TEST_CASE("log-mean values") {
    CHECK(theta_log(1.0, 1.0) == 1.0);
    CHECK(theta_log(0.0, 1.0) == 0.0);
    CHECK(theta_log(1.0, std::exp(1.0)) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-15));
    CHECK(theta_log(2.0, 6.0) == 2.0 * theta_log(1.0, 3.0));
    CHECK(dtheta_log_da(1.0, 1.0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(theta_log(-1.0, 1.0), Error);
}

TEST_CASE("mobility evaluation") {
    GridDomain d(1, 1.0, 5);
    Field V = Field::Zero(5, 2);
    V.col(1).setConstant(1.0);
    Mobility lm = Mobility::log_mean(V);
    CHECK(lm.theta(0, 0, 1, 1.0, std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    Mobility mi = Mobility::mass_independent(Eigen::VectorXd::Zero(5));
    CHECK(mi.theta(2, 0, 1, 0.3, 7.0) == 1.0);
    CHECK(mi.dtheta1(2, 0, 1, 0.3, 7.0) == 0.0);

    Mobility flat = Mobility::log_mean(Field::Zero(5, 2));
    double s = 1.0, t = std::exp(1.0), e = 1e-5;
    double fd = (flat.theta(0, 0, 1, s + e, t) - flat.theta(0, 0, 1, s - e, t)) / (2 * e);
    CHECK(std::abs(flat.dtheta1(0, 0, 1, s, t) - fd) <= 1e-6 * std::abs(fd));
}

TEST_CASE("assumption checks") {
    Model M = test::default_model(16);
    AssumptionReport a = check_assumptions(Mobility::mass_independent(M.pot.W), 2, 200, 1);
    CHECK(a.all_pass());
    AssumptionReport b = check_assumptions(Mobility::log_mean(M.pot.V), 2, 200, 1);
    CHECK(b.all_pass());
    CHECK(std::isfinite(b.max_C));
}

TEST_CASE("A5 constant for the flat log-mean") {
    // int_0^1 theta_log(1-t, t)^{-1/2} dt by midpoint rule at high resolution
    const int N = 2000000;
    double ref = 0.0;
    for (int k = 0; k < N; ++k) {
        double t = (k + 0.5) / N;
        ref += 1.0 / std::sqrt(theta_log(1.0 - t, t)) / N;
    }
    Mobility flat = Mobility::log_mean(Field::Zero(3, 2));
    CHECK(flat.a5_constant(0, 0, 1) == doctest::Approx(ref).epsilon(1e-3));
}

TEST_CASE("random barrier density is normalized and positive") {
    Model M = test::default_model(24);
    for (std::uint64_t s = 0; s < 5; ++s) {
        Field f = random_barrier_density(M.pot, M.domain, s, 2.0);
        CHECK(total_mass(f, M.domain) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(f.minCoeff() > 0.0);
        CHECK_NOTHROW(validate_density(f, M.domain));
    }
    CHECK((random_barrier_density(M.pot, M.domain, 3) - random_barrier_density(M.pot, M.domain, 3)).norm() == 0.0);
}
