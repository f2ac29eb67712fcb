#include "semidot/mobility.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "semidot/error.hpp"

namespace semidot {

namespace {
constexpr double kSeriesThreshold = 1e-6;
}

double theta_log(double a, double b) {
    if (a < 0.0 || b < 0.0 || std::isnan(a) || std::isnan(b))
        throw Error(ErrorKind::InvalidArgument, "theta_log needs nonnegative arguments");
    if (a == 0.0 || b == 0.0) return 0.0;
    // order the arguments so the value is exactly symmetric
    double hi = std::max(a, b), lo = std::min(a, b);
    double d = hi - lo;
    double r = std::log1p(d / lo);
    if (r < kSeriesThreshold) return lo * (1.0 + r / 2.0 + r * r / 6.0);
    return d / r;
}

double dtheta_log_da(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "dtheta_log_da needs positive arguments");
    double r = std::log(a) - std::log(b);
    if (std::abs(r) < kSeriesThreshold) return 0.5 - r / 6.0 + r * r / 24.0;
    return (r + std::expm1(-r)) / (r * r);
}

Mobility Mobility::mass_independent(const Eigen::VectorXd& W) {
    Mobility m;
    m.kind_ = Kind::MassIndependent;
    m.W_ = W;
    return m;
}

Mobility Mobility::log_mean(const Field& V) {
    Mobility m;
    m.kind_ = Kind::LogMeanScaled;
    m.V_ = V;
    return m;
}

std::string Mobility::name() const {
    return kind_ == Kind::MassIndependent ? "mass_independent" : "log_mean";
}

int Mobility::num_points() const {
    return kind_ == Kind::MassIndependent ? static_cast<int>(W_.size()) : static_cast<int>(V_.rows());
}

double Mobility::theta(int p, int g, int h, double s, double t) const {
    if (s < 0.0 || t < 0.0) throw Error(ErrorKind::InvalidArgument, "mobility masses must be nonnegative");
    if (kind_ == Kind::MassIndependent) return std::exp(-W_(p));
    return theta_log(s * std::exp(V_(p, g)), t * std::exp(V_(p, h)));
}

double Mobility::dtheta1(int p, int g, int h, double s, double t) const {
    if (kind_ == Kind::MassIndependent) return 0.0;
    if (!(s > 0.0) || !(t > 0.0)) {
        std::ostringstream os;
        os << "dtheta1 needs positive masses at point " << p << ", got (" << s << "," << t << ")";
        throw Error(ErrorKind::NonPositive, os.str());
    }
    double eg = std::exp(V_(p, g));
    return eg * dtheta_log_da(s * eg, t * std::exp(V_(p, h)));
}

double Mobility::a5_constant(int p, int g, int h, int panels) const {
    if (panels % 2) ++panels;
    // t = u^2 on [0,1/2] and t = 1-u^2 on [1/2,1]; both integrands vanish at u = 0
    const double umax = std::sqrt(0.5);
    const double du = umax / panels;
    auto integrand = [&](double u, bool left) {
        if (u == 0.0) return 0.0;
        double t = left ? u * u : 1.0 - u * u;
        double th = theta(p, g, h, 1.0 - t, t);
        return 2.0 * u / std::sqrt(th);
    };
    double total = 0.0;
    for (int side = 0; side < 2; ++side) {
        bool left = side == 0;
        double s = integrand(0.0, left) + integrand(umax, left);
        for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * integrand(k * du, left);
        total += s * du / 3.0;
    }
    return total;
}

bool AssumptionReport::all_pass() const {
    for (const auto& it : items)
        if (!it.pass) return false;
    return true;
}

AssumptionReport check_assumptions(const Mobility& mob, int num_nodes, int samples, std::uint64_t seed, double tol) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> point(0, mob.num_points() - 1);
    std::uniform_int_distribution<int> node(0, num_nodes - 1);
    std::uniform_real_distribution<double> logmass(-4.0, 2.0);
    std::uniform_real_distribution<double> logscale(-3.0, 3.0);

    AssumptionReport::Item sym{"symmetry", true, 0.0, ""};
    AssumptionReport::Item pos{"positivity", true, 0.0, ""};
    AssumptionReport::Item mono{"monotonicity", true, 0.0, ""};
    AssumptionReport::Item homog{"homogeneity", true, 0.0, ""};
    AssumptionReport::Item cfin{"finite_C", true, 0.0, ""};
    AssumptionReport::Item indep{"mass_independence", true, 0.0, ""};
    AssumptionReport rep;

    for (int k = 0; k < samples; ++k) {
        int p = point(rng), g = node(rng), h = node(rng);
        double s = std::exp(logmass(rng)), t = std::exp(logmass(rng)), r = std::exp(logmass(rng));
        double lam = std::exp(logscale(rng));

        double a = mob.theta(p, g, h, s, t), b = mob.theta(p, h, g, t, s);
        double dsym = std::abs(a - b) / std::max(std::abs(a), 1e-300);
        sym.worst = std::max(sym.worst, dsym);
        if (dsym > tol) sym.pass = false;

        if (!(a > 0.0) || !std::isfinite(a)) {
            pos.pass = false;
            pos.worst = std::max(pos.worst, 1.0);
        }

        double lo = std::min(r, s), hi = std::max(r, s);
        double tl = mob.theta(p, g, h, lo, t), th = mob.theta(p, g, h, hi, t);
        double dm = (tl - th) / std::max(th, 1e-300);
        if (dm > 0.0) mono.worst = std::max(mono.worst, dm);
        if (dm > tol) mono.pass = false;

        double hs = mob.theta(p, g, h, lam * s, lam * t);
        double dh = std::abs(hs - lam * a) / std::max(lam * a, 1e-300);
        homog.worst = std::max(homog.worst, dh);
        if (dh > tol) homog.pass = false;

        if (mob.kind() == Mobility::Kind::MassIndependent) {
            double di = std::abs(mob.theta(p, g, h, r, lam) - a) / a;
            indep.worst = std::max(indep.worst, di);
            if (di != 0.0) indep.pass = false;
        }

        if (k < 64) {
            double C = mob.a5_constant(p, g, h);
            rep.max_C = std::max(rep.max_C, C);
            if (!std::isfinite(C) || !(C > 0.0)) {
                cfin.pass = false;
                std::ostringstream os;
                os << "C not finite at point " << p << " nodes " << g << "," << h;
                cfin.detail = os.str();
            }
        }
    }
    cfin.worst = rep.max_C;
    // a constant mobility is checked against (A0); homogeneity and C belong to the log-mean family
    if (mob.kind() == Mobility::Kind::MassIndependent)
        rep.items = {sym, pos, mono, indep};
    else
        rep.items = {sym, pos, mono, homog, cfin};
    return rep;
}

} // namespace semidot
