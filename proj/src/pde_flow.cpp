#include "semidot/pde_flow.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include <Eigen/Sparse>

#include "semidot/error.hpp"

namespace semidot {

namespace {

// B(z) = z / (e^z - 1)
double bernoulli(double z) {
    if (std::abs(z) < 1e-5) return 1.0 - z / 2.0 + z * z / 12.0;
    return z / std::expm1(z);
}

void require_positive(const Field& f, int p, int g) {
    if (!(f(p, g) > 0.0)) {
        std::ostringstream os;
        os << "density " << f(p, g) << " at point " << p << " node " << g << " where log f is needed";
        throw Error(ErrorKind::NonPositive, os.str());
    }
}

void check_shape(const Field& f, const Model& model) {
    if (f.rows() != model.points() || f.cols() != model.nodes()) {
        std::ostringstream os;
        os << "field is " << f.rows() << "x" << f.cols() << ", model is " << model.points() << "x" << model.nodes();
        throw Error(ErrorKind::SizeMismatch, os.str());
    }
}

// plain no-flux Laplacian used by the semi-implicit option
Field neumann_laplacian(const Field& f, const GridDomain& domain) {
    Field out = Field::Zero(f.rows(), f.cols());
    const double inv = 1.0 / (domain.dx() * domain.dx());
    for (const auto& fc : domain.faces()) {
        Eigen::RowVectorXd J = (f.row(fc.hi) - f.row(fc.lo)) * inv;
        out.row(fc.lo) += J;
        out.row(fc.hi) -= J;
    }
    return out;
}

class ImplicitDiffusion {
public:
    ImplicitDiffusion(const GridDomain& domain, double dt) : domain_(domain), dt_(dt) {
        const int N = domain.num_points();
        const double c = dt / (domain.dx() * domain.dx());
        if (domain.dimension() == 1) {
            lower_.assign(N, -c);
            upper_.assign(N, -c);
            diag_.assign(N, 1.0 + 2.0 * c);
            diag_[0] = diag_[N - 1] = 1.0 + c;
        } else {
            std::vector<Eigen::Triplet<double>> trip;
            Eigen::VectorXd d = Eigen::VectorXd::Ones(N);
            for (const auto& fc : domain.faces()) {
                trip.emplace_back(fc.lo, fc.hi, -c);
                trip.emplace_back(fc.hi, fc.lo, -c);
                d(fc.lo) += c;
                d(fc.hi) += c;
            }
            for (int p = 0; p < N; ++p) trip.emplace_back(p, p, d(p));
            Eigen::SparseMatrix<double> A(N, N);
            A.setFromTriplets(trip.begin(), trip.end());
            ldlt_.compute(A);
            if (ldlt_.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "implicit diffusion factorization");
        }
    }

    Field solve(const Field& b) const {
        if (domain_.dimension() == 2) return ldlt_.solve(b);
        const int N = static_cast<int>(b.rows());
        Field x(b.rows(), b.cols());
        std::vector<double> cp(N), dp(N);
        for (int g = 0; g < b.cols(); ++g) {
            cp[0] = upper_[0] / diag_[0];
            dp[0] = b(0, g) / diag_[0];
            for (int i = 1; i < N; ++i) {
                double den = diag_[i] - lower_[i] * cp[i - 1];
                cp[i] = upper_[i] / den;
                dp[i] = (b(i, g) - lower_[i] * dp[i - 1]) / den;
            }
            x(N - 1, g) = dp[N - 1];
            for (int i = N - 2; i >= 0; --i) x(i, g) = dp[i] - cp[i] * x(i + 1, g);
        }
        return x;
    }

    double dt() const { return dt_; }

private:
    const GridDomain& domain_;
    double dt_;
    std::vector<double> lower_, diag_, upper_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

void check_cfl(const FlowConfig& cfg, const Model& model) {
    if (!(cfg.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
    if (cfg.scheme == Scheme::Explicit) {
        double lim = explicit_dt_limit(model);
        if (cfg.dt > lim * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "explicit step dt = " << cfg.dt << " exceeds 0.25 dx^2/(1 + max|grad V| dx)/d = " << lim;
            throw Error(ErrorKind::InvalidArgument, os.str());
        }
    }
}

Field advance(const Field& f, double dt, Scheme scheme, const Model& model, const ImplicitDiffusion* imp) {
    Field r = rhs(f, model);
    Field out;
    if (scheme == Scheme::Explicit) {
        out = f + dt * r;
    } else {
        out = imp->solve(f + dt * (r - neumann_laplacian(f, model.domain)));
    }
    for (int g = 0; g < out.cols(); ++g)
        for (int p = 0; p < out.rows(); ++p)
            if (!(out(p, g) > 0.0)) {
                std::ostringstream os;
                os << "step produced density " << out(p, g) << " at point " << p << " node " << g
                   << " (dt = " << dt << ")";
                throw Error(ErrorKind::NonPositive, os.str());
            }
    return out;
}

} // namespace

double explicit_dt_limit(const Model& model) {
    const GridDomain& d = model.domain;
    double gmax = 0.0;
    for (int p = 0; p < d.num_points(); ++p)
        for (int g = 0; g < model.nodes(); ++g) {
            double s = 0.0;
            for (int a = 0; a < d.dimension(); ++a) s += model.pot.gradV[a](p, g) * model.pot.gradV[a](p, g);
            gmax = std::max(gmax, std::sqrt(s));
        }
    return 0.25 * d.dx() * d.dx() / (1.0 + gmax * d.dx()) / d.dimension();
}

Field spatial_rhs(const Field& f, const Model& model) {
    check_shape(f, model);
    const GridDomain& d = model.domain;
    const double inv = 1.0 / (d.dx() * d.dx());
    Field out = Field::Zero(f.rows(), f.cols());
    for (int g = 0; g < f.cols(); ++g)
        for (const auto& fc : d.faces()) {
            double z = model.pot.V(fc.hi, g) - model.pot.V(fc.lo, g);
            double J = (bernoulli(-z) * f(fc.hi, g) - bernoulli(z) * f(fc.lo, g)) * inv;
            out(fc.lo, g) += J;
            out(fc.hi, g) -= J;
        }
    return out;
}

Field exchange_rhs(const Field& f, const Model& model) {
    check_shape(f, model);
    const int N = model.points(), m = model.nodes();
    Field out = Field::Zero(N, m);
    const auto& V = model.pot.V;
    if (model.mob.kind() == Mobility::Kind::LogMeanScaled) {
        // (phi_g - phi_h) theta_log(f_g e^{V_g}, f_h e^{V_h}) = f_g e^{V_g} - f_h e^{V_h}
        for (const auto& [g, h] : model.graph.edges()) {
            double K = model.graph.K(g, h);
            for (int p = 0; p < N; ++p) {
                double flow = (f(p, g) * std::exp(V(p, g)) - f(p, h) * std::exp(V(p, h))) * K;
                out(p, g) -= flow;
                out(p, h) += flow;
            }
        }
        return out;
    }
    for (const auto& [g, h] : model.graph.edges()) {
        double K = model.graph.K(g, h);
        for (int p = 0; p < N; ++p) {
            require_positive(f, p, g);
            require_positive(f, p, h);
            double dphi = std::log(f(p, g)) + V(p, g) - std::log(f(p, h)) - V(p, h);
            double flow = dphi * K * model.mob.theta(p, g, h, f(p, g), f(p, h));
            out(p, g) -= flow;
            out(p, h) += flow;
        }
    }
    return out;
}

Field rhs(const Field& f, const Model& model) {
    Field out = spatial_rhs(f, model);
    if (!model.graph.edges().empty()) out += exchange_rhs(f, model);
    return out;
}

Field step(const Field& f, const FlowConfig& cfg, const Model& model) {
    check_shape(f, model);
    check_cfl(cfg, model);
    if (cfg.scheme == Scheme::Explicit) return advance(f, cfg.dt, cfg.scheme, model, nullptr);
    ImplicitDiffusion imp(model.domain, cfg.dt);
    return advance(f, cfg.dt, cfg.scheme, model, &imp);
}

Trajectory run(const Field& f0, const FlowConfig& cfg, const Model& model, std::optional<Barrier> barrier) {
    check_shape(f0, model);
    check_cfl(cfg, model);
    if (!(cfg.T >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon T must be nonnegative");
    if (cfg.record_every < 1) throw Error(ErrorKind::InvalidArgument, "record_every must be >= 1");

    Trajectory tr;
    const double mass0 = total_mass(f0, model.domain);
    auto record = [&](double t, const Field& f, double E) {
        BarrierReport b = barrier_check(f, model.pot, 0.0, INFINITY);
        tr.times.push_back(t);
        tr.densities.push_back(f);
        tr.energies.push_back(E);
        tr.barrier_min.push_back(b.min_ratio);
        tr.barrier_max.push_back(b.max_ratio);
    };
    double E = entropy(f0, model.pot, model.domain);
    record(0.0, f0, E);

    const long nsteps = static_cast<long>(std::ceil(cfg.T / cfg.dt - 1e-9));
    std::unique_ptr<ImplicitDiffusion> full, last;
    if (cfg.scheme == Scheme::SemiImplicit) full = std::make_unique<ImplicitDiffusion>(model.domain, cfg.dt);

    Field f = f0;
    double t = 0.0;
    for (long k = 1; k <= nsteps; ++k) {
        double h = std::min(cfg.dt, cfg.T - t);
        if (k == nsteps) h = cfg.T - t;
        const ImplicitDiffusion* imp = full.get();
        if (cfg.scheme == Scheme::SemiImplicit && std::abs(h - cfg.dt) > 1e-14 * cfg.dt) {
            last = std::make_unique<ImplicitDiffusion>(model.domain, h);
            imp = last.get();
        }
        f = advance(f, h, cfg.scheme, model, imp);
        t = (k == nsteps) ? cfg.T : t + h;
        double En = entropy(f, model.pot, model.domain);
        tr.max_energy_increase = std::max(tr.max_energy_increase, En - E);
        E = En;
        tr.max_mass_defect = std::max(tr.max_mass_defect, std::abs(total_mass(f, model.domain) - mass0));
        if (barrier) {
            BarrierReport b = barrier_check(f, model.pot, barrier->lambda, barrier->Lambda);
            if (!b.pass) {
                if (tr.barrier_violations == 0) {
                    std::ostringstream os;
                    os << "t = " << t << ": " << b.message;
                    tr.first_violation = os.str();
                }
                ++tr.barrier_violations;
            }
        }
        ++tr.steps;
        if (k % cfg.record_every == 0 || k == nsteps) record(t, f, E);
    }
    return tr;
}

double weak_form_residual(const Trajectory& traj, const Field& zeta, double r, double s, const Model& model) {
    if (!(r < s)) throw Error(ErrorKind::InvalidArgument, "weak form needs r < s");
    check_shape(zeta, model);
    auto find = [&](double t) {
        for (size_t k = 0; k < traj.times.size(); ++k)
            if (std::abs(traj.times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(k);
        std::ostringstream os;
        os << "time " << t << " is not a recorded time";
        throw Error(ErrorKind::InvalidArgument, os.str());
    };
    const int kr = find(r), ks = find(s);
    const GridDomain& d = model.domain;
    const int N = model.points(), m = model.nodes();

    // spatial generator applied to zeta: Laplace zeta - grad V . grad zeta
    Field gen = Field::Zero(N, m);
    const double inv = 1.0 / (d.dx() * d.dx());
    for (const auto& fc : d.faces()) {
        Eigen::RowVectorXd F = (zeta.row(fc.hi) - zeta.row(fc.lo)) * inv;
        gen.row(fc.lo) += F;
        gen.row(fc.hi) -= F;
    }
    for (int a = 0; a < d.dimension(); ++a)
        gen -= model.pot.gradV[a].cwiseProduct(centered_gradient(zeta, d, a));

    auto integrand = [&](const Field& f) {
        double val = f.cwiseProduct(gen).sum();
        double ex = 0.0;
        for (const auto& [g, h] : model.graph.edges()) {
            double K = model.graph.K(g, h);
            for (int p = 0; p < N; ++p) {
                double flow;
                if (model.mob.kind() == Mobility::Kind::LogMeanScaled) {
                    flow = f(p, h) * std::exp(model.pot.V(p, h)) - f(p, g) * std::exp(model.pot.V(p, g));
                } else {
                    require_positive(f, p, g);
                    require_positive(f, p, h);
                    double dphi = std::log(f(p, h)) + model.pot.V(p, h) - std::log(f(p, g)) - model.pot.V(p, g);
                    flow = dphi * model.mob.theta(p, g, h, f(p, g), f(p, h));
                }
                // ordered pairs (g,h) and (h,g) both contribute: the 1/2 cancels
                ex += (zeta(p, h) - zeta(p, g)) * flow * K;
            }
        }
        return (val - ex) * d.weight();
    };

    double lhs = (zeta.cwiseProduct(traj.densities[ks] - traj.densities[kr])).sum() * d.weight();
    double integral = 0.0;
    double prev = integrand(traj.densities[kr]);
    for (int k = kr + 1; k <= ks; ++k) {
        double cur = integrand(traj.densities[k]);
        integral += 0.5 * (traj.times[k] - traj.times[k - 1]) * (prev + cur);
        prev = cur;
    }
    return std::abs(lhs - integral);
}

} // namespace semidot
