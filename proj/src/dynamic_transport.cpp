#include "semidot/dynamic_transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "semidot/error.hpp"

namespace semidot {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

void check_shape(const Field& f, const Model& model, const char* what) {
    if (f.rows() != model.points() || f.cols() != model.nodes()) {
        std::ostringstream os;
        os << what << " is " << f.rows() << "x" << f.cols() << ", expected " << model.points() << "x" << model.nodes();
        throw Error(ErrorKind::SizeMismatch, os.str());
    }
}

void require_positive(const Field& f, const Model& model, const char* what) {
    for (int g = 0; g < f.cols(); ++g)
        for (int p = 0; p < f.rows(); ++p)
            if (!(f(p, g) > 0.0) || !std::isfinite(f(p, g))) {
                std::ostringstream os;
                os << what << " must be positive; found " << f(p, g) << " at point " << p << " node "
                   << model.graph.nodes()[g];
                throw Error(ErrorKind::NonPositive, os.str());
            }
}

double theta(const Model& model, int p, int g, int h, const Field& f) {
    return model.mob.theta(p, g, h, f(p, g), f(p, h));
}

// A(f) = -(div_x(f grad .) + div_g(theta grad .)), unknowns indexed g*n + p
SpMat build_operator(const Field& f, const Model& model, double kappa) {
    const int n = model.points(), m = model.nodes();
    const double dx2 = model.domain.dx() * model.domain.dx();
    std::vector<Eigen::Triplet<double>> T;
    auto add = [&](int a, int b, double c) {
        T.emplace_back(a, a, c);
        T.emplace_back(b, b, c);
        T.emplace_back(a, b, -c);
        T.emplace_back(b, a, -c);
    };
    for (int g = 0; g < m; ++g)
        for (const auto& fc : model.domain.faces()) add(g * n + fc.lo, g * n + fc.hi, 0.5 * (f(fc.lo, g) + f(fc.hi, g)) / dx2);
    for (const auto& [g, h] : model.graph.edges())
        for (int p = 0; p < n; ++p) add(g * n + p, h * n + p, 2.0 * kappa * model.graph.K(g, h) * theta(model, p, g, h, f));
    SpMat A(n * m, n * m);
    A.setFromTriplets(T.begin(), T.end());
    return A;
}

// d(phi^T A phi)/df
Field operator_derivative(const Field& f, const Field& phi, const Model& model, double kappa) {
    const int n = model.points(), m = model.nodes();
    const double dx2 = model.domain.dx() * model.domain.dx();
    Field q = Field::Zero(n, m);
    for (int g = 0; g < m; ++g)
        for (const auto& fc : model.domain.faces()) {
            double d = phi(fc.hi, g) - phi(fc.lo, g);
            q(fc.lo, g) += 0.5 * d * d / dx2;
            q(fc.hi, g) += 0.5 * d * d / dx2;
        }
    if (model.mob.kind() != Mobility::Kind::MassIndependent)
        for (const auto& [g, h] : model.graph.edges())
            for (int p = 0; p < n; ++p) {
                double d = phi(p, h) - phi(p, g);
                double K = model.graph.K(g, h);
                q(p, g) += 2.0 * kappa * d * d * K * model.mob.dtheta1(p, g, h, f(p, g), f(p, h));
                q(p, h) += 2.0 * kappa * d * d * K * model.mob.dtheta1(p, h, g, f(p, h), f(p, g));
            }
    return q;
}

// Factorization of A(f) with one pinned unknown per connected component.
class Selector {
public:
    Selector(const Field& f, const Model& model, double kappa) : model_(model) {
        n_ = model.points();
        m_ = model.nodes();
        A_ = build_operator(f, model, kappa);
        const auto& comp = model.graph.components();
        comps_.assign(model.graph.component_count(), {});
        for (int g = 0; g < m_; ++g) comps_[comp[g]].push_back(g);
        const int N = n_ * m_;
        map_.assign(N, -1);
        std::vector<bool> pinned(N, false);
        for (const auto& c : comps_) pinned[c.front() * n_] = true;
        int k = 0;
        for (int i = 0; i < N; ++i)
            if (!pinned[i]) map_[i] = k++;
        std::vector<Eigen::Triplet<double>> T;
        for (int col = 0; col < A_.outerSize(); ++col)
            for (SpMat::InnerIterator it(A_, col); it; ++it)
                if (map_[it.row()] >= 0 && map_[it.col()] >= 0) T.emplace_back(map_[it.row()], map_[it.col()], it.value());
        SpMat R(k, k);
        R.setFromTriplets(T.begin(), T.end());
        ldlt_.compute(R);
        if (ldlt_.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "selection operator factorization failed");
        reduced_ = k;
    }

    const SpMat& A() const { return A_; }

    // phi with A phi = b, zero mean per component; b is projected to the range.
    // The zero-sum test is relative to sum|b| unless a larger scale is given.
    Field solve(Field b, double scale_hint = 0.0) const {
        const int N = n_ * m_;
        for (const auto& c : comps_) {
            double s = 0.0, a = 0.0;
            for (int g : c) s += b.col(g).sum(), a += b.col(g).cwiseAbs().sum();
            if (std::abs(s) > 1e-10 * std::max(a, scale_hint) && a > 0.0) {
                std::ostringstream os;
                os << "source does not sum to zero on the component of node " << model_.graph.nodes()[c.front()] << " (sum "
                   << s << ")";
                throw Error(ErrorKind::NotZeroSum, os.str());
            }
            double mean = s / (static_cast<double>(c.size()) * n_);
            for (int g : c) b.col(g).array() -= mean;
        }
        Eigen::Map<const Eigen::VectorXd> bv(b.data(), N);
        Eigen::VectorXd r(reduced_);
        for (int i = 0; i < N; ++i)
            if (map_[i] >= 0) r(map_[i]) = bv(i);
        Eigen::VectorXd y = ldlt_.solve(r);
        Field phi(n_, m_);
        Eigen::Map<Eigen::VectorXd> pv(phi.data(), N);
        for (int i = 0; i < N; ++i) pv(i) = map_[i] >= 0 ? y(map_[i]) : 0.0;
        for (const auto& c : comps_) {
            double mean = 0.0;
            for (int g : c) mean += phi.col(g).sum();
            mean /= static_cast<double>(c.size()) * n_;
            for (int g : c) phi.col(g).array() -= mean;
        }
        Eigen::VectorXd res = A_ * pv - bv;
        double scale = std::max(bv.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        if (res.cwiseAbs().maxCoeff() > 1e-8 * scale) {
            std::ostringstream os;
            os << "selection residual " << res.cwiseAbs().maxCoeff() / scale << " above 1e-8";
            throw Error(ErrorKind::NonConvergence, os.str());
        }
        return phi;
    }

private:
    const Model& model_;
    int n_ = 0, m_ = 0, reduced_ = 0;
    SpMat A_;
    std::vector<std::vector<int>> comps_;
    std::vector<int> map_;
    Eigen::SimplicialLDLT<SpMat> ldlt_;
};

Field apply(const SpMat& A, const Field& phi) {
    Eigen::Map<const Eigen::VectorXd> v(phi.data(), phi.size());
    Eigen::VectorXd r = A * v;
    return Eigen::Map<const Eigen::MatrixXd>(r.data(), phi.rows(), phi.cols());
}

// Action and its gradient with respect to the interior densities.
struct PathObjective {
    const Model& model;
    const Field& mu0;
    const Field& mu1;
    int T;
    double kappa;

    double eval(const std::vector<Field>& inner, std::vector<Field>* grad, DiscretePath* path) const {
        const double dt = 1.0 / T, w = model.domain.weight();
        auto dens = [&](int k) -> const Field& { return k == 0 ? mu0 : (k == T ? mu1 : inner[k - 1]); };
        double J = 0.0;
        if (grad) grad->assign(T - 1, Field::Zero(model.points(), model.nodes()));
        for (int k = 0; k < T; ++k) {
            Field fm = 0.5 * (dens(k) + dens(k + 1));
            Field r = (dens(k + 1) - dens(k)) / dt;
            Selector sel(fm, model, kappa);
            Field phi = sel.solve(r, (dens(k).cwiseAbs().sum() + dens(k + 1).cwiseAbs().sum()) / dt);
            J += dt * w * (r.array() * phi.array()).sum();
            if (grad) {
                Field dr = 2.0 * dt * w * phi;
                Field dm = -dt * w * operator_derivative(fm, phi, model, kappa);
                if (k >= 1) (*grad)[k - 1] += -dr / dt + 0.5 * dm;
                if (k + 1 <= T - 1) (*grad)[k] += dr / dt + 0.5 * dm;
            }
            if (path) {
                path->potentials.push_back(VelocityPotentials::single(phi));
                path->residuals.push_back((r - apply(sel.A(), phi)).cwiseAbs().maxCoeff());
            }
        }
        return J;
    }
};

} // namespace

Field transport_divergence(const Field& f, const VelocityPotentials& v, const Model& model, const DynamicOptions& opts) {
    check_shape(f, model, "density");
    check_shape(v.phi, model, "phi");
    check_shape(v.psi, model, "psi");
    const int n = model.points(), m = model.nodes();
    const double dx = model.domain.dx();
    Field out = Field::Zero(n, m);
    for (int g = 0; g < m; ++g)
        for (const auto& fc : model.domain.faces()) {
            double F = 0.5 * (f(fc.lo, g) + f(fc.hi, g)) * (v.phi(fc.hi, g) - v.phi(fc.lo, g)) / dx;
            out(fc.lo, g) += F / dx;
            out(fc.hi, g) -= F / dx;
        }
    for (const auto& [g, h] : model.graph.edges())
        for (int p = 0; p < n; ++p) {
            double t = 2.0 * opts.graph_weight * model.graph.K(g, h) * theta(model, p, g, h, f);
            out(p, g) += t * (v.psi(p, h) - v.psi(p, g));
            out(p, h) += t * (v.psi(p, g) - v.psi(p, h));
        }
    return out;
}

double continuity_residual(const Field& fa, const Field& fb, const VelocityPotentials& v, double dt, const Model& model,
                           const DynamicOptions& opts) {
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    check_shape(fa, model, "fa");
    check_shape(fb, model, "fb");
    Field fm = 0.5 * (fa + fb);
    return ((fb - fa) / dt + transport_divergence(fm, v, model, opts)).cwiseAbs().maxCoeff();
}

double kinetic_norm(const Field& f, const VelocityPotentials& v, const Model& model, const DynamicOptions& opts) {
    check_shape(f, model, "density");
    check_shape(v.phi, model, "phi");
    check_shape(v.psi, model, "psi");
    const double dx = model.domain.dx();
    double s = 0.0;
    for (int g = 0; g < model.nodes(); ++g)
        for (const auto& fc : model.domain.faces()) {
            double d = (v.phi(fc.hi, g) - v.phi(fc.lo, g)) / dx;
            s += 0.5 * (f(fc.lo, g) + f(fc.hi, g)) * d * d;
        }
    for (const auto& [g, h] : model.graph.edges())
        for (int p = 0; p < model.points(); ++p) {
            double d = v.psi(p, h) - v.psi(p, g);
            // both orderings of the pair
            s += 2.0 * opts.graph_weight * d * d * model.graph.K(g, h) * theta(model, p, g, h, f);
        }
    return s * model.domain.weight();
}

double kinetic_action(const DiscretePath& path, const Model& model, const DynamicOptions& opts) {
    if (path.densities.size() != path.potentials.size() + 1 || path.times.size() != path.densities.size())
        throw Error(ErrorKind::SizeMismatch, "path needs one potential per interval and one time per density");
    double s = 0.0;
    for (std::size_t k = 0; k < path.potentials.size(); ++k) {
        double dt = path.times[k + 1] - path.times[k];
        Field fm = 0.5 * (path.densities[k] + path.densities[k + 1]);
        s += dt * kinetic_norm(fm, path.potentials[k], model, opts);
    }
    return s;
}

Field minimal_selection(const Field& f, const Field& source, const Model& model, const DynamicOptions& opts) {
    check_shape(f, model, "density");
    check_shape(source, model, "source");
    require_positive(f, model, "density");
    if (!source.allFinite()) throw Error(ErrorKind::InvalidArgument, "source must be finite");
    Selector sel(f, model, opts.graph_weight);
    return sel.solve(-source);
}

DecompositionReport decomposition_check(const Field& phi, const Field& psi, const GridDomain& domain,
                                        const std::vector<std::string>& node_names, double tol) {
    if (phi.rows() != psi.rows() || phi.cols() != psi.cols()) throw Error(ErrorKind::SizeMismatch, "phi and psi differ in shape");
    (void)domain;
    DecompositionReport rep;
    Field D = phi - psi;
    const int n = static_cast<int>(D.rows()), m = static_cast<int>(D.cols());
    if (n == 0 || m == 0) return rep;
    Eigen::VectorXd a = D.rowwise().mean();
    Eigen::RowVectorXd b = D.colwise().mean();
    double c = D.mean();
    Field R = D;
    for (int g = 0; g < m; ++g)
        for (int i = 0; i < n; ++i) R(i, g) -= a(i) + b(g) - c;
    double norm = D.norm();
    rep.residual = norm > 0.0 ? R.norm() / norm : 0.0;
    double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
    int wi = -1, wg = -1, wh = -1;
    for (int i = 1; i < n; ++i)
        for (int g = 0; g < m; ++g)
            for (int h = g + 1; h < m; ++h) {
                double v = std::abs(D(i, g) - D(i, h) - D(0, g) + D(0, h));
                if (v > rep.max_four_point) rep.max_four_point = v, wi = i, wg = g, wh = h;
            }
    rep.separable = rep.residual <= tol && rep.max_four_point <= tol * scale;
    if (!rep.separable && wi >= 0) {
        auto name = [&](int g) { return g < static_cast<int>(node_names.size()) ? node_names[g] : std::to_string(g); };
        std::ostringstream os;
        os << "points (" << wi << ", 0) x nodes (" << name(wg) << ", " << name(wh) << "): four-point combination "
           << rep.max_four_point;
        rep.witness = os.str();
    }
    return rep;
}

DynamicW2Result dynamic_w2(const Field& mu0, const Field& mu1, const Model& model, const DynamicW2Options& opts) {
    check_shape(mu0, model, "mu0");
    check_shape(mu1, model, "mu1");
    require_positive(mu0, model, "mu0");
    require_positive(mu1, model, "mu1");
    if (opts.T_steps < 1) throw Error(ErrorKind::InvalidArgument, "T_steps must be >= 1");
    const int T = opts.T_steps, n = model.points(), m = model.nodes();
    const double w = model.domain.weight();
    const auto& comp = model.graph.components();
    const int nc = model.graph.component_count();
    std::vector<double> M(nc, 0.0), M1(nc, 0.0);
    for (int g = 0; g < m; ++g) M[comp[g]] += mu0.col(g).sum() * w, M1[comp[g]] += mu1.col(g).sum() * w;
    for (int c = 0; c < nc; ++c)
        if (std::abs(M[c] - M1[c]) > 1e-9 * std::max(M[c], M1[c]))
            throw Error(ErrorKind::Infeasible, "endpoints carry different mass on a connected component");

    PathObjective obj{model, mu0, mu1, T, opts.op.graph_weight};
    // u = log f, normalized per component by a softmax
    auto densities = [&](const std::vector<Field>& u) {
        std::vector<Field> f(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) {
            f[k] = Field(n, m);
            for (int c = 0; c < nc; ++c) {
                double top = -std::numeric_limits<double>::infinity();
                for (int g = 0; g < m; ++g)
                    if (comp[g] == c) top = std::max(top, u[k].col(g).maxCoeff());
                double Z = 0.0;
                for (int g = 0; g < m; ++g)
                    if (comp[g] == c) {
                        f[k].col(g) = (u[k].col(g).array() - top).exp();
                        Z += f[k].col(g).sum();
                    }
                for (int g = 0; g < m; ++g)
                    if (comp[g] == c) f[k].col(g) *= M[c] / (w * Z);
            }
        }
        return f;
    };
    auto chain = [&](const std::vector<Field>& f, const std::vector<Field>& G) {
        std::vector<Field> gu(f.size());
        for (std::size_t k = 0; k < f.size(); ++k) {
            std::vector<double> avg(nc, 0.0);
            for (int g = 0; g < m; ++g) avg[comp[g]] += (G[k].col(g).array() * f[k].col(g).array()).sum() * w;
            gu[k] = Field(n, m);
            for (int g = 0; g < m; ++g)
                gu[k].col(g) = f[k].col(g).array() * (G[k].col(g).array() - avg[comp[g]] / M[comp[g]]);
        }
        return gu;
    };
    auto dot = [](const std::vector<Field>& a, const std::vector<Field>& b) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += (a[k].array() * b[k].array()).sum();
        return s;
    };
    auto inf_norm = [](const std::vector<Field>& a) {
        double s = 0.0;
        for (const auto& x : a) s = std::max(s, x.cwiseAbs().maxCoeff());
        return s;
    };

    std::vector<Field> u(T - 1);
    for (int k = 1; k < T; ++k) {
        double s = static_cast<double>(k) / T;
        u[k - 1] = ((1.0 - s) * mu0 + s * mu1).array().log();
    }
    DynamicW2Result out;
    std::vector<Field> f = densities(u), G, gu;
    double J = obj.eval(f, &G, nullptr);
    gu = chain(f, G);
    double alpha = 0.0;
    int it = 0;
    std::vector<double> history;
    const int window = 100;
    for (; it < opts.max_iter && T > 1; ++it) {
        double gn = inf_norm(gu);
        history.push_back(J);
        // stalled over the window, or an action indistinguishable from zero
        bool stalled = it >= window && history[it - window] - J <= opts.tol * J;
        if (stalled || J <= 1e-20 || gn == 0.0) {
            out.converged = true;
            break;
        }
        if (alpha <= 0.0) alpha = 0.1 / gn;
        double g2 = dot(gu, gu);
        bool ok = false;
        std::vector<Field> un(u.size()), fn, Gn;
        double Jn = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t k = 0; k < u.size(); ++k) un[k] = u[k] - alpha * gu[k];
            fn = densities(un);
            Jn = obj.eval(fn, &Gn, nullptr);
            if (std::isfinite(Jn) && Jn <= J - 1e-4 * alpha * g2) {
                ok = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!ok) break;
        std::vector<Field> gun = chain(fn, Gn);
        double sy = 0.0, ss = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            Field s = un[k] - u[k], y = gun[k] - gu[k];
            sy += (s.array() * y.array()).sum();
            ss += s.squaredNorm();
        }
        alpha = sy > 0.0 ? ss / sy : 2.0 * alpha;
        u = std::move(un);
        f = std::move(fn);
        J = Jn;
        gu = std::move(gun);
    }
    if (T == 1) out.converged = true;
    out.iterations = it;

    DiscretePath& path = out.path;
    for (int k = 0; k <= T; ++k) {
        path.times.push_back(static_cast<double>(k) / T);
        path.densities.push_back(k == 0 ? mu0 : (k == T ? mu1 : f[k - 1]));
    }
    out.action = obj.eval(f, nullptr, &path);
    out.distance = std::sqrt(std::max(0.0, out.action));
    for (double r : path.residuals) out.max_continuity_residual = std::max(out.max_continuity_residual, r);
    return out;
}

namespace {

std::pair<Field, Field> hamiltonian_step(const Field& f, const Field& phi, double dt, const Model& model,
                                         const DynamicOptions& opts, const Field* extra) {
    check_shape(f, model, "density");
    check_shape(phi, model, "phi");
    require_positive(f, model, "density");
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    const double kappa = opts.graph_weight;
    Field fn = f - dt * transport_divergence(f, VelocityPotentials::single(phi), model, opts);
    Field pn = phi - dt * 0.5 * operator_derivative(f, phi, model, kappa);
    if (extra) pn -= dt * *extra;
    for (int g = 0; g < fn.cols(); ++g)
        for (int p = 0; p < fn.rows(); ++p)
            if (!(fn(p, g) > 0.0)) {
                std::ostringstream os;
                os << "density became " << fn(p, g) << " at point " << p << " node " << model.graph.nodes()[g]
                   << "; reduce dt";
                throw Error(ErrorKind::NonPositive, os.str());
            }
    return {fn, pn};
}

} // namespace

std::pair<Field, Field> geodesic_step(const Field& f, const Field& phi, double dt, const Model& model,
                                      const DynamicOptions& opts) {
    return hamiltonian_step(f, phi, dt, model, opts, nullptr);
}

std::pair<Field, Field> second_order_step(const Field& f, const Field& phi, double dt, double gamma, const Model& model,
                                          const DynamicOptions& opts) {
    if (!(gamma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "damping must be nonnegative");
    check_shape(f, model, "density");
    require_positive(f, model, "density");
    Field force = gamma * phi + Field(f.array().log()) + model.pot.V;
    return hamiltonian_step(f, phi, dt, model, opts, &force);
}

double lyapunov(const Field& f, const Field& phi, const Model& model, const DynamicOptions& opts) {
    return 0.5 * kinetic_norm(f, VelocityPotentials::single(phi), model, opts) + entropy(f, model.pot, model.domain);
}

} // namespace semidot
