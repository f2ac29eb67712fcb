#include "semidot/jko.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "fiber_ot.hpp"
#include "newton.hpp"
#include "semidot/error.hpp"
#include "semidot/transport1d.hpp"

namespace semidot {

namespace {

int worker_count() {
    const char* s = std::getenv("SEMIDOT_THREADS");
    if (!s) return 1;
    int k = std::atoi(s);
    return std::max(1, k);
}

// Variables: transported densities b_g (nodes with mass) followed by one
// exchange value per live edge and cell. sigma is linear in them.
class JkoProblem : public detail::NewtonProblem {
public:
    JkoProblem(const Field& mu, double tau, const Model& model, int mult)
        : mu_(mu), tau_(tau), model_(model), mult_(mult) {
        n_ = model.points();
        m_ = model.nodes();
        dx_ = model.domain.weight();
        ot_.left = detail::cell_left_edge(model.domain);
        ot_.dx = model.domain.dx();
        w_ = (-model.pot.W.array()).exp();
        Eigen::VectorXd M = node_masses(mu, model.domain);
        std::vector<double> comp_mass(model.graph.component_count(), 0.0);
        for (int g = 0; g < m_; ++g) {
            pos_.push_back(M(g) > 0.0);
            comp_mass[model.graph.components()[g]] += M(g);
        }
        for (int g = 0; g < m_; ++g) live_.push_back(comp_mass[model.graph.components()[g]] > 0.0);
        for (const auto& e : model.graph.edges())
            if (live_[e.first]) edges_.push_back(e);
        nb_ = n_ * m_;
        nx_ = nb_ + static_cast<int>(edges_.size()) * n_;
    }

    int size() const { return nx_; }
    int hidx(int e, int p) const { return nb_ + e * n_ + p; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    bool positive(int g) const { return pos_[g]; }
    bool live(int g) const { return live_[g]; }
    double ekw(int e, int p) const { return model_.graph.K(edges_[e].first, edges_[e].second) * w_(p); }

    Field sigma(const Eigen::VectorXd& x) const {
        Field s = Eigen::Map<const Eigen::MatrixXd>(x.data(), n_, m_);
        for (int e = 0; e < static_cast<int>(edges_.size()); ++e)
            for (int p = 0; p < n_; ++p) {
                double t = tau_ * ekw(e, p) * x(hidx(e, p));
                s(p, edges_[e].first) -= t;
                s(p, edges_[e].second) += t;
            }
        return s;
    }

    bool inside(const Eigen::VectorXd& x, const Field& s) const {
        for (int g = 0; g < m_; ++g) {
            if (pos_[g] && !(x.segment(g * n_, n_).array() > 0.0).all()) return false;
            if (live_[g] && !(s.col(g).array() > 0.0).all()) return false;
        }
        return true;
    }

    double w2_part(const Eigen::VectorXd& x) const {
        double t = 0.0;
        for (int g = 0; g < m_; ++g)
            if (pos_[g]) t += ot_.value(mu_.col(g) * dx_, x.segment(g * n_, n_));
        return mult_ * t / (2.0 * tau_);
    }

    double exchange_part(const Eigen::VectorXd& x) const {
        double t = 0.0;
        for (int e = 0; e < static_cast<int>(edges_.size()); ++e)
            for (int p = 0; p < n_; ++p) {
                double h = x(hidx(e, p));
                t += h * h * ekw(e, p);
            }
        return 0.5 * tau_ * t * dx_;
    }

    double value(const Eigen::VectorXd& x) const override {
        Field s = sigma(x);
        if (!inside(x, s)) return std::numeric_limits<double>::infinity();
        return w2_part(x) + exchange_part(x) + entropy(s, model_.pot, model_.domain);
    }

    Field phi(const Field& s) const {
        Field f = Field::Zero(n_, m_);
        for (int g = 0; g < m_; ++g)
            if (live_[g])
                for (int p = 0; p < n_; ++p) f(p, g) = std::log(s(p, g)) + model_.pot.V(p, g);
        return f;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
        Field s = sigma(x);
        Field ph = phi(s);
        Eigen::VectorXd G = Eigen::VectorXd::Zero(nx_);
        for (int g = 0; g < m_; ++g) {
            if (!pos_[g]) continue;
            G.segment(g * n_, n_) = mult_ / (2.0 * tau_) * ot_.gradient(mu_.col(g) * dx_, x.segment(g * n_, n_));
            G.segment(g * n_, n_).array() += dx_ * (ph.col(g).array() + 1.0);
        }
        for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
            auto [a, b] = edges_[e];
            for (int p = 0; p < n_; ++p)
                G(hidx(e, p)) = tau_ * ekw(e, p) * dx_ * (x(hidx(e, p)) - (ph(p, a) - ph(p, b)));
        }
        return G;
    }

    Eigen::MatrixXd basis(const Eigen::VectorXd& x) const override {
        int cols = static_cast<int>(edges_.size()) * n_;
        for (int g = 0; g < m_; ++g)
            if (pos_[g]) cols += n_ - 1;
        Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(nx_, cols);
        int c = 0;
        for (int g = 0; g < m_; ++g) {
            if (!pos_[g]) continue;
            int r;
            x.segment(g * n_, n_).maxCoeff(&r);
            for (int p = 0; p < n_; ++p) {
                if (p == r) continue;
                Z(g * n_ + p, c) = 1.0;
                Z(g * n_ + r, c) = -1.0;
                ++c;
            }
        }
        for (int k = nb_; k < nx_; ++k) Z(k, c++) = 1.0;
        return Z;
    }

    Eigen::MatrixXd reduced_hessian(const Eigen::VectorXd& x, const Eigen::MatrixXd& Z) const override {
        const int k = static_cast<int>(Z.cols());
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(k, k);
        // transport: block per fiber, only the columns that touch it
        for (int g = 0; g < m_; ++g) {
            if (!pos_[g]) continue;
            std::vector<int> touch;
            for (int c = 0; c < k; ++c)
                if (Z.col(c).segment(g * n_, n_).cwiseAbs().maxCoeff() > 0.0) touch.push_back(c);
            if (touch.empty()) continue;
            Eigen::MatrixXd Zg(n_, touch.size());
            for (std::size_t a = 0; a < touch.size(); ++a) Zg.col(static_cast<int>(a)) = Z.col(touch[a]).segment(g * n_, n_);
            Eigen::MatrixXd Hg = Zg.transpose() * ot_.hessian(mu_.col(g) * dx_, x.segment(g * n_, n_)) * Zg;
            for (std::size_t a = 0; a < touch.size(); ++a)
                for (std::size_t b = 0; b < touch.size(); ++b) H(touch[a], touch[b]) += mult_ / (2.0 * tau_) * Hg(a, b);
        }
        // entropy through the linear map to sigma
        Field s = sigma(x);
        Eigen::MatrixXd PZ(nb_, k);
        for (int c = 0; c < k; ++c) {
            Field sc = sigma(Z.col(c));
            PZ.col(c) = Eigen::Map<const Eigen::VectorXd>(sc.data(), nb_);
        }
        Eigen::VectorXd d = Eigen::VectorXd::Zero(nb_);
        for (int g = 0; g < m_; ++g)
            if (live_[g])
                for (int p = 0; p < n_; ++p) d(g * n_ + p) = dx_ / s(p, g);
        H += PZ.transpose() * d.asDiagonal() * PZ;
        // exchange
        for (int c = 0; c < k; ++c)
            for (int e = 0; e < static_cast<int>(edges_.size()); ++e)
                for (int p = 0; p < n_; ++p) {
                    double z = Z(hidx(e, p), c);
                    if (z != 0.0)
                        for (int c2 = 0; c2 < k; ++c2) {
                            double z2 = Z(hidx(e, p), c2);
                            if (z2 != 0.0) H(c, c2) += tau_ * ekw(e, p) * dx_ * z * z2;
                        }
                }
        return H;
    }

    double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& d) const override {
        double a = std::numeric_limits<double>::infinity();
        Field s = sigma(x), ds = sigma(d);
        for (int g = 0; g < m_; ++g)
            for (int p = 0; p < n_; ++p) {
                if (pos_[g] && d(g * n_ + p) < 0.0) a = std::min(a, -x(g * n_ + p) / d(g * n_ + p));
                if (live_[g] && ds(p, g) < 0.0) a = std::min(a, -s(p, g) / ds(p, g));
            }
        return a;
    }

    double residual(const Eigen::VectorXd&, const Eigen::VectorXd& grad, const Eigen::MatrixXd& Z) const override {
        double r = 0.0;
        for (int c = 0; c < Z.cols(); ++c) {
            double v = Z.col(c).dot(grad);
            bool is_h = false;
            for (int e = 0; e < static_cast<int>(edges_.size()) && !is_h; ++e)
                for (int p = 0; p < n_; ++p)
                    if (Z(hidx(e, p), c) != 0.0) {
                        r = std::max(r, std::abs(v) / (tau_ * ekw(e, p) * dx_));
                        is_h = true;
                        break;
                    }
            if (!is_h) r = std::max(r, std::abs(v) / dx_);
        }
        return r;
    }

private:
    const Field& mu_;
    double tau_;
    const Model& model_;
    int mult_;
    int n_ = 0, m_ = 0, nb_ = 0, nx_ = 0;
    double dx_ = 1.0;
    detail::FiberOT ot_;
    Eigen::VectorXd w_;
    std::vector<bool> pos_, live_;
    std::vector<std::pair<int, int>> edges_;
};

// starting point: b = mu, h = 0 when that keeps sigma positive; otherwise
// smooth b and route part of every cell's mass to each node of its component
Eigen::VectorXd initial_point(const Field& mu, double tau, const Model& model, const JkoProblem& prob) {
    const int n = model.points(), m = model.nodes();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(prob.size());
    bool plain = true;
    for (int g = 0; g < m; ++g)
        if (prob.live(g) && !(mu.col(g).array() > 0.0).all()) plain = false;
    Field b = Field::Zero(n, m);
    Eigen::VectorXd M = node_masses(mu, model.domain);
    for (int g = 0; g < m; ++g)
        if (prob.positive(g))
            b.col(g) = plain ? Eigen::VectorXd(mu.col(g))
                             : Eigen::VectorXd(0.5 * mu.col(g).array() + 0.5 * M(g) / (n * model.domain.weight()));
    x.head(n * m) = Eigen::Map<const Eigen::VectorXd>(b.data(), n * m);
    if (plain) return x;

    Field s0 = b;
    const auto& comp = model.graph.components();
    for (int p = 0; p < n; ++p) {
        std::vector<double> tot(model.graph.component_count(), 0.0), cnt(model.graph.component_count(), 0.0);
        for (int g = 0; g < m; ++g) tot[comp[g]] += b(p, g), cnt[comp[g]] += 1.0;
        for (int g = 0; g < m; ++g) s0(p, g) = 0.5 * b(p, g) + 0.5 * tot[comp[g]] / cnt[comp[g]];
    }
    ExchangeField ex = gradient_exchange(b, s0, tau, model);
    for (int e = 0; e < static_cast<int>(prob.edges().size()); ++e)
        for (int p = 0; p < n; ++p) x(prob.hidx(e, p)) = ex.h[p](prob.edges()[e].first, prob.edges()[e].second);
    return x;
}

Barrier own_barrier(const Field& f, const Model& model) {
    BarrierReport r = barrier_check(f, model.pot, 0.0, INFINITY);
    return {r.min_ratio, r.max_ratio};
}

} // namespace

JkoStep jko_step(const Field& mu, const JkoConfig& cfg, const Model& model) {
    detail::require_line(model);
    if (model.mob.kind() != Mobility::Kind::MassIndependent)
        throw Error(ErrorKind::InvalidArgument, "the minimizing-movement scheme needs the mass-independent mobility");
    if (!(cfg.tau > 0.0 && cfg.tau < 0.5)) throw Error(ErrorKind::InvalidArgument, "tau must lie in (0, 1/2)");
    if (mu.rows() != model.points() || mu.cols() != model.nodes()) throw Error(ErrorKind::SizeMismatch, "mu shape");
    if (!mu.allFinite() || (mu.array() < 0.0).any()) throw Error(ErrorKind::InvalidArgument, "mu must be finite and nonnegative");

    const int n = model.points(), m = model.nodes();
    const double dx = model.domain.weight(), tau = cfg.tau;
    JkoProblem prob(mu, tau, model, cfg.plan_term_multiplicity);
    Eigen::VectorXd x0 = initial_point(mu, tau, model, prob);
    detail::NewtonResult res = detail::newton_minimize(prob, x0, cfg.tol, cfg.max_iter);

    JkoStep out;
    const Eigen::VectorXd& x = res.x;
    out.sigma = prob.sigma(x);
    for (int g = 0; g < m; ++g)
        if (!prob.live(g)) out.sigma.col(g).setZero();
    out.fbar = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, m);
    out.pair.tau = tau;
    out.pair.exchange = ExchangeField::zero(n, m);
    for (int e = 0; e < static_cast<int>(prob.edges().size()); ++e) {
        auto [a, b] = prob.edges()[e];
        for (int p = 0; p < n; ++p) {
            out.pair.exchange.h[p](a, b) = x(prob.hidx(e, p));
            out.pair.exchange.h[p](b, a) = -x(prob.hidx(e, p));
        }
    }

    JkoDiagnostics& d = out.diag;
    d.iterations = res.iterations;
    d.stationarity = res.residual;
    d.converged = res.converged;
    d.objective = res.value;
    d.energy = entropy(out.sigma, model.pot, model.domain);
    d.energy_before = entropy(mu, model.pot, model.domain);
    d.cost = d.objective - d.energy;
    d.energy_inequality = d.objective <= d.energy_before + 1e-12 * (1.0 + std::abs(d.energy_before));

    Barrier bar = cfg.barrier ? *cfg.barrier : own_barrier(mu, model);
    d.lambda = bar.lambda;
    d.Lambda = bar.Lambda;
    d.barrier = barrier_check(out.sigma, model.pot, bar.lambda, bar.Lambda);

    const double left = detail::cell_left_edge(model.domain), h1 = model.domain.dx();
    d.displacement_bound = std::sqrt(2.0) * (std::log(bar.Lambda) - std::log(bar.lambda)) * std::sqrt(tau) + h1;
    Field phi = Field::Zero(n, m);
    for (int g = 0; g < m; ++g)
        if (prob.live(g))
            for (int p = 0; p < n; ++p) phi(p, g) = std::log(out.sigma(p, g)) + model.pot.V(p, g);
    Field dsig = centered_gradient(out.sigma, model.domain, 0);
    const Field& dV = model.pot.gradV[0];
    for (int g = 0; g < m; ++g) {
        if (prob.positive(g)) {
            CellTransport ct(mu.col(g) * dx, out.fbar.col(g) * dx, left, h1);
            out.pair.plan.plans.push_back(ct.plan());
            d.max_displacement = std::max(d.max_displacement, ct.max_displacement(1e-12));
            Eigen::VectorXd S = ct.barycenter();
            for (int p = 0; p < n; ++p) {
                double y = model.domain.coord(p, 0);
                double r = cfg.plan_term_multiplicity * (S(p) - y) / tau * out.sigma(p, g) -
                           (dsig(p, g) + out.sigma(p, g) * dV(p, g));
                d.el_transport = std::max(d.el_transport, std::abs(r));
            }
        } else {
            out.pair.plan.plans.push_back(Eigen::MatrixXd::Zero(n, n));
        }
    }
    d.displacement_ok = d.max_displacement <= d.displacement_bound;
    d.pair_cost = cost_of_pair(out.pair, model, cfg.plan_term_multiplicity);

    for (const auto& [a, b] : prob.edges())
        for (int p = 0; p < n; ++p)
            d.el_exchange = std::max(d.el_exchange, std::abs(out.pair.exchange.h[p](a, b) - (phi(p, a) - phi(p, b))));

    for (int p = 0; p < n; ++p) {
        double w = std::exp(-model.pot.W(p));
        for (int g = 0; g < m; ++g) {
            if (!prob.live(g)) continue;
            double drive = 0.0, scale = 0.0;
            for (int k = 0; k < m; ++k)
                if (model.graph.K(g, k) > 0.0) {
                    drive += (phi(p, g) - phi(p, k)) * model.graph.K(g, k) * w;
                    scale += (std::abs(phi(p, g)) + std::abs(phi(p, k))) * model.graph.K(g, k) * w;
                }
            double change = out.sigma(p, g) - out.fbar(p, g);
            if (std::abs(drive) > 1e-6 * scale && change * drive > 0.0) ++d.exchange_sign_violations;
        }
    }
    return out;
}

const Field& JkoTrajectory::at(double t) const {
    if (densities.empty()) throw Error(ErrorKind::InvalidArgument, "empty trajectory");
    if (times.size() < 2 || t <= 0.0) return densities.front();
    double tau = times[1] - times[0];
    long k = static_cast<long>(std::ceil(t / tau - 1e-9));
    k = std::clamp<long>(k, 0, static_cast<long>(densities.size()) - 1);
    return densities[k];
}

JkoTrajectory jko_run(const Field& f0, const JkoConfig& cfg, const Model& model) {
    if (cfg.steps < 0) throw Error(ErrorKind::InvalidArgument, "steps must be nonnegative");
    JkoConfig c = cfg;
    if (!c.barrier) c.barrier = own_barrier(f0, model);
    JkoTrajectory tr;
    tr.times.push_back(0.0);
    tr.densities.push_back(f0);
    tr.energies.push_back(entropy(f0, model.pot, model.domain));
    Field f = f0;
    for (int k = 1; k <= c.steps; ++k) {
        JkoStep s = jko_step(f, c, model);
        if (!s.diag.barrier.pass) {
            if (tr.barrier_violations == 0) {
                std::ostringstream os;
                os << "step " << k << ": " << s.diag.barrier.message;
                tr.first_violation = os.str();
            }
            ++tr.barrier_violations;
        }
        tr.all_converged = tr.all_converged && s.diag.converged;
        f = s.sigma;
        tr.times.push_back(k * c.tau);
        tr.densities.push_back(f);
        tr.energies.push_back(s.diag.energy);
        tr.diagnostics.push_back(s.diag);
    }
    return tr;
}

ConvergenceTable compare_to_pde(const Field& f0, const std::vector<double>& taus, double T, double reference_dt,
                                const Model& model, const JkoConfig& base) {
    if (taus.empty()) throw Error(ErrorKind::InvalidArgument, "no step sizes given");
    if (!(T > 0.0) || !(reference_dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "T and reference_dt must be positive");
    auto multiple = [](double a, double b) {
        double q = a / b;
        return std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, q) && std::round(q) >= 1.0;
    };
    const double tmin = *std::min_element(taus.begin(), taus.end());
    for (double t : taus)
        if (!multiple(t, tmin) || !multiple(T, t)) {
            std::ostringstream os;
            os << "step " << t << " must divide T = " << T << " and be a multiple of " << tmin;
            throw Error(ErrorKind::Config, os.str());
        }
    if (!multiple(tmin, reference_dt)) throw Error(ErrorKind::Config, "smallest tau must be a multiple of reference_dt");

    ConvergenceTable tab;
    tab.taus = taus;
    tab.reference_dt = reference_dt;
    FlowConfig fc;
    fc.dt = reference_dt;
    fc.T = T;
    fc.record_every = static_cast<int>(std::lround(tmin / reference_dt));
    fc.scheme = reference_dt <= explicit_dt_limit(model) ? Scheme::Explicit : Scheme::SemiImplicit;
    tab.reference_scheme = fc.scheme == Scheme::Explicit ? "explicit" : "semi_implicit";
    Trajectory ref = run(f0, fc, model);
    const long K = std::lround(T / tmin);
    if (static_cast<long>(ref.densities.size()) != K + 1) throw Error(ErrorKind::NonConvergence, "reference recording mismatch");

    tab.errors.assign(taus.size(), 0.0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mtx;
    auto work = [&] {
        for (;;) {
            std::size_t i = next++;
            if (i >= taus.size()) return;
            try {
                JkoConfig c = base;
                c.tau = taus[i];
                c.steps = static_cast<int>(std::lround(T / taus[i]));
                JkoTrajectory tr = jko_run(f0, c, model);
                double err = 0.0;
                for (long k = 1; k <= K; ++k) {
                    const Field& a = tr.at(k * tmin);
                    double e = std::sqrt((a - ref.densities[k]).squaredNorm() * model.domain.weight());
                    err = std::max(err, e);
                }
                tab.errors[i] = err;
            } catch (...) {
                std::lock_guard<std::mutex> lock(mtx);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int nw = std::min<int>(worker_count(), static_cast<int>(taus.size()));
    std::vector<std::thread> pool;
    for (int k = 1; k < nw; ++k) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    // ratios and monotonicity in order of decreasing tau
    std::vector<std::size_t> idx(taus.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return taus[a] > taus[b]; });
    tab.strictly_decreasing = true;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
        double a = tab.errors[idx[k]], b = tab.errors[idx[k + 1]];
        tab.ratios.push_back(b > 0.0 ? a / b : INFINITY);
        if (!(b < a)) tab.strictly_decreasing = false;
    }
    return tab;
}

} // namespace semidot
