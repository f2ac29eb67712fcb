#include "semidot/static_transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "fiber_ot.hpp"
#include "newton.hpp"
#include "semidot/error.hpp"
#include "semidot/transport1d.hpp"

namespace semidot {

namespace detail {

void require_line(const Model& model) {
    if (model.domain.dimension() != 1)
        throw Error(ErrorKind::InvalidArgument, "transport solvers need a one-dimensional grid");
}

double cell_left_edge(const GridDomain& domain) { return -domain.L() - 0.5 * domain.dx(); }

} // namespace detail

namespace {

void check_shape(const Field& f, const Model& model, const char* what) {
    if (f.rows() != model.points() || f.cols() != model.nodes()) {
        std::ostringstream os;
        os << what << " is " << f.rows() << "x" << f.cols() << ", expected " << model.points() << "x" << model.nodes();
        throw Error(ErrorKind::SizeMismatch, os.str());
    }
}

std::vector<std::vector<int>> component_lists(const WeightedGraph& graph) {
    std::vector<std::vector<int>> out(graph.component_count());
    for (int g = 0; g < graph.size(); ++g) out[graph.components()[g]].push_back(g);
    return out;
}

// (L_1 + sum_c 1_c 1_c^T / |c|)^{-1}: acts as the pseudo-inverse of L_1 on
// vectors summing to zero on every component
Eigen::MatrixXd exchange_inverse(const WeightedGraph& graph) {
    const int m = graph.size();
    Eigen::MatrixXd A = weighted_laplacian(EdgeField::constant(m, 1.0), graph);
    for (const auto& c : component_lists(graph))
        for (int g : c)
            for (int k : c) A(g, k) += 1.0 / static_cast<double>(c.size());
    return A.inverse();
}

// per-component subgraphs for the Poisson solve
struct Parts {
    std::vector<std::vector<int>> lists;
    std::vector<WeightedGraph> graphs;
};

Parts split(const WeightedGraph& graph) {
    Parts parts;
    parts.lists = component_lists(graph);
    for (const auto& c : parts.lists) {
        const int k = static_cast<int>(c.size());
        std::vector<std::string> names;
        Eigen::MatrixXd K(k, k);
        for (int a = 0; a < k; ++a) {
            names.push_back(graph.nodes()[c[a]]);
            for (int b = 0; b < k; ++b) K(a, b) = graph.K(c[a], c[b]);
        }
        parts.graphs.emplace_back(std::move(names), std::move(K));
    }
    return parts;
}

std::string cell_name(const GridDomain& domain, int p) {
    std::ostringstream os;
    os << "cell " << p << " (x=" << domain.coord(p, 0);
    for (int a = 1; a < domain.dimension(); ++a) os << ", " << domain.coord(p, a);
    os << ")";
    return os.str();
}

// Static problem in the transported densities fbar. Feasible set: per-node
// masses equal to mu's, per-cell component totals equal to sigma's.
class StaticProblem : public detail::NewtonProblem {
public:
    StaticProblem(const Field& mu, const Field& sigma, double tau, const Model& model, int mult)
        : mu_(mu), sigma_(sigma), tau_(tau), model_(model), mult_(mult) {
        n_ = model.points();
        m_ = model.nodes();
        dx_ = model.domain.weight();
        ot_.left = detail::cell_left_edge(model.domain);
        ot_.dx = model.domain.dx();
        Q_ = exchange_inverse(model.graph);
        w_ = (-model.pot.W.array()).exp();
        Eigen::VectorXd M = node_masses(mu, model.domain);
        for (int g = 0; g < m_; ++g) active_.push_back(M(g) > 0.0);
        for (const auto& c : component_lists(model.graph)) {
            std::vector<int> pos;
            for (int g : c)
                if (active_[g]) pos.push_back(g);
            if (pos.size() > 1) groups_.push_back(pos);
        }
    }

    bool active(int g) const { return active_[g]; }

    Field unpack(const Eigen::VectorXd& x) const { return Eigen::Map<const Eigen::MatrixXd>(x.data(), n_, m_); }

    double w2_part(const Eigen::VectorXd& x) const {
        double s = 0.0;
        for (int g = 0; g < m_; ++g)
            if (active_[g]) s += ot_.value(mu_.col(g) * dx_, x.segment(g * n_, n_));
        return mult_ * s / (2.0 * tau_);
    }

    double value(const Eigen::VectorXd& x) const override {
        for (int g = 0; g < m_; ++g)
            if (active_[g] && !(x.segment(g * n_, n_).array() > 0.0).all()) return std::numeric_limits<double>::infinity();
        double s = w2_part(x);
        for (int p = 0; p < n_; ++p) {
            Eigen::VectorXd r = residual_at(x, p);
            s += dx_ / (tau_ * w_(p)) * r.dot(Q_ * r);
        }
        return s;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
        Eigen::VectorXd G = Eigen::VectorXd::Zero(x.size());
        for (int g = 0; g < m_; ++g)
            if (active_[g])
                G.segment(g * n_, n_) = mult_ / (2.0 * tau_) * ot_.gradient(mu_.col(g) * dx_, x.segment(g * n_, n_));
        for (int p = 0; p < n_; ++p) {
            Eigen::VectorXd q = 2.0 * dx_ / (tau_ * w_(p)) * (Q_ * residual_at(x, p));
            for (int g = 0; g < m_; ++g)
                if (active_[g]) G(g * n_ + p) += q(g);
        }
        return G;
    }

    Eigen::MatrixXd basis(const Eigen::VectorXd& x) const override {
        std::vector<Eigen::VectorXd> cols;
        for (const auto& pos : groups_) {
            int pstar = 0;
            double best = -1.0;
            for (int p = 0; p < n_; ++p) {
                double lo = std::numeric_limits<double>::infinity();
                for (int g : pos) lo = std::min(lo, x(g * n_ + p));
                if (lo > best) best = lo, pstar = p;
            }
            const int gr = pos.front();
            for (std::size_t a = 1; a < pos.size(); ++a)
                for (int p = 0; p < n_; ++p) {
                    if (p == pstar) continue;
                    Eigen::VectorXd z = Eigen::VectorXd::Zero(x.size());
                    z(pos[a] * n_ + p) = 1.0;
                    z(gr * n_ + p) = -1.0;
                    z(pos[a] * n_ + pstar) = -1.0;
                    z(gr * n_ + pstar) = 1.0;
                    cols.push_back(z);
                }
        }
        Eigen::MatrixXd Z(x.size(), static_cast<int>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) Z.col(static_cast<int>(k)) = cols[k];
        return Z;
    }

    Eigen::MatrixXd reduced_hessian(const Eigen::VectorXd& x, const Eigen::MatrixXd& Z) const override {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(Z.cols(), Z.cols());
        for (int g = 0; g < m_; ++g) {
            if (!active_[g]) continue;
            Eigen::MatrixXd Zg = Z.middleRows(g * n_, n_);
            if (Zg.cwiseAbs().maxCoeff() == 0.0) continue;
            Eigen::MatrixXd Hg = ot_.hessian(mu_.col(g) * dx_, x.segment(g * n_, n_));
            H += mult_ / (2.0 * tau_) * Zg.transpose() * Hg * Zg;
        }
        for (int p = 0; p < n_; ++p) {
            Eigen::MatrixXd Zp(m_, Z.cols());
            for (int g = 0; g < m_; ++g) Zp.row(g) = Z.row(g * n_ + p);
            if (Zp.cwiseAbs().maxCoeff() == 0.0) continue;
            H += 2.0 * dx_ / (tau_ * w_(p)) * Zp.transpose() * Q_ * Zp;
        }
        return H;
    }

    double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& d) const override {
        double a = std::numeric_limits<double>::infinity();
        for (int g = 0; g < m_; ++g)
            if (active_[g])
                for (int p = 0; p < n_; ++p) {
                    double v = d(g * n_ + p);
                    if (v < 0.0) a = std::min(a, -x(g * n_ + p) / v);
                }
        return a;
    }

    double residual(const Eigen::VectorXd&, const Eigen::VectorXd& grad, const Eigen::MatrixXd& Z) const override {
        return (Z.transpose() * grad).cwiseAbs().maxCoeff() / dx_;
    }

private:
    Eigen::VectorXd residual_at(const Eigen::VectorXd& x, int p) const {
        Eigen::VectorXd r(m_);
        for (int g = 0; g < m_; ++g) r(g) = x(g * n_ + p) - sigma_(p, g);
        return r;
    }

    const Field& mu_;
    const Field& sigma_;
    double tau_;
    const Model& model_;
    int mult_;
    int n_ = 0, m_ = 0;
    double dx_ = 1.0;
    detail::FiberOT ot_;
    Eigen::MatrixXd Q_;
    Eigen::VectorXd w_;
    std::vector<bool> active_;
    std::vector<std::vector<int>> groups_;
};

} // namespace

ExchangeField ExchangeField::zero(int points, int nodes) {
    ExchangeField e;
    e.h.assign(points, Eigen::MatrixXd::Zero(nodes, nodes));
    return e;
}

bool ExchangeField::antisymmetric() const {
    for (const auto& M : h)
        if ((M + M.transpose()).cwiseAbs().maxCoeff() > 0.0) return false;
    return true;
}

TransportPlanSet identity_plans(const Field& mu, const GridDomain& domain) {
    TransportPlanSet s;
    for (int g = 0; g < mu.cols(); ++g) s.plans.push_back(Eigen::MatrixXd((mu.col(g) * domain.weight()).asDiagonal()));
    return s;
}

Field transported_density(const TransportPlanSet& plan, const GridDomain& domain) {
    const int m = static_cast<int>(plan.plans.size());
    Field f(domain.num_points(), m);
    for (int g = 0; g < m; ++g) {
        if (plan.plans[g].rows() != domain.num_points() || plan.plans[g].cols() != domain.num_points())
            throw Error(ErrorKind::SizeMismatch, "plan size does not match the grid");
        f.col(g) = plan.plans[g].colwise().sum().transpose() / domain.weight();
    }
    return f;
}

Field balance_density(const AdmissiblePair& pair, const Model& model) {
    Field f = transported_density(pair.plan, model.domain);
    check_shape(f, model, "transported density");
    if (pair.exchange.points() != model.points()) throw Error(ErrorKind::SizeMismatch, "exchange field size");
    const int m = model.nodes();
    for (int p = 0; p < model.points(); ++p) {
        double w = std::exp(-model.pot.W(p));
        for (int g = 0; g < m; ++g) {
            double s = 0.0;
            for (int k = 0; k < m; ++k) s += pair.exchange.h[p](g, k) * model.graph.K(g, k);
            f(p, g) -= pair.tau * s * w;
        }
    }
    return f;
}

double exchange_cost(const ExchangeField& h, double tau, const Model& model) {
    double s = 0.0;
    const int m = model.nodes();
    for (int p = 0; p < h.points(); ++p) {
        double w = std::exp(-model.pot.W(p));
        for (int g = 0; g < m; ++g)
            for (int k = 0; k < m; ++k) s += h.h[p](g, k) * h.h[p](g, k) * model.graph.K(g, k) * w;
    }
    return 0.25 * tau * s * model.domain.weight();
}

double cost_of_pair(const AdmissiblePair& pair, const Model& model, int plan_term_multiplicity) {
    if (!(pair.tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
    if (plan_term_multiplicity < 1) throw Error(ErrorKind::InvalidArgument, "plan_term_multiplicity must be >= 1");
    const GridDomain& dom = model.domain;
    double plan = 0.0;
    for (const auto& G : pair.plan.plans)
        for (int j = 0; j < G.cols(); ++j)
            for (int i = 0; i < G.rows(); ++i) {
                if (G(i, j) == 0.0) continue;
                double d2 = 0.0;
                for (int a = 0; a < dom.dimension(); ++a) {
                    double d = dom.coord(i, a) - dom.coord(j, a);
                    d2 += d * d;
                }
                plan += G(i, j) * d2;
            }
    return plan_term_multiplicity * plan / (2.0 * pair.tau) + exchange_cost(pair.exchange, pair.tau, model);
}

double feasibility_residual(const AdmissiblePair& pair, const Field& mu, const Field& sigma, const Model& model) {
    check_shape(mu, model, "mu");
    check_shape(sigma, model, "sigma");
    Field bal = balance_density(pair, model);
    double rows = 0.0;
    for (int g = 0; g < model.nodes(); ++g) {
        Eigen::VectorXd rs = pair.plan.plans[g].rowwise().sum();
        rows = std::max(rows, (rs - mu.col(g) * model.domain.weight()).cwiseAbs().maxCoeff());
    }
    return (sigma - bal).cwiseAbs().maxCoeff() + rows;
}

ExchangeField gradient_exchange(const Field& fbar, const Field& sigma, double tau, const Model& model) {
    check_shape(fbar, model, "fbar");
    check_shape(sigma, model, "sigma");
    Parts parts = split(model.graph);
    const int m = model.nodes();
    ExchangeField ex = ExchangeField::zero(model.points(), m);
    for (int p = 0; p < model.points(); ++p) {
        double w = std::exp(-model.pot.W(p));
        for (std::size_t c = 0; c < parts.lists.size(); ++c) {
            const auto& list = parts.lists[c];
            const int k = static_cast<int>(list.size());
            if (k < 2) continue;
            NodeFunction rhs(k);
            for (int a = 0; a < k; ++a) rhs(a) = 2.0 * (fbar(p, list[a]) - sigma(p, list[a])) / tau;
            // the component total is zero up to roundoff; make it exact
            rhs.array() -= rhs.mean();
            NodeFunction eta = solve_graph_poisson(rhs, EdgeField::constant(k, w), parts.graphs[c]);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) ex.h[p](list[a], list[b]) = eta(b) - eta(a);
        }
    }
    return ex;
}

StaticSolution solve_static_cost(const Field& mu, const Field& sigma, double tau, const Model& model,
                                 const StaticOptions& opts) {
    detail::require_line(model);
    check_shape(mu, model, "mu");
    check_shape(sigma, model, "sigma");
    if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
    if (!mu.allFinite() || !sigma.allFinite() || (mu.array() < 0.0).any() || (sigma.array() < 0.0).any())
        throw Error(ErrorKind::InvalidArgument, "mu and sigma must be finite and nonnegative");

    const int n = model.points(), m = model.nodes();
    const double dx = model.domain.weight();
    Eigen::VectorXd M = node_masses(mu, model.domain);
    Eigen::VectorXd S = node_masses(sigma, model.domain);
    const double total = std::max(M.sum(), S.sum());
    const auto lists = component_lists(model.graph);

    // starting point: sigma itself when it already has mu's node masses,
    // otherwise each component's per-cell total split by node mass
    Field fbar = Field::Zero(n, m);
    bool same_masses = true;
    for (int g = 0; g < m; ++g)
        if (std::abs(M(g) - S(g)) > 1e-12 * total) same_masses = false;
    for (const auto& c : lists) {
        double Mc = 0.0, Sc = 0.0;
        for (int g : c) Mc += M(g), Sc += S(g);
        if (std::abs(Mc - Sc) > 1e-9 * total) {
            std::ostringstream os;
            os << "no admissible pair: component {";
            for (std::size_t a = 0; a < c.size(); ++a) os << (a ? ", " : "") << model.graph.nodes()[c[a]];
            os << "} holds mass " << Mc << " in mu but " << Sc << " in sigma";
            throw Error(ErrorKind::Infeasible, os.str());
        }
        if (Mc == 0.0) continue;
        for (int p = 0; p < n; ++p) {
            double sc = 0.0;
            for (int g : c) sc += sigma(p, g);
            if (!(sc > 0.0))
                throw Error(ErrorKind::InvalidArgument, "sigma must be positive at " + cell_name(model.domain, p));
            for (int g : c)
                if (M(g) > 0.0) fbar(p, g) = same_masses ? sigma(p, g) : sc * M(g) / Mc;
        }
        if (same_masses)
            for (int g : c)
                if (M(g) > 0.0 && !(fbar.col(g).array() > 0.0).all()) {
                    // zeros in sigma: fall back to the proportional split
                    for (int p = 0; p < n; ++p) {
                        double sc = 0.0;
                        for (int k : c) sc += sigma(p, k);
                        for (int k : c)
                            if (M(k) > 0.0) fbar(p, k) = sc * M(k) / Mc;
                    }
                    break;
                }
    }

    StaticProblem prob(mu, sigma, tau, model, opts.plan_term_multiplicity);
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(fbar.data(), fbar.size());
    detail::NewtonResult res = detail::newton_minimize(prob, x, opts.opt_tol, opts.max_iter);

    StaticSolution out;
    out.fbar = prob.unpack(res.x);
    out.objective = res.value;
    out.stationarity = res.residual;
    out.iterations = res.iterations;
    out.converged = res.converged;
    out.pair.tau = tau;
    const double left = detail::cell_left_edge(model.domain);
    for (int g = 0; g < m; ++g) {
        if (prob.active(g))
            out.pair.plan.plans.push_back(
                CellTransport(mu.col(g) * dx, out.fbar.col(g) * dx, left, model.domain.dx()).plan());
        else
            out.pair.plan.plans.push_back(Eigen::MatrixXd::Zero(n, n));
    }
    out.pair.exchange = gradient_exchange(out.fbar, sigma, tau, model);
    out.cost = cost_of_pair(out.pair, model, opts.plan_term_multiplicity);
    out.feasibility = feasibility_residual(out.pair, mu, sigma, model);
    if (out.feasibility > opts.tol) {
        std::ostringstream os;
        os << "static solve ended with feasibility residual " << out.feasibility;
        throw Error(ErrorKind::NonConvergence, os.str());
    }
    return out;
}

OptimalityReport verify_optimality(const AdmissiblePair& pair, const Field& mu, const Field& sigma, const Model& model,
                                   double tol) {
    (void)mu;
    (void)sigma;
    OptimalityReport rep;
    rep.antisymmetric = pair.exchange.antisymmetric();
    const WeightedGraph& G = model.graph;
    const int m = G.size();
    const auto& names = G.nodes();

    // (a) spanning-tree potentials per cell; every non-tree edge closes one cycle
    std::vector<int> parent(m);
    std::vector<std::vector<int>> adj(m);
    for (const auto& [a, b] : G.edges()) adj[a].push_back(b), adj[b].push_back(a);
    std::fill(parent.begin(), parent.end(), -1);
    std::vector<int> order, depth(m, 0);
    std::vector<bool> seen(m, false);
    for (int r = 0; r < m; ++r) {
        if (seen[r]) continue;
        std::queue<int> q;
        q.push(r);
        seen[r] = true;
        while (!q.empty()) {
            int g = q.front();
            q.pop();
            order.push_back(g);
            for (int k : adj[g])
                if (!seen[k]) seen[k] = true, parent[k] = g, depth[k] = depth[g] + 1, q.push(k);
        }
    }
    auto tree_path = [&](int a, int b) {
        std::vector<int> up, down;
        while (a != b) {
            if (depth[a] >= depth[b])
                up.push_back(a), a = parent[a];
            else
                down.push_back(b), b = parent[b];
        }
        up.push_back(a);
        up.insert(up.end(), down.rbegin(), down.rend());
        return up;
    };
    for (int p = 0; p < pair.exchange.points(); ++p) {
        const Eigen::MatrixXd& h = pair.exchange.h[p];
        double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
        Eigen::VectorXd psi = Eigen::VectorXd::Zero(m);
        for (int g : order)
            if (parent[g] >= 0) psi(g) = psi(parent[g]) + h(parent[g], g);
        for (const auto& [a, b] : G.edges()) {
            if (parent[b] == a || parent[a] == b) continue;
            double defect = std::abs(h(a, b) - (psi(b) - psi(a)));
            if (defect > rep.cycle_defect) rep.cycle_defect = defect;
            if (defect > tol * scale && rep.cycle_ok) {
                rep.cycle_ok = false;
                // cycle b -> ... -> a along the tree, closed by the edge a -> b
                std::vector<int> path = tree_path(b, a);
                std::ostringstream os;
                os << cell_name(model.domain, p) << ": cycle ";
                for (int g : path) os << names[g] << " -> ";
                os << names[b] << " has circulation " << (h(a, b) - (psi(b) - psi(a)));
                rep.cycle_witness = os.str();
            }
        }

        // (b) K-weighted least-squares fit h ~ grad psi
        Eigen::MatrixXd Lap = weighted_laplacian(EdgeField::constant(m, 1.0), G);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
        for (int g = 0; g < m; ++g)
            for (int k = 0; k < m; ++k) rhs(g) += G.K(g, k) * (h(k, g) - h(g, k));
        for (const auto& c : component_lists(G))
            for (int g : c)
                for (int k : c) Lap(g, k) += 1.0 / static_cast<double>(c.size());
        Eigen::VectorXd fit = Lap.ldlt().solve(rhs);
        double num = 0.0, den = 0.0;
        for (int g = 0; g < m; ++g)
            for (int k = 0; k < m; ++k) {
                double e = h(g, k) - (fit(k) - fit(g));
                num += G.K(g, k) * e * e;
                den += G.K(g, k) * h(g, k) * h(g, k);
            }
        double r = std::sqrt(num) / std::max(1.0, std::sqrt(den));
        rep.gradient_residual = std::max(rep.gradient_residual, r);
    }
    rep.gradient_ok = rep.gradient_residual <= tol;

    // (c) cyclical monotonicity over all support pairs of each fiber
    const GridDomain& dom = model.domain;
    auto d2 = [&](int i, int j) {
        double s = 0.0;
        for (int a = 0; a < dom.dimension(); ++a) {
            double d = dom.coord(i, a) - dom.coord(j, a);
            s += d * d;
        }
        return s;
    };
    double L2 = 4.0 * dom.L() * dom.L() * dom.dimension();
    for (int g = 0; g < static_cast<int>(pair.plan.plans.size()) && rep.monotone_ok; ++g) {
        const Eigen::MatrixXd& P = pair.plan.plans[g];
        std::vector<std::pair<int, int>> supp;
        for (int j = 0; j < P.cols(); ++j)
            for (int i = 0; i < P.rows(); ++i)
                if (P(i, j) > 0.0) supp.push_back({i, j});
        for (std::size_t a = 0; a < supp.size() && rep.monotone_ok; ++a)
            for (std::size_t b = a + 1; b < supp.size(); ++b) {
                auto [i1, j1] = supp[a];
                auto [i2, j2] = supp[b];
                double lhs = d2(i1, j1) + d2(i2, j2), rhs = d2(i1, j2) + d2(i2, j1);
                if (lhs > rhs + 1e-12 * L2) {
                    rep.monotone_ok = false;
                    std::ostringstream os;
                    os << "node " << names[g] << ": support pairs (" << i1 << "->" << j1 << ") and (" << i2 << "->" << j2
                       << ") cost " << lhs << " > swapped " << rhs;
                    rep.monotone_witness = os.str();
                    break;
                }
            }
    }
    return rep;
}

} // namespace semidot
