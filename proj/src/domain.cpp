#include "semidot/domain.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "semidot/error.hpp"

namespace semidot {

GridDomain::GridDomain(int dimension, double L, int n) : dim_(dimension), L_(L), n_(n) {
    if (dimension != 1 && dimension != 2) throw Error(ErrorKind::InvalidArgument, "dimension must be 1 or 2");
    if (n < 3) throw Error(ErrorKind::InvalidArgument, "need at least 3 points per axis");
    if (!(L > 0.0) || !std::isfinite(L)) throw Error(ErrorKind::InvalidArgument, "half-width L must be positive");
    dx_ = 2.0 * L / (n - 1);
    npts_ = dimension == 1 ? n : n * n;
    weight_ = dimension == 1 ? dx_ : dx_ * dx_;
    if (dim_ == 1) {
        for (int i = 0; i + 1 < n; ++i) faces_.push_back({i, i + 1, 0});
    } else {
        for (int j = 0; j < n; ++j)
            for (int i = 0; i + 1 < n; ++i) faces_.push_back({i + n * j, i + 1 + n * j, 0});
        for (int j = 0; j + 1 < n; ++j)
            for (int i = 0; i < n; ++i) faces_.push_back({i + n * j, i + n * (j + 1), 1});
    }
}

int GridDomain::axis_index(int point, int axis) const {
    return axis == 0 ? point % n_ : point / n_;
}

double GridDomain::coord(int point, int axis) const {
    return -L_ + axis_index(point, axis) * dx_;
}

Eigen::VectorXd GridDomain::axis_coords(int axis) const {
    Eigen::VectorXd x(npts_);
    for (int p = 0; p < npts_; ++p) x(p) = coord(p, axis);
    return x;
}

Eigen::VectorXd evaluate_potential(const PotentialSpec& spec, const GridDomain& domain) {
    const int N = domain.num_points();
    Eigen::VectorXd v(N);
    for (int p = 0; p < N; ++p) {
        double x0 = domain.coord(p, 0);
        double rest = 0.0;
        for (int k = 1; k < domain.dimension(); ++k) {
            double xk = domain.coord(p, k);
            rest += xk * xk;
        }
        double val;
        if (spec.kind == "quadratic") {
            double r2 = (x0 - spec.c) * (x0 - spec.c);
            for (int k = 1; k < domain.dimension(); ++k) {
                double xk = domain.coord(p, k) - spec.c;
                r2 += xk * xk;
            }
            val = 0.5 * spec.a * r2;
        } else if (spec.kind == "double_well" || spec.kind == "tilted") {
            double w = x0 * x0 - spec.b * spec.b;
            val = spec.a * w * w + 0.5 * spec.a * rest;
            if (spec.kind == "tilted") val += spec.t * x0;
        } else {
            throw Error(ErrorKind::InvalidArgument, "unknown potential kind '" + spec.kind + "'");
        }
        v(p) = val + spec.offset;
    }
    return v;
}

Field centered_gradient(const Field& u, const GridDomain& domain, int axis) {
    const int n = domain.n();
    const int stride = axis == 0 ? 1 : n;
    const double dx = domain.dx();
    Field g(u.rows(), u.cols());
    for (int p = 0; p < domain.num_points(); ++p) {
        int i = domain.axis_index(p, axis);
        if (i == 0)
            g.row(p) = (u.row(p + stride) - u.row(p)) / dx;
        else if (i == n - 1)
            g.row(p) = (u.row(p) - u.row(p - stride)) / dx;
        else
            g.row(p) = (u.row(p + stride) - u.row(p - stride)) / (2.0 * dx);
    }
    return g;
}

PotentialPair make_potentials(const Field& V, const Eigen::VectorXd& W, const GridDomain& domain) {
    const int N = domain.num_points();
    if (V.rows() != N || W.size() != N) throw Error(ErrorKind::SizeMismatch, "potential grid size mismatch");
    if (!V.allFinite() || !W.allFinite()) throw Error(ErrorKind::InvalidArgument, "potentials must be finite");
    PotentialPair pot;
    pot.V = V;
    pot.W = W;
    for (int a = 0; a < domain.dimension(); ++a) pot.gradV.push_back(centered_gradient(V, domain, a));
    double lo = INFINITY, hi = -INFINITY;
    for (int p = 0; p < N; ++p)
        for (int g = 0; g < V.cols(); ++g) {
            double r = std::exp(W(p) - V(p, g));
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
    pot.lambda_prime = lo;
    pot.Lambda_prime = hi;
    pot.weight_integral = (-W.array()).exp().sum() * domain.weight();
    return pot;
}

PotentialPair make_potentials(const std::vector<PotentialSpec>& V, const PotentialSpec& W, const GridDomain& domain) {
    Field v(domain.num_points(), static_cast<int>(V.size()));
    for (size_t g = 0; g < V.size(); ++g) v.col(static_cast<int>(g)) = evaluate_potential(V[g], domain);
    return make_potentials(v, evaluate_potential(W, domain), domain);
}

double total_mass(const Field& f, const GridDomain& domain) {
    return f.sum() * domain.weight();
}

Eigen::VectorXd node_masses(const Field& f, const GridDomain& domain) {
    return f.colwise().sum().transpose() * domain.weight();
}

void validate_density(const Field& f, const GridDomain& domain, double tol) {
    if (f.rows() != domain.num_points()) throw Error(ErrorKind::SizeMismatch, "density grid size mismatch");
    for (int p = 0; p < f.rows(); ++p)
        for (int g = 0; g < f.cols(); ++g)
            if (!std::isfinite(f(p, g)) || f(p, g) < 0.0) {
                std::ostringstream os;
                os << "density entry (" << p << "," << g << ") = " << f(p, g);
                throw Error(ErrorKind::InvalidArgument, os.str());
            }
    double m = total_mass(f, domain);
    if (std::abs(m - 1.0) > tol) {
        std::ostringstream os;
        os << "density has mass " << m;
        throw Error(ErrorKind::InvalidArgument, os.str());
    }
}

double entropy(const Field& f, const PotentialPair& pot, const GridDomain& domain) {
    if (f.rows() != pot.V.rows() || f.cols() != pot.V.cols()) throw Error(ErrorKind::SizeMismatch, "entropy shapes");
    double s = 0.0;
    for (int g = 0; g < f.cols(); ++g)
        for (int p = 0; p < f.rows(); ++p) {
            double r = f(p, g);
            if (std::isnan(r)) throw Error(ErrorKind::InvalidArgument, "NaN in density");
            if (r > 0.0) s += r * std::log(r) + pot.V(p, g) * r;
        }
    return s * domain.weight();
}

double equilibrium_constant(const PotentialPair& pot, const GridDomain& domain) {
    return 1.0 / ((-pot.V.array()).exp().sum() * domain.weight());
}

Field equilibrium_density(const PotentialPair& pot, const GridDomain& domain) {
    return equilibrium_constant(pot, domain) * (-pot.V.array()).exp().matrix();
}

double second_moment(const Field& f, const GridDomain& domain) {
    double s = 0.0;
    for (int p = 0; p < f.rows(); ++p) {
        double r2 = 0.0;
        for (int a = 0; a < domain.dimension(); ++a) r2 += domain.coord(p, a) * domain.coord(p, a);
        s += r2 * f.row(p).sum();
    }
    return s * domain.weight();
}

BarrierReport barrier_check(const Field& f, const PotentialPair& pot, double lambda, double Lambda, double rel_tol) {
    BarrierReport rep;
    rep.min_ratio = INFINITY;
    rep.max_ratio = -INFINITY;
    for (int g = 0; g < f.cols(); ++g)
        for (int p = 0; p < f.rows(); ++p) {
            double u = f(p, g) * std::exp(pot.V(p, g));
            if (u < rep.min_ratio) {
                rep.min_ratio = u;
                rep.min_point = p;
                rep.min_node = g;
            }
            if (u > rep.max_ratio) {
                rep.max_ratio = u;
                rep.max_point = p;
                rep.max_node = g;
            }
        }
    bool lo_ok = rep.min_ratio >= lambda * (1.0 - rel_tol);
    bool hi_ok = rep.max_ratio <= Lambda * (1.0 + rel_tol);
    rep.pass = lo_ok && hi_ok;
    std::ostringstream os;
    if (!lo_ok)
        os << "lower barrier violated at point " << rep.min_point << " node " << rep.min_node << ": f e^V = "
           << rep.min_ratio << " < " << lambda << ". ";
    if (!hi_ok)
        os << "upper barrier violated at point " << rep.max_point << " node " << rep.max_node << ": f e^V = "
           << rep.max_ratio << " > " << Lambda << ".";
    rep.message = os.str();
    return rep;
}

namespace {

Field normalize_from_ratio(const Eigen::MatrixXd& u, const PotentialPair& pot, const GridDomain& domain) {
    Field f = (u.array() * (-pot.V.array()).exp()).matrix();
    return f / total_mass(f, domain);
}

} // namespace

Field perturbed_equilibrium(const PotentialPair& pot, const GridDomain& domain, double amplitude,
                            const std::vector<double>& node_weights) {
    const int N = domain.num_points();
    const int m = static_cast<int>(pot.V.cols());
    Eigen::MatrixXd u(N, m);
    for (int g = 0; g < m; ++g) {
        double w = g < static_cast<int>(node_weights.size()) ? node_weights[g] : 1.0;
        if (!(w > 0.0)) throw Error(ErrorKind::InvalidArgument, "node weights must be positive");
        double sgn = (g % 2 == 0) ? 1.0 : -1.0;
        for (int p = 0; p < N; ++p) {
            double s = std::sin(M_PI * domain.coord(p, 0) / (2.0 * domain.L()));
            u(p, g) = w * (1.0 + amplitude * sgn * s);
        }
    }
    if ((u.array() <= 0.0).any()) throw Error(ErrorKind::InvalidArgument, "perturbation amplitude must be < 1");
    return normalize_from_ratio(u, pot, domain);
}

Field random_barrier_density(const PotentialPair& pot, const GridDomain& domain, std::uint64_t seed, double spread) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const int N = domain.num_points();
    const int m = static_cast<int>(pot.V.cols());
    Eigen::MatrixXd u(N, m);
    for (int g = 0; g < m; ++g) {
        double level = unif(rng);
        double c[4], ph[4];
        for (int k = 0; k < 4; ++k) {
            c[k] = unif(rng) / (k + 1);
            ph[k] = M_PI * unif(rng);
        }
        for (int p = 0; p < N; ++p) {
            double r = 0.5 * level;
            for (int a = 0; a < domain.dimension(); ++a) {
                double y = domain.coord(p, a) / domain.L();
                for (int k = 0; k < 4; ++k) r += 0.25 * c[k] * std::cos((k + 1) * M_PI * y / 2.0 + ph[k]);
            }
            u(p, g) = std::exp(spread * r / 2.0);
        }
    }
    return normalize_from_ratio(u, pot, domain);
}

} // namespace semidot
