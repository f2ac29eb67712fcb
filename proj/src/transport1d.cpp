#include "semidot/transport1d.hpp"

#include <cmath>
#include <limits>

#include "semidot/error.hpp"

namespace semidot {

namespace {

// cell k with P[k] <= h < P[k+1]; offset h - P[k]
void find_cut(const Eigen::VectorXd& a, double h, int& cell, double& offset) {
    double P = 0.0;
    const int n = static_cast<int>(a.size());
    for (int k = 0; k < n; ++k) {
        if (a(k) > 0.0 && P + a(k) > h) {
            cell = k;
            offset = h - P;
            return;
        }
        P += a(k);
    }
    // h at (or past) the total: cut after the last nonempty cell
    for (int k = n - 1; k >= 0; --k)
        if (a(k) > 0.0) {
            cell = k;
            offset = a(k);
            return;
        }
    cell = 0;
    offset = 0.0;
}

} // namespace

CellTransport::CellTransport(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double left, double dx)
    : n_(static_cast<int>(a.size())), left_(left), dx_(dx), b_(b) {
    if (b.size() != a.size()) throw Error(ErrorKind::SizeMismatch, "transport marginals differ in length");
    if ((a.array() < 0.0).any() || (b.array() < 0.0).any() || !a.allFinite() || !b.allFinite())
        throw Error(ErrorKind::InvalidArgument, "transport marginals must be finite and nonnegative");
    double sa = a.sum(), sb = b.sum();
    if (std::abs(sa - sb) > 1e-9 * std::max(sa, sb)) throw Error(ErrorKind::InvalidArgument, "transport marginals differ in mass");
    A_ = Eigen::VectorXd::Zero(n_);
    B_ = Eigen::VectorXd::Zero(n_);
    if (sa > 0.0) sweep(a, b);
}

void CellTransport::sweep(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    int ic, jc;
    double oa, ob;
    find_cut(a, 0.5 * a.sum(), ic, oa);
    find_cut(b, 0.5 * b.sum(), jc, ob);

    auto emit = [&](int i, int j, double len, double qa0, double qa1, double qb0, double qb1, double off) {
        segs_.push_back({i, j, len, qa0, qa1, qb0, qb1, off});
        double d0 = qa0 - qb0, d1 = qa1 - qb1;
        w2_ += len * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
        A_(j) += len * (d0 + d1) / 2.0;
        B_(j) += off * len * (d0 + d1) / 2.0 + len * len * (d0 / 6.0 + d1 / 3.0);
    };

    // left half, offsets measured from each cell's left edge
    {
        auto capa = [&](int i) { return i < ic ? a(i) : oa; };
        auto capb = [&](int j) { return j < jc ? b(j) : ob; };
        int i = 0, j = 0;
        double ra = capa(0), rb = capb(0), pa = 0.0, pb = 0.0;
        while (i <= ic && j <= jc) {
            if (ra <= 0.0) {
                if (++i <= ic) ra = capa(i), pa = 0.0;
                continue;
            }
            if (rb <= 0.0) {
                if (++j <= jc) rb = capb(j), pb = 0.0;
                continue;
            }
            double d = std::min(ra, rb);
            double la = left_ + i * dx_, lb = left_ + j * dx_;
            emit(i, j, d, la + pa / a(i) * dx_, la + (pa + d) / a(i) * dx_, lb + pb / b(j) * dx_,
                 lb + (pb + d) / b(j) * dx_, pb);
            bool ea = d == ra, eb = d == rb;
            ra = ea ? 0.0 : ra - d;
            rb = eb ? 0.0 : rb - d;
            pa += d;
            pb += d;
        }
    }
    // right half, offsets measured from each cell's right edge
    {
        auto capa = [&](int i) { return i > ic ? a(i) : a(ic) - oa; };
        auto capb = [&](int j) { return j > jc ? b(j) : b(jc) - ob; };
        int i = n_ - 1, j = n_ - 1;
        double ra = capa(i), rb = capb(j), pa = 0.0, pb = 0.0;
        while (i >= ic && j >= jc) {
            if (ra <= 0.0) {
                if (--i >= ic) ra = capa(i), pa = 0.0;
                continue;
            }
            if (rb <= 0.0) {
                if (--j >= jc) rb = capb(j), pb = 0.0;
                continue;
            }
            double d = std::min(ra, rb);
            double Ra = left_ + (i + 1) * dx_, Rb = left_ + (j + 1) * dx_;
            double off = std::max(0.0, b(j) - (pb + d));
            emit(i, j, d, Ra - (pa + d) / a(i) * dx_, Ra - pa / a(i) * dx_, Rb - (pb + d) / b(j) * dx_,
                 Rb - pb / b(j) * dx_, off);
            bool ea = d == ra, eb = d == rb;
            ra = ea ? 0.0 : ra - d;
            rb = eb ? 0.0 : rb - d;
            pa += d;
            pb += d;
        }
    }
}

Eigen::VectorXd CellTransport::grad_target() const {
    Eigen::VectorXd g(n_);
    double suffix = 0.0;
    for (int k = n_ - 1; k >= 0; --k) {
        if (b_(k) > 0.0)
            g(k) = 2.0 * dx_ * (suffix + B_(k) / (b_(k) * b_(k)));
        else
            g(k) = std::numeric_limits<double>::quiet_NaN();
        if (b_(k) > 0.0) suffix += A_(k) / b_(k);
    }
    return g;
}

Eigen::MatrixXd CellTransport::plan() const {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& s : segs_) P(s.i, s.j) += s.len;
    return P;
}

Eigen::VectorXd CellTransport::barycenter() const {
    Eigen::VectorXd S(n_);
    for (int j = 0; j < n_; ++j) S(j) = center(j) + (b_(j) > 0.0 ? A_(j) / b_(j) : 0.0);
    return S;
}

double CellTransport::point_cost() const {
    double c = 0.0;
    for (const auto& s : segs_) {
        double d = center(s.i) - center(s.j);
        c += s.len * d * d;
    }
    return c;
}

double CellTransport::max_displacement(double threshold) const {
    Eigen::MatrixXd P = plan();
    double m = 0.0;
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
            if (P(i, j) > threshold) m = std::max(m, std::abs(center(i) - center(j)));
    return m;
}

} // namespace semidot
