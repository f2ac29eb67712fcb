#include "fiber_ot.hpp"

#include "semidot/transport1d.hpp"

namespace semidot::detail {

double FiberOT::value(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return CellTransport(a, b * dx, left, dx).w2();
}

Eigen::VectorXd FiberOT::gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return dx * CellTransport(a, b * dx, left, dx).grad_target();
}

Eigen::MatrixXd FiberOT::hessian(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const int n = static_cast<int>(b.size());
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    if (n < 2) return H;
    int r;
    b.maxCoeff(&r);
    Eigen::VectorXd bp = b, bm = b;
    for (int k = 0; k < n; ++k) {
        if (k == r) continue;
        double eps = 1e-6 * std::min(b(k), b(r));
        bp(k) += eps;
        bp(r) -= eps;
        bm(k) -= eps;
        bm(r) += eps;
        Eigen::VectorXd d = (gradient(a, bp) - gradient(a, bm)) / (2.0 * eps);
        d.array() -= d(r);
        H.col(k) = d;
        bp(k) = bm(k) = b(k);
        bp(r) = bm(r) = b(r);
    }
    H.row(r).setZero();
    return 0.5 * (H + H.transpose());
}

} // namespace semidot::detail
