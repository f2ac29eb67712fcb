#include "newton.hpp"

#include <cmath>
#include <limits>

namespace semidot::detail {

NewtonResult newton_minimize(const NewtonProblem& prob, Eigen::VectorXd x, double tol, int max_iter) {
    NewtonResult out;
    double f = prob.value(x);
    for (int it = 0;; ++it) {
        Eigen::VectorXd g = prob.gradient(x);
        Eigen::MatrixXd Z = prob.basis(x);
        double res = Z.cols() == 0 ? 0.0 : prob.residual(x, g, Z);
        out.iterations = it;
        out.residual = res;
        if (res <= tol) {
            out.converged = true;
            break;
        }
        if (it >= max_iter) break;

        Eigen::MatrixXd H = prob.reduced_hessian(x, Z);
        Eigen::VectorXd gr = Z.transpose() * g;
        // symmetric Jacobi scaling: the diagonal spans many decades when densities
        // reach into potential tails
        Eigen::VectorXd d = H.diagonal().cwiseAbs().cwiseSqrt();
        for (int k = 0; k < d.size(); ++k)
            if (!(d(k) > 0.0)) d(k) = 1.0;
        Eigen::MatrixXd Hs = d.cwiseInverse().asDiagonal() * H * d.cwiseInverse().asDiagonal();
        Hs = 0.5 * (Hs + Hs.transpose());
        Eigen::VectorXd rhs = -gr.cwiseQuotient(d);
        Eigen::VectorXd y;
        double reg = 0.0;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd M = Hs;
            if (reg > 0.0) M.diagonal().array() += reg;
            Eigen::LLT<Eigen::MatrixXd> llt(M);
            if (llt.info() == Eigen::Success) {
                y = llt.solve(rhs);
                if (y.allFinite()) break;
            }
            reg = reg == 0.0 ? 1e-10 : reg * 100.0;
            y.resize(0);
        }
        if (y.size() == 0) break;
        Eigen::VectorXd p = Z * y.cwiseQuotient(d);
        double slope = g.dot(p);
        if (!(slope < 0.0)) break;

        double alpha = std::min(1.0, 0.95 * prob.max_step(x, p));
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            Eigen::VectorXd xn = x + alpha * p;
            double fn = prob.value(xn);
            bool roundoff = std::abs(alpha * slope) < 1e-14 * (1.0 + std::abs(f));
            if (std::isfinite(fn) && (fn <= f + 1e-4 * alpha * slope || (roundoff && fn <= f + 1e-12 * (1.0 + std::abs(f))))) {
                x = xn;
                f = fn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    out.x = x;
    out.value = f;
    return out;
}

} // namespace semidot::detail
