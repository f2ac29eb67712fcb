#pragma once

#include <Eigen/Dense>

namespace semidot::detail {

// Convex objective on an affine set; the problem supplies a basis Z of the
// tangent space at each iterate and the reduced Hessian Z^T H Z.
class NewtonProblem {
public:
    virtual ~NewtonProblem() = default;
    virtual double value(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd basis(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd reduced_hessian(const Eigen::VectorXd& x, const Eigen::MatrixXd& Z) const = 0;
    // largest alpha keeping x + alpha p strictly inside the domain (may be +inf)
    virtual double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const = 0;
    // stationarity measure in the problem's natural units
    virtual double residual(const Eigen::VectorXd& x, const Eigen::VectorXd& grad, const Eigen::MatrixXd& Z) const = 0;
};

struct NewtonResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

NewtonResult newton_minimize(const NewtonProblem& prob, Eigen::VectorXd x, double tol, int max_iter);

} // namespace semidot::detail
