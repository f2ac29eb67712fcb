#pragma once

#include <Eigen/Dense>

namespace semidot::detail {

// W2^2 between the cell masses a and the density b (mass b dx per cell) of a
// single fiber. Derivatives are taken in density units.
struct FiberOT {
    double left = 0.0;
    double dx = 1.0;

    double value(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
    // defined up to a common constant
    Eigen::VectorXd gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
    // Central differences of the gradient along e_k - e_r, r = argmax b.
    // Row and column r are zero; v^T H v is the second derivative for sum(v) = 0.
    Eigen::MatrixXd hessian(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
};

} // namespace semidot::detail
