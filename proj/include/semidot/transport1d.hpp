#pragma once

#include <vector>

#include <Eigen/Dense>

namespace semidot {

// Quadratic optimal transport on the line between two piecewise-constant
// densities on the same uniform cells. Cell k is [left + k dx, left + (k+1) dx]
// and carries mass a_k (source) or b_k (target). Both masses must have the same
// total. The optimal coupling is the monotone rearrangement in cumulative-mass
// coordinates; it is swept from both ends toward the median so that small
// tail cells keep full relative precision.
class CellTransport {
public:
    struct Segment {
        int i, j;       // source cell, target cell
        double len;     // mass carried
        double qa0, qa1; // source positions at segment start/end
        double qb0, qb1; // target positions
        double ob;      // mass offset of the segment start inside target cell j
    };

    CellTransport(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double left, double dx);

    // int |Q_a - Q_b|^2 ds
    double w2() const { return w2_; }
    // d w2 / d b_k along mass-preserving directions (entries are defined up to a
    // common constant); requires b > 0
    Eigen::VectorXd grad_target() const;
    // overlap masses gamma(i, j)
    Eigen::MatrixXd plan() const;
    // mean source position of the mass landing in target cell j (centre if empty)
    Eigen::VectorXd barycenter() const;
    // sum gamma_ij |x_i - x_j|^2 with cell centres x
    double point_cost() const;
    // max |x_i - x_j| over entries with gamma_ij > threshold
    double max_displacement(double threshold) const;

    const std::vector<Segment>& segments() const { return segs_; }
    double center(int k) const { return left_ + (k + 0.5) * dx_; }

private:
    void sweep(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

    int n_;
    double left_, dx_;
    Eigen::VectorXd b_;
    std::vector<Segment> segs_;
    double w2_ = 0.0;
    Eigen::VectorXd A_, B_; // per target cell: int d ds, int d (s - G_j) ds
};

} // namespace semidot
