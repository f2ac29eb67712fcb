#include "semidot/graph.hpp"

#include <cmath>
#include <queue>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "semidot/error.hpp"

namespace semidot {

namespace {

std::vector<int> label_components(const Eigen::MatrixXd& adj, int* count) {
    const int m = static_cast<int>(adj.rows());
    std::vector<int> label(m, -1);
    int next = 0;
    for (int s = 0; s < m; ++s) {
        if (label[s] >= 0) continue;
        std::queue<int> q;
        q.push(s);
        label[s] = next;
        while (!q.empty()) {
            int g = q.front();
            q.pop();
            for (int h = 0; h < m; ++h)
                if (adj(g, h) > 0.0 && label[h] < 0) {
                    label[h] = next;
                    q.push(h);
                }
        }
        ++next;
    }
    if (count) *count = next;
    return label;
}

void require_size(int got, int want, const char* what) {
    if (got != want) {
        std::ostringstream os;
        os << what << " has size " << got << ", graph has " << want << " nodes";
        throw Error(ErrorKind::SizeMismatch, os.str());
    }
}

} // namespace

WeightedGraph::WeightedGraph(std::vector<std::string> nodes, Eigen::MatrixXd kernel)
    : nodes_(std::move(nodes)), K_(std::move(kernel)) {
    const int m = static_cast<int>(nodes_.size());
    if (m < 1) throw Error(ErrorKind::InvalidArgument, "graph needs at least one node");
    if (K_.rows() != m || K_.cols() != m) {
        std::ostringstream os;
        os << "kernel is " << K_.rows() << "x" << K_.cols() << " for " << m << " nodes";
        throw Error(ErrorKind::SizeMismatch, os.str());
    }
    for (int g = 0; g < m; ++g)
        for (int h = g + 1; h < m; ++h)
            if (nodes_[g] == nodes_[h]) throw Error(ErrorKind::InvalidArgument, "duplicate node name " + nodes_[g]);
    for (int g = 0; g < m; ++g) {
        if (K_(g, g) != 0.0) throw Error(ErrorKind::InvalidArgument, "kernel diagonal must be zero");
        for (int h = 0; h < m; ++h) {
            if (!std::isfinite(K_(g, h)) || K_(g, h) < 0.0)
                throw Error(ErrorKind::InvalidArgument, "kernel entries must be finite and nonnegative");
            if (K_(g, h) != K_(h, g)) {
                std::ostringstream os;
                os << "kernel not symmetric at (" << nodes_[g] << "," << nodes_[h] << ")";
                throw Error(ErrorKind::InvalidArgument, os.str());
            }
        }
    }
    component_ = label_components(K_, &n_components_);
    for (int g = 0; g < m; ++g)
        for (int h = g + 1; h < m; ++h)
            if (K_(g, h) > 0.0) edges_.emplace_back(g, h);
}

WeightedGraph WeightedGraph::complete(int m, double weight) {
    std::vector<std::string> names;
    for (int g = 0; g < m; ++g) names.push_back("g" + std::to_string(g + 1));
    Eigen::MatrixXd K = Eigen::MatrixXd::Constant(m, m, weight);
    K.diagonal().setZero();
    return WeightedGraph(names, K);
}

WeightedGraph WeightedGraph::path(int m, double weight) {
    std::vector<std::string> names;
    for (int g = 0; g < m; ++g) names.push_back("g" + std::to_string(g + 1));
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
    for (int g = 0; g + 1 < m; ++g) K(g, g + 1) = K(g + 1, g) = weight;
    return WeightedGraph(names, K);
}

WeightedGraph WeightedGraph::permuted(const std::vector<int>& perm) const {
    const int m = size();
    require_size(static_cast<int>(perm.size()), m, "permutation");
    std::vector<std::string> names(m);
    Eigen::MatrixXd K(m, m);
    for (int a = 0; a < m; ++a) {
        names[a] = nodes_[perm[a]];
        for (int b = 0; b < m; ++b) K(a, b) = K_(perm[a], perm[b]);
    }
    return WeightedGraph(names, K);
}

EdgeField::EdgeField(Eigen::MatrixXd v, bool anti) : values(std::move(v)), antisymmetric(anti) {
    if (values.rows() != values.cols()) throw Error(ErrorKind::SizeMismatch, "edge field must be square");
    if (antisymmetric) {
        for (int g = 0; g < values.rows(); ++g)
            for (int h = 0; h < values.cols(); ++h)
                if (values(g, h) != -values(h, g))
                    throw Error(ErrorKind::InvalidArgument, "edge field flagged antisymmetric is not");
    }
}

EdgeField EdgeField::constant(int m, double value) {
    return EdgeField(Eigen::MatrixXd::Constant(m, m, value), false);
}

EdgeField discrete_gradient(const NodeFunction& phi, const WeightedGraph& graph) {
    const int m = graph.size();
    require_size(static_cast<int>(phi.size()), m, "node function");
    Eigen::MatrixXd v(m, m);
    for (int g = 0; g < m; ++g)
        for (int h = 0; h < m; ++h) v(g, h) = phi(h) - phi(g);
    EdgeField out;
    out.values = std::move(v);
    out.antisymmetric = true;
    return out;
}

NodeFunction discrete_divergence(const EdgeField& h, const WeightedGraph& graph) {
    const int m = graph.size();
    require_size(h.size(), m, "edge field");
    NodeFunction out = NodeFunction::Zero(m);
    for (int g = 0; g < m; ++g)
        for (int k = 0; k < m; ++k) out(g) += (h(g, k) - h(k, g)) * graph.K(g, k);
    return out;
}

double integration_by_parts_defect(const EdgeField& h, const NodeFunction& phi, const WeightedGraph& graph) {
    const int m = graph.size();
    require_size(h.size(), m, "edge field");
    require_size(static_cast<int>(phi.size()), m, "node function");
    NodeFunction div = discrete_divergence(h, graph);
    double lhs = div.dot(phi);
    double rhs = 0.0;
    for (int g = 0; g < m; ++g)
        for (int k = 0; k < m; ++k) rhs += h(g, k) * (phi(k) - phi(g)) * graph.K(g, k);
    return std::abs(lhs + rhs);
}

Eigen::MatrixXd weighted_laplacian(const EdgeField& S, const WeightedGraph& graph) {
    const int m = graph.size();
    require_size(S.size(), m, "weight field");
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (int g = 0; g < m; ++g)
        for (int k = 0; k < m; ++k) {
            if (k == g) continue;
            double w = 2.0 * S(g, k) * graph.K(g, k);
            L(g, k) -= w;
            L(g, g) += w;
        }
    return L;
}

std::vector<int> effective_components(const EdgeField& S, const WeightedGraph& graph, int* count) {
    const int m = graph.size();
    require_size(S.size(), m, "weight field");
    Eigen::MatrixXd adj(m, m);
    for (int g = 0; g < m; ++g)
        for (int k = 0; k < m; ++k) adj(g, k) = S(g, k) * graph.K(g, k);
    return label_components(adj, count);
}

namespace {

void check_weights(const EdgeField& S, const WeightedGraph& graph) {
    const int m = graph.size();
    require_size(S.size(), m, "weight field");
    for (int g = 0; g < m; ++g)
        for (int k = 0; k < m; ++k) {
            if (S(g, k) != S(k, g)) throw Error(ErrorKind::InvalidArgument, "weight field S must be symmetric");
            if (graph.K(g, k) > 0.0 && !(S(g, k) > 0.0))
                throw Error(ErrorKind::InvalidArgument, "weight field S must be positive where K > 0");
        }
    int count = 0;
    auto labels = effective_components(S, graph, &count);
    if (count > 1) {
        std::ostringstream os;
        os << "effective graph S*K splits into " << count << " components; node " << graph.nodes()[0]
           << " cannot reach";
        for (int g = 0; g < m; ++g)
            if (labels[g] != labels[0]) os << " " << graph.nodes()[g];
        throw Error(ErrorKind::Disconnected, os.str());
    }
}

} // namespace

NodeFunction solve_graph_poisson(const NodeFunction& rhs, const EdgeField& S, const WeightedGraph& graph) {
    const int m = graph.size();
    require_size(static_cast<int>(rhs.size()), m, "rhs");
    double scale = rhs.cwiseAbs().sum();
    if (std::abs(rhs.sum()) > 1e-10 * std::max(scale, 1e-300) && scale > 0.0) {
        std::ostringstream os;
        os << "rhs sums to " << rhs.sum();
        throw Error(ErrorKind::NotZeroSum, os.str());
    }
    check_weights(S, graph);
    if (scale == 0.0) return NodeFunction::Zero(m);
    // deflate the constant kernel: (L + 11^T/m) eta = -rhs has the zero-mean solution
    Eigen::MatrixXd A = weighted_laplacian(S, graph);
    A.array() += 1.0 / m;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    NodeFunction eta = ldlt.solve(-rhs);
    eta.array() -= eta.mean();
    NodeFunction res = weighted_laplacian(S, graph) * eta + rhs;
    if (res.cwiseAbs().maxCoeff() > 1e-10 * rhs.cwiseAbs().maxCoeff()) {
        // one step of iterative refinement
        NodeFunction d = ldlt.solve(-res);
        eta += d;
        eta.array() -= eta.mean();
    }
    return eta;
}

double laplacian_spectral_gap(const EdgeField& S, const WeightedGraph& graph) {
    check_weights(S, graph);
    const int m = graph.size();
    if (m == 1) throw Error(ErrorKind::InvalidArgument, "spectral gap undefined for a single node");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(weighted_laplacian(S, graph), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(1);
}

double dirichlet_energy(const NodeFunction& eta, const EdgeField& S, const WeightedGraph& graph) {
    const int m = graph.size();
    double e = 0.0;
    for (int g = 0; g < m; ++g)
        for (int k = 0; k < m; ++k) {
            double d = eta(k) - eta(g);
            e += d * d * S(g, k) * graph.K(g, k);
        }
    return e;
}

} // namespace semidot
