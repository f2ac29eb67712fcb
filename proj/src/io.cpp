#include "semidot/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "semidot/error.hpp"

namespace semidot::io {

namespace {

std::ostringstream number_stream() {
    std::ostringstream os;
    os << std::setprecision(17);
    return os;
}

void header(std::ostringstream& os, const GridDomain& domain) {
    os << "point";
    for (int a = 0; a < domain.dimension(); ++a) os << ",x" << a;
}

void point_cols(std::ostringstream& os, const GridDomain& domain, int p) {
    os << p;
    for (int a = 0; a < domain.dimension(); ++a) os << "," << domain.coord(p, a);
}

} // namespace

json graph_to_json(const WeightedGraph& graph) {
    json K = json::array();
    for (int g = 0; g < graph.size(); ++g) {
        json row = json::array();
        for (int h = 0; h < graph.size(); ++h) row.push_back(graph.K(g, h));
        K.push_back(row);
    }
    return {{"nodes", graph.nodes()}, {"K", K}};
}

WeightedGraph graph_from_json(const json& j) {
    try {
        std::vector<std::string> nodes = j.at("nodes").get<std::vector<std::string>>();
        const auto& K = j.at("K");
        const int m = static_cast<int>(nodes.size());
        if (!K.is_array() || static_cast<int>(K.size()) != m) throw Error(ErrorKind::SizeMismatch, "K must have one row per node");
        Eigen::MatrixXd M(m, m);
        for (int g = 0; g < m; ++g) {
            if (!K[g].is_array() || static_cast<int>(K[g].size()) != m)
                throw Error(ErrorKind::SizeMismatch, "K row " + std::to_string(g) + " has the wrong length");
            for (int h = 0; h < m; ++h) M(g, h) = K[g][h].get<double>();
        }
        return WeightedGraph(std::move(nodes), std::move(M));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("graph: ") + e.what());
    }
}

json field_to_json(const Field& f) {
    json cols = json::array();
    for (int g = 0; g < f.cols(); ++g) {
        json c = json::array();
        for (int p = 0; p < f.rows(); ++p) c.push_back(f(p, g));
        cols.push_back(c);
    }
    return cols;
}

Field field_from_json(const json& j, int points, int nodes) {
    if (!j.is_array() || static_cast<int>(j.size()) != nodes) throw Error(ErrorKind::SizeMismatch, "field needs one column per node");
    Field f(points, nodes);
    for (int g = 0; g < nodes; ++g) {
        if (!j[g].is_array() || static_cast<int>(j[g].size()) != points)
            throw Error(ErrorKind::SizeMismatch, "field column has the wrong length");
        for (int p = 0; p < points; ++p) f(p, g) = j[g][p].get<double>();
    }
    return f;
}

json pair_to_json(const AdmissiblePair& pair, const std::vector<std::string>& node_names) {
    json plans = json::object();
    for (std::size_t g = 0; g < pair.plan.plans.size(); ++g) {
        const Eigen::MatrixXd& P = pair.plan.plans[g];
        json rows = json::array();
        for (int i = 0; i < P.rows(); ++i) {
            json r = json::array();
            for (int j = 0; j < P.cols(); ++j) r.push_back(P(i, j));
            rows.push_back(r);
        }
        plans[g < node_names.size() ? node_names[g] : std::to_string(g)] = rows;
    }
    json h = json::array();
    for (const auto& M : pair.exchange.h) {
        json cell = json::array();
        for (int g = 0; g < M.rows(); ++g)
            for (int k = g + 1; k < M.cols(); ++k) cell.push_back(M(g, k));
        h.push_back(cell);
    }
    return {{"tau", pair.tau}, {"nodes", node_names}, {"plans", plans}, {"h_upper", h}};
}

AdmissiblePair pair_from_json(const json& j, int points, int nodes) {
    try {
        AdmissiblePair pair;
        pair.tau = j.at("tau").get<double>();
        std::vector<std::string> names = j.at("nodes").get<std::vector<std::string>>();
        if (static_cast<int>(names.size()) != nodes) throw Error(ErrorKind::SizeMismatch, "pair node count");
        for (const auto& name : names) {
            const auto& rows = j.at("plans").at(name);
            Eigen::MatrixXd P(points, points);
            if (static_cast<int>(rows.size()) != points) throw Error(ErrorKind::SizeMismatch, "plan rows");
            for (int i = 0; i < points; ++i) {
                if (static_cast<int>(rows[i].size()) != points) throw Error(ErrorKind::SizeMismatch, "plan columns");
                for (int k = 0; k < points; ++k) P(i, k) = rows[i][k].get<double>();
            }
            pair.plan.plans.push_back(P);
        }
        const auto& h = j.at("h_upper");
        if (static_cast<int>(h.size()) != points) throw Error(ErrorKind::SizeMismatch, "exchange cells");
        pair.exchange = ExchangeField::zero(points, nodes);
        for (int p = 0; p < points; ++p) {
            int t = 0;
            if (static_cast<int>(h[p].size()) != nodes * (nodes - 1) / 2) throw Error(ErrorKind::SizeMismatch, "exchange entries");
            for (int g = 0; g < nodes; ++g)
                for (int k = g + 1; k < nodes; ++k) {
                    double v = h[p][t++].get<double>();
                    pair.exchange.h[p](g, k) = v;
                    pair.exchange.h[p](k, g) = -v;
                }
        }
        return pair;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("pair: ") + e.what());
    }
}

json barrier_to_json(const BarrierReport& b) {
    return {{"min_ratio", b.min_ratio}, {"max_ratio", b.max_ratio}, {"pass", b.pass}, {"message", b.message}};
}

json jko_diagnostics_to_json(const JkoDiagnostics& d) {
    return {{"objective", d.objective},
            {"energy", d.energy},
            {"energy_before", d.energy_before},
            {"cost", d.cost},
            {"pair_cost", d.pair_cost},
            {"energy_inequality", d.energy_inequality},
            {"lambda", d.lambda},
            {"Lambda", d.Lambda},
            {"barrier", barrier_to_json(d.barrier)},
            {"max_displacement", d.max_displacement},
            {"displacement_bound", d.displacement_bound},
            {"displacement_ok", d.displacement_ok},
            {"el_exchange", d.el_exchange},
            {"el_transport", d.el_transport},
            {"exchange_sign_violations", d.exchange_sign_violations},
            {"iterations", d.iterations},
            {"stationarity", d.stationarity},
            {"converged", d.converged}};
}

std::string field_csv(const Field& f, const GridDomain& domain, const std::vector<std::string>& names,
                      const std::string& value_name) {
    auto os = number_stream();
    header(os, domain);
    os << ",node," << value_name << "\n";
    for (int g = 0; g < f.cols(); ++g)
        for (int p = 0; p < f.rows(); ++p) {
            point_cols(os, domain, p);
            os << "," << names[g] << "," << f(p, g) << "\n";
        }
    return os.str();
}

Field field_from_csv(const std::string& text, const GridDomain& domain, const std::vector<std::string>& names) {
    std::map<std::string, int> index;
    for (std::size_t g = 0; g < names.size(); ++g) index[names[g]] = static_cast<int>(g);
    Field f = Field::Constant(domain.num_points(), static_cast<int>(names.size()), std::nan(""));
    std::istringstream in(text);
    std::string line;
    std::getline(in, line); // header
    const int ncols = 3 + domain.dimension();
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (static_cast<int>(cells.size()) != ncols)
            throw Error(ErrorKind::Config, "density csv line " + std::to_string(lineno) + " has the wrong column count");
        int p = std::stoi(cells[0]);
        auto it = index.find(cells[ncols - 2]);
        if (p < 0 || p >= domain.num_points() || it == index.end())
            throw Error(ErrorKind::Config, "density csv line " + std::to_string(lineno) + " names an unknown point or node");
        f(p, it->second) = std::stod(cells[ncols - 1]);
    }
    if (f.hasNaN()) throw Error(ErrorKind::Config, "density csv does not cover every point and node");
    return f;
}

std::string densities_csv(const std::vector<double>& times, const std::vector<Field>& densities, const GridDomain& domain,
                          const std::vector<std::string>& names) {
    auto os = number_stream();
    os << "t,";
    header(os, domain);
    os << ",node,f\n";
    for (std::size_t k = 0; k < densities.size(); ++k)
        for (int g = 0; g < densities[k].cols(); ++g)
            for (int p = 0; p < densities[k].rows(); ++p) {
                os << times[k] << ",";
                point_cols(os, domain, p);
                os << "," << names[g] << "," << densities[k](p, g) << "\n";
            }
    return os.str();
}

std::string path_csv(const DiscretePath& path, const GridDomain& domain, const std::vector<std::string>& names) {
    auto os = number_stream();
    os << "t,";
    header(os, domain);
    os << ",node,f,phi\n";
    for (std::size_t k = 0; k < path.densities.size(); ++k) {
        const Field& f = path.densities[k];
        for (int g = 0; g < f.cols(); ++g)
            for (int p = 0; p < f.rows(); ++p) {
                os << path.times[k] << ",";
                point_cols(os, domain, p);
                os << "," << names[g] << "," << f(p, g) << ",";
                if (k < path.potentials.size()) os << path.potentials[k].phi(p, g);
                os << "\n";
            }
    }
    return os.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp);
        out << content;
        if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot move " + tmp + " to " + path + ": " + ec.message());
}

} // namespace semidot::io
