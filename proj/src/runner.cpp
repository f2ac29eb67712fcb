#include "semidot/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/Core>

#include "semidot/dynamic_transport.hpp"
#include "semidot/error.hpp"
#include "semidot/io.hpp"
#include "semidot/jko.hpp"
#include "semidot/pde_flow.hpp"
#include "semidot/static_transport.hpp"

namespace semidot {

using nlohmann::json;

namespace {

const char* kVersion = "0.1.0";

// ---- schema ---------------------------------------------------------------

using KeyList = std::vector<std::pair<std::string, std::string>>;

const std::map<std::string, KeyList>& schema() {
    static const std::map<std::string, KeyList> s = {
        {"", {{"experiment", "string"}, {"seed", "integer"}, {"output_dir", "string"}, {"domain", "object"},
              {"graph", "object"}, {"potentials", "object"}, {"mobility", "object"}, {"initial", "object"},
              {"target", "object"}, {"flow", "object"}, {"jko", "object"}, {"compare", "object"}, {"cost", "object"},
              {"dynamic", "object"}, {"geodesic", "object"}, {"check", "object"}}},
        {"domain", {{"dimension", "integer"}, {"L", "number"}, {"n", "integer"}}},
        {"graph", {{"nodes", "array"}, {"K", "array"}, {"file", "string"}, {"kind", "string"}, {"m", "integer"},
                   {"weight", "number"}}},
        {"potentials", {{"V", "any"}, {"W", "object"}}},
        {"potential", {{"kind", "string"}, {"a", "number"}, {"b", "number"}, {"c", "number"}, {"t", "number"},
                       {"offset", "number"}, {"table", "array"}}},
        {"mobility", {{"kind", "string"}}},
        {"initial", {{"kind", "string"}, {"amplitude", "number"}, {"node_weights", "array"}, {"seed_offset", "integer"},
                     {"spread", "number"}, {"file", "string"}, {"node", "integer"}, {"center", "number"},
                     {"width", "number"}}},
        {"flow", {{"dt", "number"}, {"T", "number"}, {"scheme", "string"}, {"record_every", "integer"}}},
        {"jko", {{"tau", "number"}, {"steps", "integer"}, {"tol", "number"}, {"max_iter", "integer"},
                 {"plan_term_multiplicity", "integer"}}},
        {"compare", {{"taus", "array"}, {"T", "number"}, {"reference_dt", "number"}}},
        {"cost", {{"tau", "number"}, {"plan_term_multiplicity", "integer"}, {"tol", "number"}}},
        {"dynamic", {{"T_steps", "integer"}, {"max_iter", "integer"}, {"tol", "number"}, {"graph_weight", "number"}}},
        {"geodesic", {{"dt", "number"}, {"steps", "integer"}, {"gamma", "number"}, {"mode", "string"},
                      {"graph_weight", "number"}, {"phi_kind", "string"}, {"phi_scale", "number"}}},
        {"check", {{"samples", "integer"}}},
    };
    return s;
}

bool has_type(const json& v, const std::string& type) {
    if (type == "any") return true;
    if (type == "number") return v.is_number();
    if (type == "integer") return v.is_number_integer();
    if (type == "string") return v.is_string();
    if (type == "array") return v.is_array();
    if (type == "object") return v.is_object();
    if (type == "bool") return v.is_boolean();
    return false;
}

void check_keys(const json& obj, const std::string& section, const std::string& path, std::vector<std::string>& diags) {
    const KeyList& keys = schema().at(section);
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        auto k = std::find_if(keys.begin(), keys.end(), [&](const auto& p) { return p.first == it.key(); });
        if (k == keys.end()) {
            diags.push_back("unknown key '" + path + it.key() + "'");
            continue;
        }
        if (!has_type(it.value(), k->second)) diags.push_back("key '" + path + it.key() + "' must be " + k->second);
    }
}

void check_potential(const json& v, const std::string& path, std::vector<std::string>& diags) {
    if (!v.is_object()) {
        diags.push_back("'" + path + "' must be an object");
        return;
    }
    check_keys(v, "potential", path + ".", diags);
}

void schema_diagnostics(const json& cfg, std::vector<std::string>& diags) {
    if (!cfg.is_object()) {
        diags.push_back("config must be a JSON object");
        return;
    }
    check_keys(cfg, "", "", diags);
    for (const char* sec : {"domain", "graph", "mobility", "flow", "jko", "compare", "cost", "dynamic", "geodesic", "check"})
        if (cfg.contains(sec) && cfg[sec].is_object()) check_keys(cfg[sec], sec, std::string(sec) + ".", diags);
    for (const char* sec : {"initial", "target"})
        if (cfg.contains(sec) && cfg[sec].is_object()) check_keys(cfg[sec], "initial", std::string(sec) + ".", diags);
    if (cfg.contains("potentials") && cfg["potentials"].is_object()) {
        const json& P = cfg["potentials"];
        check_keys(P, "potentials", "potentials.", diags);
        if (P.contains("V")) {
            if (P["V"].is_array()) {
                for (std::size_t g = 0; g < P["V"].size(); ++g)
                    check_potential(P["V"][g], "potentials.V[" + std::to_string(g) + "]", diags);
            } else {
                check_potential(P["V"], "potentials.V", diags);
            }
        }
        if (P.contains("W") && P["W"].is_object()) check_potential(P["W"], "potentials.W", diags);
    }
}

// objects merge key by key, everything else replaces
json merge(json base, const json& over) {
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
            base[it.key()] = merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
    return base;
}

json effective(const json& cfg, const RunOverrides& ov) {
    json c = merge(default_config(), cfg);
    // the graph section is replaced as a whole so that "file" or "kind" does not mix with default K
    if (cfg.contains("graph")) c["graph"] = cfg["graph"];
    if (cfg.contains("potentials") && cfg["potentials"].contains("V")) c["potentials"]["V"] = cfg["potentials"]["V"];
    if (ov.experiment) c["experiment"] = *ov.experiment;
    if (ov.output_dir) c["output_dir"] = *ov.output_dir;
    if (ov.seed) c["seed"] = *ov.seed;
    return c;
}

// ---- model and data -------------------------------------------------------

PotentialSpec potential_spec(const json& j) {
    PotentialSpec s;
    s.kind = j.value("kind", s.kind);
    s.a = j.value("a", s.a);
    s.b = j.value("b", s.b);
    s.c = j.value("c", s.c);
    s.t = j.value("t", s.t);
    s.offset = j.value("offset", s.offset);
    return s;
}

WeightedGraph build_graph(const json& g) {
    if (g.contains("file")) return io::graph_from_json(json::parse(io::read_file(g["file"].get<std::string>())));
    if (g.contains("kind")) {
        std::string kind = g["kind"];
        int m = g.value("m", 2);
        double w = g.value("weight", 1.0);
        if (kind == "complete") return WeightedGraph::complete(m, w);
        if (kind == "path") return WeightedGraph::path(m, w);
        throw Error(ErrorKind::Config, "graph.kind must be complete or path");
    }
    return io::graph_from_json(g);
}

Model build_model(const json& c) {
    const json& d = c["domain"];
    GridDomain dom(d["dimension"].get<int>(), d["L"].get<double>(), d["n"].get<int>());
    WeightedGraph graph = build_graph(c["graph"]);
    const int m = graph.size(), n = dom.num_points();
    const json& P = c["potentials"];
    PotentialPair pot;
    bool tabV = P["V"].is_object() && P["V"].contains("table");
    bool tabW = P["W"].contains("table");
    if (tabV || tabW) {
        Field V(n, m);
        Eigen::VectorXd W(n);
        if (tabV) {
            V = io::field_from_json(P["V"]["table"], n, m);
        } else {
            if (!P["V"].is_array() || static_cast<int>(P["V"].size()) != m)
                throw Error(ErrorKind::Config, "potentials.V needs one entry per node");
            for (int g = 0; g < m; ++g) V.col(g) = evaluate_potential(potential_spec(P["V"][g]), dom);
        }
        if (tabW) {
            const json& t = P["W"]["table"];
            if (static_cast<int>(t.size()) != n) throw Error(ErrorKind::Config, "potentials.W.table needs one value per point");
            for (int p = 0; p < n; ++p) W(p) = t[p].get<double>();
        } else {
            W = evaluate_potential(potential_spec(P["W"]), dom);
        }
        pot = make_potentials(V, W, dom);
    } else {
        if (!P["V"].is_array() || static_cast<int>(P["V"].size()) != m)
            throw Error(ErrorKind::Config, "potentials.V needs one entry per node");
        std::vector<PotentialSpec> specs;
        for (int g = 0; g < m; ++g) specs.push_back(potential_spec(P["V"][g]));
        pot = make_potentials(specs, potential_spec(P["W"]), dom);
    }
    std::string mk = c["mobility"]["kind"];
    Mobility mob;
    if (mk == "mass_independent")
        mob = Mobility::mass_independent(pot.W);
    else if (mk == "log_mean")
        mob = Mobility::log_mean(pot.V);
    else
        throw Error(ErrorKind::Config, "mobility.kind must be mass_independent or log_mean");
    Model model{dom, graph, pot, mob};
    validate_model(model);
    return model;
}

Field build_density(const json& s, const Model& model, std::uint64_t seed) {
    std::string kind = s["kind"];
    const int m = model.nodes();
    std::vector<double> weights(m, 1.0 / m);
    if (s.contains("node_weights")) {
        weights = s["node_weights"].get<std::vector<double>>();
        if (static_cast<int>(weights.size()) != m) throw Error(ErrorKind::Config, "node_weights needs one entry per node");
    }
    if (kind == "equilibrium") return equilibrium_density(model.pot, model.domain);
    if (kind == "perturbed") return perturbed_equilibrium(model.pot, model.domain, s.value("amplitude", 0.3), weights);
    if (kind == "random")
        return random_barrier_density(model.pot, model.domain, seed + s.value("seed_offset", 0), s.value("spread", 2.0));
    if (kind == "concentrated") {
        int node = s.value("node", 0);
        if (node < 0 || node >= m) throw Error(ErrorKind::Config, "initial.node out of range");
        double c0 = s.value("center", 0.0), w = s.value("width", 0.5);
        Field f(model.points(), m);
        for (int g = 0; g < m; ++g)
            for (int p = 0; p < model.points(); ++p) {
                double x = model.domain.coord(p, 0) - c0;
                f(p, g) = 1e-3 * std::exp(-model.pot.V(p, g)) + (g == node ? std::exp(-0.5 * x * x / (w * w)) : 0.0);
            }
        return f / total_mass(f, model.domain);
    }
    if (kind == "file") {
        if (!s.contains("file")) throw Error(ErrorKind::Config, "initial.file is required for kind file");
        return io::field_from_csv(io::read_file(s["file"].get<std::string>()), model.domain, model.graph.nodes());
    }
    throw Error(ErrorKind::Config, "unknown density kind '" + kind + "'");
}

Scheme parse_scheme(const std::string& s) {
    if (s == "explicit") return Scheme::Explicit;
    if (s == "semi_implicit") return Scheme::SemiImplicit;
    throw Error(ErrorKind::Config, "flow.scheme must be explicit or semi_implicit");
}

JkoConfig jko_config(const json& j) {
    JkoConfig c;
    c.tau = j["tau"];
    c.steps = j["steps"];
    c.tol = j["tol"];
    c.max_iter = j["max_iter"];
    c.plan_term_multiplicity = j["plan_term_multiplicity"];
    return c;
}

// ---- output ---------------------------------------------------------------

struct Output {
    std::filesystem::path dir;
    std::vector<std::string> manifest;
    json files = json::array();

    void write(const std::string& name, const std::string& content) {
        io::write_atomic((dir / name).string(), content);
        manifest.push_back(name);
        files.push_back({{"file", name}, {"bytes", content.size()}});
    }
};

void add(std::vector<CheckResult>& out, const std::string& name, bool pass, double value, const std::string& detail = "") {
    out.push_back({name, pass, value, detail});
}

// ---- experiments ----------------------------------------------------------

void run_flow(const json& c, const Model& model, std::uint64_t seed, Output& out, std::vector<CheckResult>& checks) {
    Field f0 = build_density(c["initial"], model, seed);
    FlowConfig fc;
    fc.dt = c["flow"]["dt"];
    fc.T = c["flow"]["T"];
    fc.scheme = parse_scheme(c["flow"]["scheme"]);
    fc.record_every = c["flow"]["record_every"];
    BarrierReport b0 = barrier_check(f0, model.pot, 0.0, INFINITY);
    Trajectory tr = run(f0, fc, model, Barrier{b0.min_ratio, b0.max_ratio});
    out.write("densities.csv", io::densities_csv(tr.times, tr.densities, model.domain, model.graph.nodes()));
    std::ostringstream e;
    e.precision(17);
    e << "t,energy,barrier_min,barrier_max\n";
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        e << tr.times[k] << "," << tr.energies[k] << "," << tr.barrier_min[k] << "," << tr.barrier_max[k] << "\n";
    out.write("energies.csv", e.str());
    add(checks, "mass_conservation", tr.max_mass_defect <= 1e-12, tr.max_mass_defect, "max per-run mass drift");
    add(checks, "energy_nonincreasing", tr.max_energy_increase <= 1e-8, tr.max_energy_increase, "max per-step increase");
    add(checks, "barriers", tr.barrier_violations == 0, static_cast<double>(tr.barrier_violations), tr.first_violation);
}

void run_jko(const json& c, const Model& model, std::uint64_t seed, Output& out, std::vector<CheckResult>& checks) {
    Field f0 = build_density(c["initial"], model, seed);
    JkoConfig jc = jko_config(c["jko"]);
    JkoTrajectory tr = jko_run(f0, jc, model);
    out.write("densities.csv", io::densities_csv(tr.times, tr.densities, model.domain, model.graph.nodes()));
    json steps = json::array();
    bool ineq = true, disp = true, conv = true;
    double el = 0.0, elt = 0.0;
    long sign = 0;
    for (const auto& d : tr.diagnostics) {
        steps.push_back(io::jko_diagnostics_to_json(d));
        ineq = ineq && d.energy_inequality;
        disp = disp && d.displacement_ok;
        conv = conv && d.converged;
        el = std::max(el, d.el_exchange);
        elt = std::max(elt, d.el_transport);
        sign += d.exchange_sign_violations;
    }
    out.write("steps.json", steps.dump(2));
    const double dx = model.domain.dx();
    add(checks, "converged", conv, static_cast<double>(tr.diagnostics.size()), "every step reached the tolerance");
    add(checks, "energy_inequality", ineq, 0.0, "E(sigma) + A <= E(mu) at every step");
    add(checks, "barriers", tr.barrier_violations == 0, static_cast<double>(tr.barrier_violations), tr.first_violation);
    add(checks, "displacement_bound", disp, 0.0, "plan support within sqrt2 (log Lambda - log lambda) sqrt tau + dx");
    add(checks, "el_exchange", el <= 1e-5, el, "max |h - (phi(g) - phi(g'))|");
    add(checks, "el_transport", elt <= 5.0 * (dx * dx + jc.tol), elt, "bound 5 (dx^2 + tol)");
    add(checks, "exchange_direction", sign == 0, static_cast<double>(sign), "cells where exchange follows the potential");
}

void run_compare(const json& c, const Model& model, std::uint64_t seed, Output& out, std::vector<CheckResult>& checks) {
    Field f0 = build_density(c["initial"], model, seed);
    std::vector<double> taus = c["compare"]["taus"].get<std::vector<double>>();
    JkoConfig jc = jko_config(c["jko"]);
    ConvergenceTable tab = compare_to_pde(f0, taus, c["compare"]["T"], c["compare"]["reference_dt"], model, jc);
    std::ostringstream os;
    os.precision(17);
    os << "tau,error\n";
    for (std::size_t i = 0; i < tab.taus.size(); ++i) os << tab.taus[i] << "," << tab.errors[i] << "\n";
    out.write("errors.csv", os.str());
    std::ostringstream r;
    r.precision(17);
    r << "pair,ratio\n";
    for (std::size_t i = 0; i < tab.ratios.size(); ++i) r << i << "," << tab.ratios[i] << "\n";
    out.write("ratios.csv", r.str());
    add(checks, "errors_strictly_decreasing", tab.strictly_decreasing, 0.0, "reference " + tab.reference_scheme);
}

void run_cost(const json& c, const Model& model, std::uint64_t seed, Output& out, std::vector<CheckResult>& checks) {
    Field mu = build_density(c["initial"], model, seed);
    Field sigma = build_density(c["target"], model, seed + 1);
    StaticOptions so;
    so.plan_term_multiplicity = c["cost"]["plan_term_multiplicity"];
    so.tol = c["cost"]["tol"];
    StaticSolution sol = solve_static_cost(mu, sigma, c["cost"]["tau"], model, so);
    OptimalityReport rep = verify_optimality(sol.pair, mu, sigma, model);
    out.write("pair.json", io::pair_to_json(sol.pair, model.graph.nodes()).dump());
    json cj = {{"cost", sol.cost},
               {"objective", sol.objective},
               {"exchange_cost", exchange_cost(sol.pair.exchange, sol.pair.tau, model)},
               {"feasibility", sol.feasibility},
               {"stationarity", sol.stationarity},
               {"iterations", sol.iterations},
               {"converged", sol.converged},
               {"optimality",
                {{"cycle_ok", rep.cycle_ok},
                 {"cycle_defect", rep.cycle_defect},
                 {"cycle_witness", rep.cycle_witness},
                 {"gradient_ok", rep.gradient_ok},
                 {"gradient_residual", rep.gradient_residual},
                 {"monotone_ok", rep.monotone_ok},
                 {"monotone_witness", rep.monotone_witness},
                 {"antisymmetric", rep.antisymmetric}}}};
    out.write("cost.json", cj.dump(2));
    add(checks, "converged", sol.converged, sol.stationarity);
    add(checks, "feasibility", sol.feasibility <= so.tol, sol.feasibility);
    add(checks, "cycle_consistency", rep.cycle_ok, rep.cycle_defect, rep.cycle_witness);
    add(checks, "gradient_form", rep.gradient_ok, rep.gradient_residual);
    add(checks, "cyclical_monotonicity", rep.monotone_ok, 0.0, rep.monotone_witness);
}

DynamicW2Options dynamic_options(const json& d) {
    DynamicW2Options o;
    o.T_steps = d["T_steps"];
    o.max_iter = d["max_iter"];
    o.tol = d["tol"];
    o.op.graph_weight = d["graph_weight"];
    return o;
}

void run_dynamic(const json& c, const Model& model, std::uint64_t seed, Output& out, std::vector<CheckResult>& checks) {
    Field mu0 = build_density(c["initial"], model, seed);
    Field mu1 = build_density(c["target"], model, seed + 1);
    DynamicW2Options o = dynamic_options(c["dynamic"]);
    DynamicW2Result r = dynamic_w2(mu0, mu1, model, o);
    out.write("path.csv", io::path_csv(r.path, model.domain, model.graph.nodes()));
    json a = {{"action", r.action},
              {"distance", r.distance},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"max_continuity_residual", r.max_continuity_residual},
              {"kinetic_action", kinetic_action(r.path, model, o.op)}};
    out.write("action.json", a.dump(2));
    double scale = std::max(mu0.cwiseAbs().maxCoeff(), mu1.cwiseAbs().maxCoeff());
    add(checks, "continuity", r.max_continuity_residual <= 1e-8 * std::max(1.0, scale), r.max_continuity_residual);
    add(checks, "converged", r.converged, static_cast<double>(r.iterations));
}

void run_geodesic(const json& c, const Model& model, std::uint64_t seed, Output& out, std::vector<CheckResult>& checks) {
    Field f = build_density(c["initial"], model, seed);
    const json& g = c["geodesic"];
    double dt = g["dt"], gamma = g["gamma"];
    int steps = g["steps"];
    std::string mode = g["mode"];
    DynamicOptions op;
    op.graph_weight = g["graph_weight"];
    std::string pk = g["phi_kind"];
    double ps = g["phi_scale"];
    Field phi = Field::Zero(model.points(), model.nodes());
    if (pk == "affine") {
        for (int p = 0; p < model.points(); ++p) phi.row(p).setConstant(ps * model.domain.coord(p, 0));
    } else if (pk == "gradient_flow") {
        phi = -ps * (Field(f.array().log()) + model.pot.V);
    } else if (pk != "zero") {
        throw Error(ErrorKind::Config, "geodesic.phi_kind must be zero, affine or gradient_flow");
    }
    std::ostringstream os;
    os.precision(17);
    os << "t,kinetic,entropy,lyapunov\n";
    auto line = [&](double t) {
        double k = kinetic_norm(f, VelocityPotentials::single(phi), model, op);
        double e = entropy(f, model.pot, model.domain);
        os << t << "," << k << "," << e << "," << 0.5 * k + e << "\n";
        return 0.5 * k + e;
    };
    double L0 = line(0.0), Lmax_rise = 0.0, Lmin = L0;
    for (int s = 1; s <= steps; ++s) {
        auto next = mode == "geodesic" ? geodesic_step(f, phi, dt, model, op) : second_order_step(f, phi, dt, gamma, model, op);
        f = std::move(next.first);
        phi = std::move(next.second);
        double L = line(s * dt);
        Lmax_rise = std::max(Lmax_rise, L - Lmin);
        Lmin = std::min(Lmin, L);
    }
    out.write("energies.csv", os.str());
    out.write("final_density.csv", io::field_csv(f, model.domain, model.graph.nodes()));
    out.write("final_phi.csv", io::field_csv(phi, model.domain, model.graph.nodes(), "phi"));
    add(checks, "mass_conservation", std::abs(total_mass(f, model.domain) - 1.0) <= 1e-10,
        std::abs(total_mass(f, model.domain) - 1.0));
    if (mode == "second_order" && gamma > 0.0)
        add(checks, "lyapunov_nonincreasing", Lmax_rise <= dt * std::max(1.0, std::abs(L0)), Lmax_rise,
            "largest rise above the running minimum, tolerance dt max(1, |L0|)");
}

void run_check(const json& c, const Model& model, std::uint64_t seed, Output& out, std::vector<CheckResult>& checks) {
    const int samples = c["check"]["samples"];
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_int_distribution<int> M(2, 6);
    double ibp = 0.0, poisson = 0.0;
    for (int s = 0; s < samples; ++s) {
        int m = M(rng);
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = a + 1; b < m; ++b) K(a, b) = K(b, a) = 0.5 * (U(rng) + 1.0) + 0.01;
        std::vector<std::string> names;
        for (int a = 0; a < m; ++a) names.push_back("n" + std::to_string(a));
        WeightedGraph G(names, K);
        Eigen::MatrixXd h(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) h(a, b) = U(rng);
        NodeFunction phi(m);
        for (int a = 0; a < m; ++a) phi(a) = U(rng);
        double scale = h.cwiseAbs().sum() * phi.cwiseAbs().maxCoeff() * K.maxCoeff();
        ibp = std::max(ibp, integration_by_parts_defect(EdgeField(h), phi, G) / std::max(scale, 1e-300));
        Eigen::MatrixXd S(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b <= a; ++b) S(a, b) = S(b, a) = 0.5 * (U(rng) + 1.0) + 0.1;
        NodeFunction rhs(m);
        for (int a = 0; a < m; ++a) rhs(a) = U(rng);
        rhs.array() -= rhs.mean();
        EdgeField SF(S);
        NodeFunction eta = solve_graph_poisson(rhs, SF, G);
        NodeFunction res = discrete_divergence(EdgeField(discrete_gradient(eta, G).values.cwiseProduct(S)), G) - rhs;
        poisson = std::max(poisson, res.cwiseAbs().maxCoeff() / rhs.cwiseAbs().maxCoeff());
    }
    add(checks, "graph_integration_by_parts", ibp <= 1e-12, ibp);
    add(checks, "graph_poisson", poisson <= 1e-10, poisson);

    for (const Mobility& mob : {Mobility::mass_independent(model.pot.W), Mobility::log_mean(model.pot.V)}) {
        AssumptionReport r = check_assumptions(mob, model.nodes(), samples, seed);
        std::string worst;
        for (const auto& it : r.items)
            if (!it.pass) worst += it.name + " ";
        add(checks, "mobility_" + mob.name(), r.all_pass(), r.max_C, worst);
    }

    Field finf = equilibrium_density(model.pot, model.domain);
    double eq = rhs(finf, model).cwiseAbs().maxCoeff() / finf.maxCoeff();
    add(checks, "equilibrium_rhs", eq <= 1e-8, eq);

    Field f0 = build_density(c["initial"], model, seed);
    BarrierReport b0 = barrier_check(f0, model.pot, 0.0, INFINITY);
    FlowConfig fc;
    fc.dt = c["flow"]["dt"];
    fc.T = std::min(0.1, c["flow"]["T"].get<double>());
    fc.scheme = parse_scheme(c["flow"]["scheme"]);
    fc.record_every = 1000000;
    Trajectory tr = run(f0, fc, model, Barrier{b0.min_ratio, b0.max_ratio});
    add(checks, "flow_mass", tr.max_mass_defect <= 1e-12, tr.max_mass_defect);
    add(checks, "flow_energy", tr.max_energy_increase <= 1e-8, tr.max_energy_increase);
    add(checks, "flow_barriers", tr.barrier_violations == 0, static_cast<double>(tr.barrier_violations), tr.first_violation);

    if (model.domain.dimension() == 1 && model.mob.kind() == Mobility::Kind::MassIndependent) {
        JkoConfig jc = jko_config(c["jko"]);
        jc.steps = 1;
        jc.barrier = Barrier{b0.min_ratio, b0.max_ratio};
        JkoStep s = jko_step(f0, jc, model);
        add(checks, "jko_barriers", s.diag.barrier.pass, s.diag.barrier.min_ratio, s.diag.barrier.message);
        add(checks, "jko_el_exchange", s.diag.el_exchange <= 1e-5, s.diag.el_exchange);
    }

    DynamicW2Options o = dynamic_options(c["dynamic"]);
    Field mu1 = build_density(c["target"], model, seed + 1);
    double self = dynamic_w2(f0, f0, model, o).action;
    double d01 = dynamic_w2(f0, mu1, model, o).distance, d10 = dynamic_w2(mu1, f0, model, o).distance;
    add(checks, "metric_identity", self <= 1e-8, self);
    double asym = std::abs(d01 - d10) / std::max(0.5 * (d01 + d10), 1e-300);
    add(checks, "metric_symmetry", asym <= 0.02, asym);

    std::ostringstream os;
    os.precision(17);
    os << "check,pass,value\n";
    for (const auto& ck : checks) os << ck.name << "," << (ck.pass ? 1 : 0) << "," << ck.value << "\n";
    out.write("checks.csv", os.str());
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::SizeMismatch:
        return 2;
    default:
        return 3;
    }
}

} // namespace

const std::vector<std::string>& experiments() {
    static const std::vector<std::string> e = {"flow", "jko", "compare", "cost", "dynamic", "geodesic", "check"};
    return e;
}

json default_config() {
    json V1 = {{"kind", "double_well"}, {"a", 0.25}, {"b", 1.0}};
    json V2 = {{"kind", "tilted"}, {"a", 0.25}, {"b", 1.0}, {"t", 0.5}};
    return {
        {"experiment", "flow"},
        {"seed", 0},
        {"output_dir", "semidot_out"},
        {"domain", {{"dimension", 1}, {"L", 3.0}, {"n", 64}}},
        {"graph", {{"nodes", {"a", "b"}}, {"K", {{0.0, 1.0}, {1.0, 0.0}}}}},
        {"potentials", {{"V", {V1, V2}}, {"W", V1}}},
        {"mobility", {{"kind", "mass_independent"}}},
        {"initial", {{"kind", "perturbed"}, {"amplitude", 0.3}, {"node_weights", {0.7, 0.3}}}},
        {"target", {{"kind", "perturbed"}, {"amplitude", -0.4}, {"node_weights", {0.4, 0.6}}}},
        {"flow", {{"dt", 5e-4}, {"T", 1.0}, {"scheme", "explicit"}, {"record_every", 50}}},
        {"jko", {{"tau", 0.05}, {"steps", 10}, {"tol", 1e-8}, {"max_iter", 200}, {"plan_term_multiplicity", 1}}},
        {"compare", {{"taus", {0.1, 0.05, 0.025}}, {"T", 0.5}, {"reference_dt", 1e-4}}},
        {"cost", {{"tau", 0.05}, {"plan_term_multiplicity", 1}, {"tol", 1e-7}}},
        {"dynamic", {{"T_steps", 8}, {"max_iter", 5000}, {"tol", 1e-7}, {"graph_weight", 1.0}}},
        {"geodesic",
         {{"dt", 1e-3}, {"steps", 200}, {"gamma", 1.0}, {"mode", "second_order"}, {"graph_weight", 0.5},
          {"phi_kind", "zero"}, {"phi_scale", 1.0}}},
        {"check", {{"samples", 100}}},
    };
}

std::vector<std::string> validate(const json& config, const RunOverrides& overrides) {
    std::vector<std::string> diags;
    schema_diagnostics(config, diags);
    if (!diags.empty()) return diags;
    json c = effective(config, overrides);
    const std::string exp = c["experiment"];
    if (std::find(experiments().begin(), experiments().end(), exp) == experiments().end())
        diags.push_back("experiment must be one of flow, jko, compare, cost, dynamic, geodesic, check");
    if (c["seed"].is_number_integer() && c["seed"].get<long long>() < 0) diags.push_back("seed must be nonnegative");

    std::optional<Model> model;
    try {
        model = build_model(c);
    } catch (const std::exception& e) {
        diags.push_back(std::string("model: ") + e.what());
        return diags;
    }
    const double dx = model->domain.dx();
    // flow step
    const json& fl = c["flow"];
    double dt = fl["dt"];
    if (!(dt > 0.0) || !(fl["T"].get<double>() >= 0.0)) diags.push_back("flow.dt must be positive and flow.T nonnegative");
    if (fl["record_every"].get<int>() < 1) diags.push_back("flow.record_every must be >= 1");
    if (fl["scheme"] != "explicit" && fl["scheme"] != "semi_implicit") diags.push_back("flow.scheme must be explicit or semi_implicit");
    if (fl["scheme"] == "explicit" && (exp == "flow" || exp == "check")) {
        double lim = explicit_dt_limit(*model);
        if (dt > lim) {
            std::ostringstream os;
            os << "flow.dt = " << dt << " exceeds the explicit stability bound 0.25 dx^2 / (1 + max|grad V| dx) = " << lim
               << " (dx = " << dx << ")";
            diags.push_back(os.str());
        }
    }
    // transport steps
    double tau = c["jko"]["tau"];
    if (!(tau > 0.0 && tau < 0.5)) diags.push_back("jko.tau must lie in (0, 1/2)");
    int mult = c["jko"]["plan_term_multiplicity"];
    if (mult != 1 && mult != model->nodes()) diags.push_back("jko.plan_term_multiplicity must be 1 or the node count");
    mult = c["cost"]["plan_term_multiplicity"];
    if (mult != 1 && mult != model->nodes()) diags.push_back("cost.plan_term_multiplicity must be 1 or the node count");
    if (!(c["cost"]["tau"].get<double>() > 0.0)) diags.push_back("cost.tau must be positive");
    bool transport = exp == "jko" || exp == "compare" || exp == "cost";
    if (transport && model->domain.dimension() != 1) diags.push_back(exp + " needs domain.dimension = 1");
    if ((exp == "jko" || exp == "compare") && model->mob.kind() != Mobility::Kind::MassIndependent)
        diags.push_back(exp + " needs mobility.kind = mass_independent");
    if (exp == "compare") {
        auto taus = c["compare"]["taus"];
        if (taus.empty()) diags.push_back("compare.taus must not be empty");
        for (const auto& t : taus)
            if (!t.is_number() || !(t.get<double>() > 0.0 && t.get<double>() < 0.5))
                diags.push_back("compare.taus entries must lie in (0, 1/2)");
    }
    if (c["dynamic"]["T_steps"].get<int>() < 1) diags.push_back("dynamic.T_steps must be >= 1");
    if (!(c["geodesic"]["dt"].get<double>() > 0.0)) diags.push_back("geodesic.dt must be positive");
    if (!(c["geodesic"]["gamma"].get<double>() >= 0.0)) diags.push_back("geodesic.gamma must be nonnegative");
    if (c["geodesic"]["mode"] != "geodesic" && c["geodesic"]["mode"] != "second_order")
        diags.push_back("geodesic.mode must be geodesic or second_order");
    if (c["check"]["samples"].get<int>() < 1) diags.push_back("check.samples must be >= 1");

    // initial data: positive, unit mass, within two-sided barriers
    const std::uint64_t seed = c["seed"].get<std::uint64_t>();
    std::vector<std::pair<std::string, bool>> dens = {{"initial", true}};
    if (exp == "cost" || exp == "dynamic" || exp == "check") dens.push_back({"target", true});
    for (const auto& [name, _] : dens) {
        try {
            Field f = build_density(c[name], *model, name == "initial" ? seed : seed + 1);
            validate_density(f, model->domain, 1e-8);
            BarrierReport b = barrier_check(f, model->pot, 0.0, INFINITY);
            if (!(b.min_ratio > 0.0) || !std::isfinite(b.max_ratio))
                diags.push_back(name + " density violates the barrier requirement lambda e^{-V} <= f <= Lambda e^{-V} "
                                       "with lambda > 0: " + b.message);
        } catch (const std::exception& e) {
            diags.push_back(name + ": " + e.what());
        }
    }
    return diags;
}

RunReport run(const json& config, const RunOverrides& overrides) {
    RunReport rep;
    auto start = std::chrono::steady_clock::now();
    std::vector<std::string> diags = validate(config, overrides);
    if (!diags.empty()) {
        rep.exit_code = 2;
        rep.json = {{"status", "invalid_config"}, {"diagnostics", diags}, {"exit_code", 2}};
        return rep;
    }
    json c = effective(config, overrides);
    const std::string exp = c["experiment"];
    const std::uint64_t seed = c["seed"].get<std::uint64_t>();
    Output out;
    out.dir = c["output_dir"].get<std::string>();
    std::string status = "ok", error;
    try {
        Model model = build_model(c);
        if (exp == "flow") run_flow(c, model, seed, out, rep.checks);
        else if (exp == "jko") run_jko(c, model, seed, out, rep.checks);
        else if (exp == "compare") run_compare(c, model, seed, out, rep.checks);
        else if (exp == "cost") run_cost(c, model, seed, out, rep.checks);
        else if (exp == "dynamic") run_dynamic(c, model, seed, out, rep.checks);
        else if (exp == "geodesic") run_geodesic(c, model, seed, out, rep.checks);
        else run_check(c, model, seed, out, rep.checks);
        bool all = std::all_of(rep.checks.begin(), rep.checks.end(), [](const CheckResult& k) { return k.pass; });
        rep.exit_code = all ? 0 : 1;
        if (!all) status = "checks_failed";
    } catch (const Error& e) {
        rep.exit_code = exit_code_for(e);
        status = rep.exit_code == 2 ? "invalid_config" : "numerical_failure";
        error = e.what();
    } catch (const std::exception& e) {
        rep.exit_code = 3;
        status = "numerical_failure";
        error = e.what();
    }
    json checks = json::array();
    for (const auto& k : rep.checks)
        checks.push_back({{"name", k.name}, {"pass", k.pass}, {"value", std::isfinite(k.value) ? json(k.value) : json(nullptr)},
                          {"detail", k.detail}});
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream eigen;
    eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
    rep.json = {{"experiment", exp},
                {"status", status},
                {"exit_code", rep.exit_code},
                {"config", c},
                {"versions", {{"semidot", kVersion}, {"eigen", eigen.str()}, {"compiler", __VERSION__}}},
                {"wall_time_s", wall},
                {"checks", checks},
                {"manifest", out.files},
                {"partial", status == "numerical_failure"}};
    if (!error.empty()) rep.json["error"] = error;
    rep.manifest = out.manifest;
    io::write_atomic((out.dir / "report.json").string(), rep.json.dump(2));
    rep.manifest.push_back("report.json");
    return rep;
}

std::string config_help() {
    return R"(Config (JSON). Every key is optional; missing keys take the default instance.
  experiment     flow | jko | compare | cost | dynamic | geodesic | check
  seed           nonnegative integer, seeds random initial data
  output_dir     directory for artifacts and report.json
  domain         {dimension: 1|2, L: half-width, n: points per axis}
  graph          {nodes: [names], K: [[...]]} | {file: graph.json} | {kind: complete|path, m, weight}
  potentials     {V: [pot per node] | {table: [[per node]]}, W: pot | {table: [...]}}
                 pot = {kind: quadratic|double_well|tilted, a, b, c, t, offset}
  mobility       {kind: mass_independent | log_mean}
  initial/target {kind: equilibrium|perturbed|random|concentrated|file,
                  amplitude, node_weights, seed_offset, spread, node, center, width, file}
  flow           {dt, T, scheme: explicit|semi_implicit, record_every}
  jko            {tau, steps, tol, max_iter, plan_term_multiplicity}
  compare        {taus: [...], T, reference_dt}
  cost           {tau, plan_term_multiplicity, tol}
  dynamic        {T_steps, max_iter, tol, graph_weight}
  geodesic       {dt, steps, gamma, mode: geodesic|second_order, graph_weight,
                  phi_kind: zero|affine|gradient_flow, phi_scale}
  check          {samples}
Unknown keys are rejected. Exit codes: 0 all checks pass, 1 a check failed,
2 invalid config, 3 numerical failure. SEMIDOT_THREADS caps worker threads.)";
}

} // namespace semidot
