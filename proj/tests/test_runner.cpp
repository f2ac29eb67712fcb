#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "semidot/io.hpp"
#include "semidot/runner.hpp"
#include "support.hpp"

using namespace semidot;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("semidot_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

bool mentions(const std::vector<std::string>& diags, const std::string& what) {
    for (const auto& d : diags)
        if (d.find(what) != std::string::npos) return true;
    return false;
}

json small(const std::string& experiment) {
    return {{"experiment", experiment}, {"domain", {{"n", 24}}}};
}

int cli(const std::string& args) {
    std::string cmd = std::string(SEMIDOT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("default config validates") {
    CHECK(validate(json::object()).empty());
    for (const auto& e : experiments()) CHECK(validate(small(e)).empty());
}

TEST_CASE("schema errors are reported") {
    CHECK(mentions(validate({{"domian", {{"n", 3}}}}), "unknown key 'domian'"));
    CHECK(mentions(validate({{"flow", {{"dt", "fast"}}}}), "flow.dt"));
    CHECK(mentions(validate({{"potentials", {{"W", {{"kind", "quadratic"}, {"scale", 1}}}}}}), "potentials.W.scale"));
    CHECK(mentions(validate({{"experiment", "nope"}}), "experiment must be one of"));
}

TEST_CASE("cross-field diagnostics") {
    CHECK(mentions(validate({{"flow", {{"dt", 0.1}}}}), "explicit stability bound"));
    CHECK(mentions(validate({{"jko", {{"tau", 0.7}}}}), "jko.tau"));
    CHECK(mentions(validate({{"experiment", "jko"}, {"mobility", {{"kind", "log_mean"}}}}), "mass_independent"));
    CHECK(mentions(validate({{"initial", {{"kind", "perturbed"}, {"node_weights", {1.0, 0.0}}}}}), "initial"));
    CHECK(mentions(validate({{"graph", {{"nodes", {"a", "b", "c"}}, {"K", {{0, 1}, {1, 0}}}}}}), "model"));
}

TEST_CASE("flow run writes artifacts and a report") {
    auto dir = scratch("flow");
    json cfg = small("flow");
    cfg["flow"] = {{"T", 0.05}};
    RunOverrides ov;
    ov.output_dir = dir.string();
    RunReport r = run(cfg, ov);
    CHECK(r.exit_code == 0);
    for (const auto& f : r.manifest) CHECK(std::filesystem::exists(dir / f));
    json rep = json::parse(io::read_file((dir / "report.json").string()));
    CHECK(rep["status"] == "ok");
    CHECK(rep["config"]["domain"]["n"] == 24);
    CHECK(rep["checks"].size() == 3);
    GridDomain d(1, 3.0, 24);
    Field f = io::field_from_csv(io::field_csv(Field::Constant(24, 2, 0.5), d, {"a", "b"}), d, {"a", "b"});
    CHECK(f(7, 1) == 0.5);
}

TEST_CASE("invalid config writes nothing") {
    auto dir = scratch("invalid");
    RunOverrides ov;
    ov.output_dir = dir.string();
    RunReport r = run({{"jko", {{"tau", 2.0}}}}, ov);
    CHECK(r.exit_code == 2);
    CHECK_FALSE(std::filesystem::exists(dir));
}

TEST_CASE("cost and dynamic experiments") {
    auto dir = scratch("cost");
    RunOverrides ov;
    ov.output_dir = dir.string();
    RunReport c = run(small("cost"), ov);
    CHECK(c.exit_code == 0);
    json pair = json::parse(io::read_file((dir / "pair.json").string()));
    AdmissiblePair P = io::pair_from_json(pair, 24, 2);
    CHECK(P.exchange.antisymmetric());
    json dyn = small("dynamic");
    dyn["domain"]["n"] = 16;
    dyn["dynamic"] = {{"T_steps", 4}};
    CHECK(run(dyn, ov).exit_code == 0);
}

TEST_CASE("graph round trip") {
    WeightedGraph G = WeightedGraph::complete(3, 0.5);
    WeightedGraph H = io::graph_from_json(io::graph_to_json(G));
    CHECK(H.nodes() == G.nodes());
    CHECK((H.kernel() - G.kernel()).norm() == 0.0);
}

TEST_CASE("command line") {
    auto dir = scratch("cli");
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "ok.json") << R"({"domain": {"n": 24}, "flow": {"T": 0.02}})";
        std::ofstream(dir / "bad.json") << R"({"flow": {"dtt": 1}})";
        std::ofstream(dir / "broken.json") << "{";
    }
    CHECK(cli("--help") == 0);
    CHECK(cli("flow --config " + (dir / "ok.json").string() + " --output " + (dir / "out").string()) == 0);
    CHECK(std::filesystem::exists(dir / "out" / "report.json"));
    CHECK(cli("flow --config " + (dir / "bad.json").string()) == 2);
    CHECK(cli("flow --config " + (dir / "broken.json").string()) == 2);
    CHECK(cli("teleport") == 2);
    CHECK(cli("flow --validate --config " + (dir / "ok.json").string()) == 0);
}
