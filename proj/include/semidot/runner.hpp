#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace semidot {

struct RunOverrides {
    std::optional<std::string> experiment;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    std::string detail;
};

struct RunReport {
    int exit_code = 0; // 0 all pass, 1 checks failed, 2 invalid config, 3 numerical failure
    std::vector<CheckResult> checks;
    std::vector<std::string> manifest;
    nlohmann::json json;
};

const std::vector<std::string>& experiments();

// The default instance with every section filled in.
nlohmann::json default_config();

// Schema and cross-field diagnostics for a user config (defaults filled in
// for missing keys). Empty when the config is runnable.
std::vector<std::string> validate(const nlohmann::json& config, const RunOverrides& overrides = {});

// Validates, runs the experiment, writes artifacts and report.json into the
// output directory. Invalid configs write nothing.
RunReport run(const nlohmann::json& config, const RunOverrides& overrides = {});

// Human-readable description of the config keys.
std::string config_help();

} // namespace semidot
