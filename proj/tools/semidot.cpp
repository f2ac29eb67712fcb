#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "semidot/error.hpp"
#include "semidot/io.hpp"
#include "semidot/runner.hpp"

int main(int argc, char** argv) {
    using nlohmann::json;
    CLI::App app{"semidot: gradient flows and transport costs on R^d x G"};
    app.footer(semidot::config_help());

    std::string experiment, config_path, output;
    long long seed = -1;
    bool validate_only = false, print_defaults = false;
    app.add_option("experiment", experiment, "flow | jko | compare | cost | dynamic | geodesic | check")
        ->check(CLI::IsMember(semidot::experiments()));
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("-o,--output", output, "output directory (overrides output_dir)");
    app.add_option("-s,--seed", seed, "seed (overrides seed)")->check(CLI::NonNegativeNumber);
    app.add_flag("--validate", validate_only, "check the config and exit");
    app.add_flag("--print-defaults", print_defaults, "print the default config and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (print_defaults) {
        std::cout << semidot::default_config().dump(2) << "\n";
        return 0;
    }

    json config = json::object();
    if (!config_path.empty()) {
        try {
            config = json::parse(semidot::io::read_file(config_path));
        } catch (const std::exception& e) {
            std::cerr << "semidot: cannot load config: " << e.what() << "\n";
            return 2;
        }
    }
    semidot::RunOverrides ov;
    if (!experiment.empty()) ov.experiment = experiment;
    if (!output.empty()) ov.output_dir = output;
    if (seed >= 0) ov.seed = static_cast<std::uint64_t>(seed);

    if (validate_only) {
        auto diags = semidot::validate(config, ov);
        for (const auto& d : diags) std::cerr << "semidot: " << d << "\n";
        if (diags.empty()) std::cout << "config ok\n";
        return diags.empty() ? 0 : 2;
    }

    semidot::RunReport rep;
    try {
        rep = semidot::run(config, ov);
    } catch (const std::exception& e) {
        std::cerr << "semidot: " << e.what() << "\n";
        return 3;
    }
    if (rep.exit_code == 2 && rep.json.contains("diagnostics")) {
        for (const auto& d : rep.json["diagnostics"]) std::cerr << "semidot: " << d.get<std::string>() << "\n";
        return 2;
    }
    for (const auto& c : rep.checks)
        std::printf("%-28s %s  %.6g%s%s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL", c.value, c.detail.empty() ? "" : "  ",
                    c.detail.c_str());
    if (rep.json.contains("error")) std::cerr << "semidot: " << rep.json["error"].get<std::string>() << "\n";
    std::printf("status %s, %zu artifacts\n", rep.json.value("status", "?").c_str(), rep.manifest.size());
    return rep.exit_code;
}
