// cylres: command-line front end; see `cylres --help`.
#include "cylres/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Continued resolvents, Fredholm determinants and spectral densities on the cylinder"};
    std::string command, config_path, out_dir = "cylres_out";
    int workers = cylres::default_workers();
    double tolerance_scale = 1.0;
    std::string names;
    for (const auto& n : cylres::command_names()) names += (names.empty() ? "" : ", ") + n;
    app.add_option("command", command, "One of: " + names)->required();
    app.add_option("--config", config_path, "JSON run configuration (defaults when omitted)");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--workers", workers, "Worker threads for scans");
    app.add_option("--tolerance-scale", tolerance_scale, "Multiplier applied to selfcheck thresholds");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << cylres::error_record("ConfigError", e.what()).dump() << '\n';
        return 2;
    }

    nlohmann::json config = nlohmann::json::object();
    std::filesystem::path base = ".";
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << cylres::error_record("ConfigError", "cannot read " + config_path).dump() << '\n';
            return 2;
        }
        try {
            config = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            std::cerr << cylres::error_record("ConfigError", config_path + ": " + e.what()).dump() << '\n';
            return 2;
        }
        base = std::filesystem::path(config_path).parent_path();
        if (base.empty()) base = ".";
    }
    return cylres::run_command(command, config, out_dir, workers, tolerance_scale, base);
}
