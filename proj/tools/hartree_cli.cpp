#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hartree/harness.hpp"
#include "hartree/parallel.hpp"

using namespace hartree;

namespace {

const char* describe(const std::string& command) {
    if (command == "verify") return "deterministic identity suites";
    if (command == "moments") return "Monte Carlo moments against exact oracles";
    if (command == "constants") return "renormalization constant c over T";
    if (command == "partition") return "Girsanov exactness, partition function, drift scale";
    if (command == "density") return "density moments, reference measure, Laplace probe";
    if (command == "singularity") return "GFF and Gibbs scans of the quartic statistic";
    if (command == "probes") return "inequality probes and the random operator norm";
    if (command == "chaos") return "product formula, hypercontractivity, orthogonality";
    return "";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Text configs are applied on top of the command defaults. A JSON file is
// either a config or a report whose embedded config is reused as is.
RunConfig load_config(const std::string& command, const std::string& path) {
    RunConfig cfg = default_config(command);
    if (path.empty()) return cfg;
    const std::string text = read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        return RunConfig::from_json(j.contains("config") ? j.at("config") : j);
    }
    cfg.apply_text(text);
    return cfg;
}

std::string format_record(const AssertionRecord& a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "value %.6g threshold %.6g", a.value, a.threshold);
    std::string s = std::string(a.pass ? "PASS " : "FAIL ") + a.name + ": " + buf;
    if (!a.detail.empty()) s += " (" + a.detail + ")";
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo experiments for the Hartree Gibbs measure on the 3-torus"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir;
    uint64_t seed = 0;
    int workers = 1;
    std::vector<std::string> sets;
    bool print_config = false;
    app.add_option("--config", config_path, "config file (key = value lines, or JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory for report.json and CSV series");
    app.add_option("--set", sets, "override a config key, e.g. --set samples=500 or --set option.g3_K=6");
    app.add_flag("--print-config", print_config, "print the resolved config and exit");
    for (const std::string& name : command_names()) app.add_subcommand(name, describe(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        cfg = load_config(command, config_path);
        if (*seed_opt) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        for (const std::string& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            cfg.set(s.substr(0, eq), s.substr(eq + 1));
        }
        cfg.validate();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (print_config) {
        std::cout << cfg.to_text();
        return 0;
    }

    Report report;
    try {
        report = run_command(command, cfg, workers);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "run aborted: " << e.what() << "\n";
        return 3;
    }

    namespace fs = std::filesystem;
    const fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream(dir / "report.json") << report.to_json().dump(2) << "\n";
    for (const auto& [name, contents] : report.csv) std::ofstream(dir / name) << contents;

    for (const AssertionRecord& a : report.assertions) std::cout << format_record(a) << "\n";
    std::cout << (report.ok() ? "ok" : "FAILED") << ": " << command << ", config " << cfg.hash() << ", report "
              << (dir / "report.json").string() << "\n";
    if (!report.ok()) {
        for (const AssertionRecord& a : report.assertions)
            if (!a.pass) std::cerr << "failing assertion: " << a.to_json().dump() << "\n";
        return 1;
    }
    return 0;
}
