#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace hartree {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Run configuration. Worker count is an execution setting and is not part of
// the configuration, so it does not enter the hash.
struct RunConfig {
    int K = 6;
    int per_octave = 2;
    std::vector<double> T_list{2.0, 4.0, 8.0};
    std::vector<double> S_list{2.0, 4.0, 8.0, 16.0};
    double beta = 1.0;
    double lambda = 1.0;
    double delta = 0.05;
    int n_power = 5;
    double gamma = 0.8;
    std::size_t samples = 1000;
    std::size_t oracle_samples = 200000;
    uint64_t seed = 1;
    double cap = 1e6;
    std::string out_dir = "out";
    std::map<std::string, std::string> options;  // command-specific settings

    // Throws ConfigError on out-of-range values.
    void validate() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    // "key = value" lines; lists are comma separated, command options use
    // "option.<name> = value". Blank lines and '#' comments are skipped.
    std::string to_text() const;
    static RunConfig from_text(const std::string& text);
    // Apply the settings of a text config on top of this one.
    void apply_text(const std::string& text);
    // Apply one "key = value" setting (same keys as the text format).
    void set(const std::string& key, const std::string& value);

    // FNV-1a of the canonical JSON form, as 16 hex digits.
    std::string hash() const;

    double option(const std::string& name, double fallback) const;
    std::string option_string(const std::string& name, const std::string& fallback) const;
};

// Defaults of each command (e.g. beta = 0.25 for singularity).
RunConfig default_config(const std::string& command);
const std::vector<std::string>& command_names();

struct EstimateReport {
    std::string quantity;
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
    std::string config_hash;
    double wall_time = 0.0;  // seconds

    nlohmann::json to_json() const;
    static EstimateReport from_json(const nlohmann::json& j);
};

struct AssertionRecord {
    std::string name;
    bool pass = false;
    double value = 0.0;      // the tested quantity
    double threshold = 0.0;  // the bound it was tested against
    std::string detail;

    nlohmann::json to_json() const;
};

struct Report {
    std::string command;
    RunConfig config;
    std::vector<EstimateReport> estimates;
    std::vector<AssertionRecord> assertions;
    std::map<std::string, std::string> csv;  // file name -> contents

    bool ok() const;
    // {"schema": 1, "command", "config", "config_hash", "estimates", "assertions"}
    nlohmann::json to_json() const;
};

// The report JSON with every "wall_time" removed, for reproducibility checks.
nlohmann::json without_timing(nlohmann::json j);

// Runs one command. Throws ConfigError for an invalid configuration or an
// unknown command.
Report run_command(const std::string& command, const RunConfig& config, int workers);

}  // namespace hartree
