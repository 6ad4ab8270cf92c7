#include "hartree/harness.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace hartree {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
    if (trim(v.substr(pos)) != "") throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    return d;
}

long long parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 9e15) throw ConfigError("config: " + key + " must be an integer");
    return (long long)d;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("config: " + key + " must be an unsigned integer");
    try {
        return std::stoull(t);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " out of range");
    }
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    return out;
}

std::string fmt(double d) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s;
}

}  // namespace

void RunConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("config: " + msg);
    };
    need(K >= 1 && K <= 128, "K must be in [1, 128]");
    need(per_octave >= 1 && per_octave <= 64, "per_octave must be in [1, 64]");
    need(!T_list.empty(), "T_list must not be empty");
    for (double T : T_list) need(T > 0.0 && std::isfinite(T), "T values must be positive and finite");
    need(!S_list.empty(), "S_list must not be empty");
    for (double S : S_list) need(S > 0.0 && std::isfinite(S), "S values must be positive and finite");
    need(beta > 0.0 && beta < 3.0, "beta must be in (0, 3)");
    need(lambda >= 0.0 && std::isfinite(lambda), "lambda must be >= 0");
    need(delta > 0.0 && delta < 1.0, "delta must be in (0, 1)");
    need(n_power >= 1 && n_power % 2 == 1, "n_power must be a positive odd integer");
    need(gamma > 0.0 && gamma < 1.0, "gamma must be in (0, 1)");
    need(samples >= 2, "samples must be >= 2");
    need(oracle_samples >= 2, "oracle_samples must be >= 2");
    need(cap > 0.0, "cap must be positive");
    need(!out_dir.empty(), "out_dir must not be empty");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["K"] = K;
    j["per_octave"] = per_octave;
    j["T_list"] = T_list;
    j["S_list"] = S_list;
    j["beta"] = beta;
    j["lambda"] = lambda;
    j["delta"] = delta;
    j["n_power"] = n_power;
    j["gamma"] = gamma;
    j["samples"] = samples;
    j["oracle_samples"] = oracle_samples;
    j["seed"] = seed;
    j["cap"] = cap;
    j["out_dir"] = out_dir;
    j["options"] = options;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.K = j.at("K").get<int>();
        c.per_octave = j.at("per_octave").get<int>();
        c.T_list = j.at("T_list").get<std::vector<double>>();
        c.S_list = j.at("S_list").get<std::vector<double>>();
        c.beta = j.at("beta").get<double>();
        c.lambda = j.at("lambda").get<double>();
        c.delta = j.at("delta").get<double>();
        c.n_power = j.at("n_power").get<int>();
        c.gamma = j.at("gamma").get<double>();
        c.samples = j.at("samples").get<std::size_t>();
        c.oracle_samples = j.at("oracle_samples").get<std::size_t>();
        c.seed = j.at("seed").get<uint64_t>();
        c.cap = j.at("cap").get<double>();
        c.out_dir = j.at("out_dir").get<std::string>();
        c.options = j.at("options").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

void RunConfig::set(const std::string& key_in, const std::string& value_in) {
    const std::string key = trim(key_in), v = trim(value_in);
    if (key.rfind("option.", 0) == 0) {
        if (key.size() == 7) throw ConfigError("config: empty option name");
        options[key.substr(7)] = v;
    } else if (key == "K") {
        K = int(parse_int(key, v));
    } else if (key == "per_octave") {
        per_octave = int(parse_int(key, v));
    } else if (key == "T_list") {
        T_list = parse_list(key, v);
    } else if (key == "S_list") {
        S_list = parse_list(key, v);
    } else if (key == "beta") {
        beta = parse_double(key, v);
    } else if (key == "lambda") {
        lambda = parse_double(key, v);
    } else if (key == "delta") {
        delta = parse_double(key, v);
    } else if (key == "n_power") {
        n_power = int(parse_int(key, v));
    } else if (key == "gamma") {
        gamma = parse_double(key, v);
    } else if (key == "samples") {
        samples = std::size_t(parse_u64(key, v));
    } else if (key == "oracle_samples") {
        oracle_samples = std::size_t(parse_u64(key, v));
    } else if (key == "seed") {
        seed = parse_u64(key, v);
    } else if (key == "cap") {
        cap = parse_double(key, v);
    } else if (key == "out_dir") {
        out_dir = v;
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "K = " << K << "\n";
    os << "per_octave = " << per_octave << "\n";
    os << "T_list = " << fmt_list(T_list) << "\n";
    os << "S_list = " << fmt_list(S_list) << "\n";
    os << "beta = " << fmt(beta) << "\n";
    os << "lambda = " << fmt(lambda) << "\n";
    os << "delta = " << fmt(delta) << "\n";
    os << "n_power = " << n_power << "\n";
    os << "gamma = " << fmt(gamma) << "\n";
    os << "samples = " << samples << "\n";
    os << "oracle_samples = " << oracle_samples << "\n";
    os << "seed = " << seed << "\n";
    os << "cap = " << fmt(cap) << "\n";
    os << "out_dir = " << out_dir << "\n";
    for (const auto& [k, v] : options) os << "option." << k << " = " << v << "\n";
    return os.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig c;
    c.apply_text(text);
    return c;
}

void RunConfig::apply_text(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config: line " + std::to_string(lineno) + " has no '='");
        set(line.substr(0, eq), line.substr(eq + 1));
    }
}

std::string RunConfig::hash() const {
    const std::string s = to_json().dump();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

double RunConfig::option(const std::string& name, double fallback) const {
    const auto it = options.find(name);
    return it == options.end() ? fallback : parse_double("option." + name, it->second);
}

std::string RunConfig::option_string(const std::string& name, const std::string& fallback) const {
    const auto it = options.find(name);
    return it == options.end() ? fallback : it->second;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"verify",  "moments",     "constants", "partition",
                                                "density", "singularity", "probes",    "chaos"};
    return names;
}

RunConfig default_config(const std::string& command) {
    RunConfig c;
    if (command == "verify") {
        c.K = 6;
        c.T_list = {2.0};
        c.beta = 0.25;
    } else if (command == "moments") {
        c.K = 8;
        c.T_list = {2.0};
        c.beta = 0.5;
        c.samples = 5000;
    } else if (command == "constants") {
        c.K = 8;
        c.beta = 0.75;
        c.T_list = {8.0, 16.0};
        c.samples = 400;
    } else if (command == "partition") {
        c.K = 8;
        c.T_list = {4.0};
        c.samples = 2000;
    } else if (command == "density") {
        c.K = 4;
        c.T_list = {2.0, 4.0, 8.0};
        c.samples = 10000;
    } else if (command == "singularity") {
        c.beta = 0.25;
        c.delta = 0.05;
        c.S_list = {2.0, 4.0, 8.0, 16.0};
        c.samples = 100;
    } else if (command == "probes") {
        c.K = 8;
        c.beta = 0.25;
        c.T_list = {2.0, 4.0, 8.0};
        c.samples = 200;
    } else if (command == "chaos") {
        c.K = 1;
        c.samples = 10000;
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
    return c;
}

nlohmann::json EstimateReport::to_json() const {
    return {{"quantity", quantity}, {"value", value},       {"stderr", stderr_},
            {"n", n},               {"config_hash", config_hash}, {"wall_time", wall_time}};
}

EstimateReport EstimateReport::from_json(const nlohmann::json& j) {
    EstimateReport e;
    e.quantity = j.at("quantity").get<std::string>();
    e.value = j.at("value").is_null() ? std::nan("") : j.at("value").get<double>();
    e.stderr_ = j.at("stderr").is_null() ? std::nan("") : j.at("stderr").get<double>();
    e.n = j.at("n").get<std::size_t>();
    e.config_hash = j.at("config_hash").get<std::string>();
    e.wall_time = j.at("wall_time").get<double>();
    return e;
}

nlohmann::json AssertionRecord::to_json() const {
    return {{"name", name}, {"pass", pass}, {"value", value}, {"threshold", threshold}, {"detail", detail}};
}

bool Report::ok() const {
    for (const AssertionRecord& a : assertions)
        if (!a.pass) return false;
    return true;
}

nlohmann::json Report::to_json() const {
    nlohmann::json j;
    j["schema"] = 1;
    j["command"] = command;
    j["config"] = config.to_json();
    j["config_hash"] = config.hash();
    j["estimates"] = nlohmann::json::array();
    for (const EstimateReport& e : estimates) j["estimates"].push_back(e.to_json());
    j["assertions"] = nlohmann::json::array();
    for (const AssertionRecord& a : assertions) j["assertions"].push_back(a.to_json());
    j["ok"] = ok();
    return j;
}

nlohmann::json without_timing(nlohmann::json j) {
    if (j.is_object()) {
        j.erase("wall_time");
        for (auto& [k, v] : j.items()) v = without_timing(v);
    } else if (j.is_array()) {
        for (auto& v : j) v = without_timing(v);
    }
    return j;
}

}  // namespace hartree
