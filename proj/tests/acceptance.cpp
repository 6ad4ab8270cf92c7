// Acceptance run: every criterion prints one PASS/FAIL line, followed by the
// failing assertion records. The process exits nonzero if any criterion fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "hartree/harness.hpp"

using namespace hartree;

namespace {

using Clock = std::chrono::steady_clock;

struct Timed {
    Report report;
    double seconds = 0.0;
};

std::map<std::string, Timed> cache;

// Each command runs once at its defaults; criteria share the reports.
const Timed& report_of(const std::string& command) {
    auto it = cache.find(command);
    if (it != cache.end()) return it->second;
    std::cerr << "running " << command << " ..." << std::endl;
    const auto t0 = Clock::now();
    Timed t;
    t.report = run_command(command, default_config(command), 1);
    t.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    std::cerr << "  " << command << " took " << t.seconds << " s" << std::endl;
    return cache.emplace(command, std::move(t)).first->second;
}

bool has_prefix(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

struct Outcome {
    bool pass = true;
    std::string summary;
    std::vector<std::string> failures;
};

// All assertions of `command` whose names start with one of the prefixes.
Outcome select(const std::string& command, const std::vector<std::string>& prefixes) {
    Outcome o;
    int n = 0, passed = 0;
    for (const AssertionRecord& a : report_of(command).report.assertions) {
        bool match = false;
        for (const std::string& p : prefixes) match = match || has_prefix(a.name, p);
        if (!match) continue;
        ++n;
        if (a.pass) {
            ++passed;
        } else {
            o.pass = false;
            o.failures.push_back(a.to_json().dump());
        }
    }
    if (n == 0) {
        o.pass = false;
        o.failures.push_back("no assertions matched in " + command);
    }
    o.summary = std::to_string(passed) + "/" + std::to_string(n) + " assertions of " + command;
    return o;
}

Outcome merge(std::vector<Outcome> parts) {
    Outcome o;
    for (Outcome& p : parts) {
        o.pass = o.pass && p.pass;
        o.summary += (o.summary.empty() ? "" : "; ") + p.summary;
        o.failures.insert(o.failures.end(), p.failures.begin(), p.failures.end());
    }
    return o;
}

Outcome within_time(const std::string& command, double limit) {
    Outcome o;
    const double s = report_of(command).seconds;
    o.pass = s < limit;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %.1f s (limit %.0f s)", command.c_str(), s, limit);
    o.summary = buf;
    if (!o.pass) o.failures.push_back(buf);
    return o;
}

// Same config at 1 and 3 workers gives the same JSON once timings are removed.
// The serialized text is compared: NaN values compare unequal as json values
// but both serialize to null.
Outcome reproducible(const std::string& command, RunConfig cfg) {
    Outcome o;
    const std::string a = without_timing(run_command(command, cfg, 1).to_json()).dump();
    const std::string b = without_timing(run_command(command, cfg, 3).to_json()).dump();
    o.pass = a == b;
    o.summary = command + " JSON at 1 vs 3 workers " + (o.pass ? "identical" : "differs");
    if (!o.pass) o.failures.push_back(o.summary);
    return o;
}

Outcome cli_verify(const std::string& cli) {
    Outcome o;
    if (cli.empty()) {
        o.pass = false;
        o.failures.push_back("no CLI path given");
        o.summary = "CLI not run";
        return o;
    }
    const std::string out = (std::filesystem::temp_directory_path() / "hartree_acceptance_verify").string();
    const std::string cmd = "\"" + cli + "\" verify --out \"" + out + "\" > /dev/null";
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool exit0 = rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
    o.pass = exit0 && s < 60.0 && std::filesystem::exists(std::filesystem::path(out) / "report.json");
    char buf[128];
    std::snprintf(buf, sizeof buf, "CLI verify exit %d in %.1f s (limit 60 s)", WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, s);
    o.summary = buf;
    if (!o.pass) o.failures.push_back(buf);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    struct Criterion {
        int id;
        std::string title;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "identity suite, rel. error <= 1e-7 on 20 instances at K=6, < 2 min",
         [] { return merge({select("verify", {""}), within_time("verify", 120.0)}); }},
        {2, "covariance oracles within 5 stderr (5e3 samples, K=8), brute force to 1e-10, < 10 min",
         [] {
             return merge({select("moments", {"W_variance", "wick_square_variance", "cubic_variance", "w3_variance",
                                               "oracle_bruteforce"}),
                           within_time("moments", 600.0)});
         }},
        {3, "zero means within 4 sigma, direct vs martingale refinement order >= 0.4",
         [] { return select("moments", {"zero_mean", "quartic_refinement_order"}); }},
        {4, "product formula order >= 0.8 (k+l <= 4), hypercontractivity <= 1.05 (p-1)^{k/2}, orthogonality 4 sigma",
         [] { return select("chaos", {""}); }},
        {5, "Girsanov mean 1 within 4 sigma, Z from both sides within 4 sigma (K=8, T=4, beta=1, lambda=1)",
         [] { return select("partition", {"girsanov_exactness", "partition_consistency"}); }},
        {6, "reference measure: cubic component moments within 5 stderr, dyadic slope +-0.25, no tau_hit at cap 1e6",
         [] { return select("density", {"g3_second_moment", "g3_dyadic_slope", "tau_hit_frequency"}); }},
        {7, "E_Q[D_T^1.25] finite and flat within 30% over T in {2,4,8} (1e4 samples)",
         [] { return select("density", {"density_Lq"}); }},
        {8, "c at beta=0.75: |c(16)-c(8)| <= 5 stderr, term-2 exact vs MC within 5 stderr",
         [] { return select("constants", {"c_term2_cross_check", "c_stable"}); }},
        {9, "operator norm flat within 20% over T in {2,4,8} (beta=0.25, 200 samples), converged to 1e-6",
         [] { return select("probes", {"operator_norm"}); }},
        {10, "singularity scan: GFF slope and oracle, Gibbs means, witness slope 1-2beta +-0.2",
         [] { return select("singularity", {"gff_", "gibbs_", "witness_slope"}); }},
        {11, "inequality probes show no unbounded ratio trend", [] { return select("probes", {"probe_bounded"}); }},
        {12, "Laplace probe |E_8 - E_16| <= 5 stderr at beta=1", [] { return select("density", {"laplace_cauchy"}); }},
        {13, "identical JSON across worker counts, CLI verify exits 0 in < 60 s",
         [&cli] {
             RunConfig m = default_config("moments");
             m.samples = 200;
             m.options["w3_samples"] = "50";
             m.options["refine_samples"] = "20";
             RunConfig s = default_config("singularity");
             s.S_list = {0.5, 1.0, 2.0};
             s.samples = 20;
             s.oracle_samples = 2000;
             s.options["gibbs_max_band"] = "4";
             s.options["main_samples"] = "500";
             return merge({reproducible("verify", default_config("verify")), reproducible("moments", m),
                           reproducible("singularity", s), cli_verify(cli)});
         }},
    };

    int failed = 0;
    std::vector<std::string> lines;
    for (const Criterion& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.summary = "aborted";
            o.failures.push_back(e.what());
        }
        failed += o.pass ? 0 : 1;
        char head[32];
        std::snprintf(head, sizeof head, "%s %2d ", o.pass ? "PASS" : "FAIL", c.id);
        std::string line = std::string(head) + c.title + " [" + o.summary + "]";
        std::cout << line << std::endl;
        for (const std::string& f : o.failures) std::cout << "        " << f << std::endl;
        lines.push_back(line);
    }
    std::cout << "\nsummary\n";
    for (const std::string& l : lines) std::cout << l.substr(0, 7) << " " << l.substr(8, 60) << "\n";
    std::cout << (criteria.size() - std::size_t(failed)) << " of " << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
