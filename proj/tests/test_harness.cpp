#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "hartree/harness.hpp"
#include "hartree/parallel.hpp"

using namespace hartree;

namespace {

RunConfig awkward_config() {
    RunConfig c;
    c.K = 5;
    c.T_list = {0.1 + 0.2, M_PI, 1e-7};
    c.S_list = {std::sqrt(2.0), 1.0 / 3.0};
    c.beta = 0.7000000000000001;
    c.lambda = 1e-300;
    c.delta = 0.05;
    c.gamma = 2.0 / 3.0;
    c.seed = 18446744073709551615ull;
    c.cap = 123456.789;
    c.out_dir = "runs/x";
    c.options["g3_K"] = "6";
    c.options["label"] = "a b";
    return c;
}

}  // namespace

TEST_CASE("config round trips") {
    const RunConfig c = awkward_config();
    const RunConfig t = RunConfig::from_text(c.to_text());
    CHECK(t.to_json() == c.to_json());
    CHECK(t.T_list[0] == c.T_list[0]);
    CHECK(t.S_list[1] == c.S_list[1]);
    CHECK(t.lambda == c.lambda);
    CHECK(t.seed == c.seed);
    CHECK(t.hash() == c.hash());
    const RunConfig j = RunConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
    CHECK(j.to_json() == c.to_json());
    CHECK(j.beta == c.beta);
    CHECK(j.hash() == c.hash());

    // Comments, blank lines and overlays on the defaults.
    RunConfig d = default_config("singularity");
    d.apply_text("# scan\n\nsamples = 7\noption.gibbs_max_band = 12  # cap\n");
    CHECK(d.samples == 7);
    CHECK(d.beta == 0.25);
    CHECK(d.option("gibbs_max_band", 0.0) == 12.0);
    CHECK(d.option("missing", 3.5) == 3.5);
    CHECK(d.option_string("missing", "x") == "x");
}

TEST_CASE("config hash") {
    const RunConfig c = awkward_config();
    CHECK(c.hash().size() == 16);
    CHECK(c.hash().find_first_not_of("0123456789abcdef") == std::string::npos);
    RunConfig d = c;
    d.seed = 1;
    CHECK(d.hash() != c.hash());
    d = c;
    d.options["label"] = "a c";
    CHECK(d.hash() != c.hash());
}

TEST_CASE("config validation") {
    CHECK_NOTHROW(RunConfig().validate());
    for (const std::string& name : command_names()) CHECK_NOTHROW(default_config(name).validate());
    CHECK_THROWS_AS(default_config("nope"), ConfigError);
    auto bad = [](const std::string& key, const std::string& value) {
        RunConfig c;
        c.set(key, value);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    bad("beta", "0");
    bad("beta", "3");
    bad("lambda", "-0.1");
    bad("n_power", "4");
    bad("gamma", "1");
    bad("gamma", "0");
    bad("K", "0");
    bad("T_list", "2, -1");
    bad("samples", "1");
    RunConfig c;
    CHECK_THROWS_AS(c.set("bogus", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("beta", "0.5x"), ConfigError);
    CHECK_THROWS_AS(c.set("K", "2.5"), ConfigError);
    CHECK_THROWS_AS(c.set("seed", "-3"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("beta 0.5\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"K", 2}}), ConfigError);
    c.set("option.x", "abc");
    CHECK_THROWS_AS(c.option("x", 1.0), ConfigError);
}

TEST_CASE("report serialization") {
    Report r;
    r.command = "verify";
    r.config = awkward_config();
    EstimateReport e;
    e.quantity = "q";
    e.value = 1.25;
    e.stderr_ = 0.5;
    e.n = 10;
    e.config_hash = r.config.hash();
    e.wall_time = 3.0;
    r.estimates.push_back(e);
    r.assertions.push_back({"a", true, 1.0, 2.0, ""});
    nlohmann::json j = r.to_json();
    CHECK(j["schema"] == 1);
    CHECK(j["config_hash"] == r.config.hash());
    CHECK(j["ok"] == true);
    const EstimateReport back = EstimateReport::from_json(j["estimates"][0]);
    CHECK(back.value == e.value);
    CHECK(back.config_hash == e.config_hash);
    const nlohmann::json s = without_timing(j);
    CHECK_FALSE(s["estimates"][0].contains("wall_time"));
    CHECK(s["estimates"][0]["value"] == 1.25);
    r.assertions.push_back({"b", false, 3.0, 2.0, "too big"});
    CHECK_FALSE(r.ok());
}

TEST_CASE("parallel map reduce") {
    const std::size_t n = 10000;
    auto value = [](std::size_t i) { return 1.0 / double(i + 1) + 1e-3 * std::sin(double(i)); };
    double serial = 0.0;
    for (std::size_t i = 0; i < n; ++i) serial += value(i);
    for (int w : {1, 2, 4}) {
        const double s = parallel_map_reduce(n, w, value, 0.0, [](double& a, double v) { a += v; });
        CHECK(s == serial);
    }
    CHECK(parallel_map_reduce(0, 4, value, 7.5, [](double& a, double v) { a += v; }) == 7.5);
    CHECK(parallel_samples(50, 1, value) == parallel_samples(50, 4, value));
    Moments m1, m4;
    m1 = parallel_map_reduce(500, 1, value, Moments{}, [](Moments& a, double v) { a.add(v); });
    m4 = parallel_map_reduce(500, 4, value, Moments{}, [](Moments& a, double v) { a.add(v); });
    CHECK(m1.mean == m4.mean);
    CHECK(m1.m2 == m4.m2);
    try {
        parallel_map_reduce(
            100, 3,
            [](std::size_t i) {
                if (i == 37) throw std::runtime_error("boom");
                return 1.0;
            },
            0.0, [](double& a, double v) { a += v; });
        FAIL("expected a task error");
    } catch (const TaskError& e) {
        CHECK(e.task() == 37);
        CHECK(std::string(e.what()).find("boom") != std::string::npos);
    }
}

TEST_CASE("run_command") {
    CHECK_THROWS_AS(run_command("nope", RunConfig(), 1), ConfigError);
    RunConfig bad = default_config("verify");
    bad.beta = -1.0;
    CHECK_THROWS_AS(run_command("verify", bad, 1), ConfigError);
    CHECK_THROWS_AS(run_command("verify", default_config("verify"), 0), ConfigError);

    RunConfig v = default_config("verify");
    v.K = 3;
    v.options["instances"] = "3";
    const Report r1 = run_command("verify", v, 1), r3 = run_command("verify", v, 3);
    CHECK(r1.ok());
    CHECK(r1.assertions.size() == 5);
    CHECK(without_timing(r1.to_json()) == without_timing(r3.to_json()));
    for (const EstimateReport& e : r1.estimates) CHECK(e.config_hash == v.hash());

    // Monte Carlo reports do not depend on the worker count either.
    RunConfig m = default_config("moments");
    m.K = 2;
    m.samples = 40;
    m.options["w3_samples"] = "20";
    m.options["refine_samples"] = "8";
    const Report a = run_command("moments", m, 1), b = run_command("moments", m, 4);
    CHECK(without_timing(a.to_json()) == without_timing(b.to_json()));
    CHECK(a.estimates.size() > 10);
}
