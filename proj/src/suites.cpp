#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "hartree/chaos.hpp"
#include "hartree/harness.hpp"
#include "hartree/parallel.hpp"
#include "hartree/rng.hpp"
#include "hartree/singularity.hpp"
#include "hartree/variational.hpp"

namespace hartree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using Clock = std::chrono::steady_clock;
using Mode = std::array<int, 3>;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string mode_name(const Mode& n) {
    std::ostringstream os;
    os << "(" << n[0] << "," << n[1] << "," << n[2] << ")";
    return os.str();
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

// Collects estimates and assertions for one command.
class SuiteRun {
public:
    SuiteRun(const std::string& command, const RunConfig& cfg) : hash_(cfg.hash()) {
        report.command = command;
        report.config = cfg;
        start_ = Clock::now();
    }
    // Starts the clock for the next estimate.
    void tic() { start_ = Clock::now(); }
    void estimate(const std::string& quantity, double value, double stderr_, std::size_t n) {
        EstimateReport e;
        e.quantity = quantity;
        e.value = value;
        e.stderr_ = std::max(0.0, stderr_);
        e.n = n;
        e.config_hash = hash_;
        e.wall_time = seconds_since(start_);
        report.estimates.push_back(e);
    }
    // Records "value <= threshold" (NaN fails).
    void check_le(const std::string& name, double value, double threshold, const std::string& detail = "") {
        check(name, value <= threshold, value, threshold, detail);
    }
    void check(const std::string& name, bool pass, double value, double threshold, const std::string& detail = "") {
        AssertionRecord a;
        a.name = name;
        a.pass = pass;
        a.value = value;
        a.threshold = threshold;
        a.detail = detail;
        report.assertions.push_back(a);
    }
    Report report;

private:
    std::string hash_;
    Clock::time_point start_;
};

// Hermitian field with coefficients of size <n>^{-decay} on the whole band.
SpectralField random_field(int band, uint64_t seed, uint64_t task, double decay) {
    CounterRng rng(seed, task, 91);
    SpectralField f(band);
    f.for_each_mode([&](int x, int y, int z, std::size_t i) {
        f.data()[i] = std::pow(1.0 + x * x + y * y + z * z, -0.5 * decay) * rng.complex_normal();
    });
    f.symmetrize();
    return f;
}

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]) / double(n);
        my += std::log(y[i]) / double(n);
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    }
    return sxy / sxx;
}

// Per-sample observation vectors folded into one Moments per coordinate.
std::vector<Moments> gather_moments(std::size_t samples, std::size_t width, int workers,
                                    const std::function<std::vector<double>(std::size_t)>& map) {
    return parallel_map_reduce(
        samples, workers, map, std::vector<Moments>(width), [](std::vector<Moments>& acc, const std::vector<double>& v) {
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j].add(v[j]);
        });
}

// |mean - target| <= k stderr.
void check_sigma(SuiteRun& run, const std::string& name, const Moments& m, double target, double k) {
    const double se = m.stderr_mean();
    const double z = se > 0.0 ? std::abs(m.mean - target) / se : (m.mean == target ? 0.0 : kInf);
    run.check_le(name, z, k, "mean " + num(m.mean) + " target " + num(target) + " stderr " + num(se));
}

DriftOptions drift_options(const RunConfig& cfg, bool hermite) {
    DriftOptions o;
    o.lambda = cfg.lambda;
    o.n_power = cfg.n_power;
    o.hermite_term = hermite;
    o.cap = cfg.cap;
    return o;
}

// ---------------------------------------------------------------------------
// verify: deterministic identities on random instances.

void run_verify(SuiteRun& run, const RunConfig& cfg, int workers) {
    const int K = cfg.K;
    const std::size_t trials = std::size_t(cfg.option("instances", 20));
    const double tol = cfg.option("tolerance", 1e-7);
    const Potential V = Potential::fourier(cfg.beta);
    auto worst = [&](const std::function<double(std::size_t)>& err) {
        return parallel_map_reduce(trials, workers, err, 0.0, [](double& a, double v) { a = std::max(a, v); });
    };

    run.tic();
    const RenormContext ctx = build_context(2.0, 4.0, V, cfg.lambda, cfg.n_power, LatticeSpec(K));
    const double cubic = worst([&](std::size_t i) {
        const SpectralField W = random_field(K, cfg.seed, 2 * i, 1.0), f = random_field(K, cfg.seed, 2 * i + 1, 1.5);
        const SpectralField lhs = wick_cubic(W + f, ctx);
        return (lhs - binomial_expand_cubic(W, f, ctx)).l2_norm() / lhs.l2_norm();
    });
    run.estimate("binomial_cubic_max_rel_error", cubic, 0.0, trials);
    run.check_le("binomial_cubic", cubic, tol);

    run.tic();
    const double quartic = worst([&](std::size_t i) {
        const SpectralField W = random_field(K, cfg.seed, 2 * i, 1.0), f = random_field(K, cfg.seed, 2 * i + 1, 1.5);
        return rel_diff(wick_quartic_energy(W + f, ctx), binomial_expand_quartic(W, f, ctx));
    });
    run.estimate("binomial_quartic_max_rel_error", quartic, 0.0, trials);
    run.check_le("binomial_quartic", quartic, tol);

    // H_n(a + b) = sum_k C(n, k) H_k(a) b^{n-k}, compared on the band K.
    run.tic();
    const int n = cfg.n_power;
    const double sigma_sq = ctx.hermite_var;
    const double hermite = worst([&](std::size_t i) {
        const SpectralField a = random_field(K, cfg.seed + 1, 2 * i, 2.0), b = random_field(K, cfg.seed + 1, 2 * i + 1, 2.0);
        const SpectralField lhs = hermite_power(a + b, n, sigma_sq, K);
        SpectralField rhs(K);
        double binom = 1.0;
        for (int k = 0; k <= n; ++k) {
            if (k > 0) binom = binom * (n - k + 1) / k;
            const SpectralField bp = hermite_power(b, n - k, 0.0);
            rhs.add_scaled(multiply(hermite_power(a, k, sigma_sq), bp, K), binom);
        }
        return (lhs - rhs).l2_norm() / lhs.l2_norm();
    });
    run.estimate("hermite_binomial_max_rel_error", hermite, 0.0, trials);
    run.check_le("hermite_binomial", hermite, tol);

    // The decomposed multiplier as (V c[N1, N2]) * f in physical space.
    run.tic();
    const Potential Vp = make_potential(cfg.beta, 1.0, K, PotentialMode::Physical);
    const RenormContext pctx = build_context(kInf, 2.0, Vp, cfg.lambda, cfg.n_power, LatticeSpec(K));
    const int grid = fft_size_at_least(4 * K + 1);
    const PhysicalField vphys = Vp.band_limited_physical(2 * K, grid);
    const std::vector<std::pair<double, double>> blocks{{1, 1}, {1, 2}, {2, 4}, {4, 4}};
    std::vector<std::vector<double>> msym;
    std::vector<SpectralField> psym;
    for (const auto& [N1, N2] : blocks) {
        PhysicalField cv = correlation_grid(pctx, N1, N2, grid);
        for (std::size_t j = 0; j < cv.data().size(); ++j) cv[j] *= vphys[j];
        psym.push_back(to_spectral(cv, K));
        msym.push_back(m_symbol_decomposed(pctx, N1, N2));
    }
    const double mphys = worst([&](std::size_t i) {
        const SpectralField f = random_field(K, cfg.seed + 2, i, 0.0);
        const std::size_t b = i % blocks.size();
        const SpectralField lhs = apply_symbol(f, msym[b], K);
        SpectralField rhs(K);
        for (std::size_t j = 0; j < rhs.size(); ++j) rhs.data()[j] = psym[b].data()[j] * f.data()[j];
        return (lhs - rhs).l2_norm() / lhs.l2_norm();
    });
    run.estimate("multiplier_physical_max_rel_error", mphys, 0.0, trials);
    run.check_le("multiplier_physical_identity", mphys, tol);

    // Drift-side decomposition of the quartic statistic on reference paths.
    run.tic();
    const double T = cfg.T_list.front(), S = cfg.option("decomposition_S", 1.0);
    const TimeGrid tg = TimeGrid::covering(T, cfg.per_octave, K);
    const DriftModel model(tg, T, V, K, drift_options(cfg, true));
    const double decomp = worst([&](std::size_t i) {
        const QuarticDecomposition q =
            decompose_quartic_statistic(model, BrownianDriver::sample(tg, LatticeSpec(K), cfg.seed, i), S);
        return rel_diff(q.total(), q.martingale_form);
    });
    run.estimate("decomposition_max_rel_error", decomp, 0.0, trials);
    run.check_le("singularity_decomposition", decomp, tol);
}

// ---------------------------------------------------------------------------
// moments: MC against exact covariance sums.

std::vector<Mode> moment_modes(int K) {
    std::vector<Mode> m{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {2, 1, 0}, {0, 0, 3}};
    if (K >= 5) m.push_back({K / 2, 1, -1});
    std::vector<Mode> out;
    for (const Mode& n : m)
        if (std::max({std::abs(n[0]), std::abs(n[1]), std::abs(n[2])}) <= K) out.push_back(n);
    return out;
}

// 2 (h * h)(n) by the direct lattice sum.
double wick_square_variance(const RenormContext& ctx, const Mode& n) {
    const int K = ctx.band;
    const SpectralField layout(K);
    double s = 0.0;
    layout.for_each_mode([&](int x, int y, int z, std::size_t i) {
        const int a = n[0] - x, b = n[1] - y, c = n[2] - z;
        if (layout.contains(a, b, c)) s += ctx.h[i] * ctx.h[layout.index(a, b, c)];
    });
    return 2.0 * s;
}

void run_moments(SuiteRun& run, const RunConfig& cfg, int workers) {
    const int K = cfg.K;
    const double T = cfg.T_list.front();
    const Potential V = Potential::fourier(cfg.beta);
    const std::size_t N = cfg.samples;
    const RenormContext ctx = build_context(kInf, T, V, cfg.lambda, cfg.n_power, K);
    const std::vector<Mode> modes = moment_modes(K);
    const std::size_t nm = modes.size();

    // Layout per sample: |W|^2, Re :W^2:, |:W^2:|^2, Re cubic, |cubic|^2 per
    // mode, then the quartic energy.
    run.tic();
    const std::vector<Moments> mom = gather_moments(N, 5 * nm + 1, workers, [&](std::size_t i) {
        const SpectralField W = sample_gff(K, T, cfg.seed, i);
        const SpectralField w2 = wick_square(W, ctx), c = wick_cubic(W, ctx);
        std::vector<double> v;
        v.reserve(5 * nm + 1);
        for (const Mode& n : modes) {
            v.push_back(std::norm(W(n[0], n[1], n[2])));
            v.push_back(w2(n[0], n[1], n[2]).real());
            v.push_back(std::norm(w2(n[0], n[1], n[2])));
            v.push_back(c(n[0], n[1], n[2]).real());
            v.push_back(std::norm(c(n[0], n[1], n[2])));
        }
        v.push_back(wick_quartic_energy(W, ctx));
        return v;
    });
    const CubicVarianceOracle oracle(ctx);
    for (std::size_t j = 0; j < nm; ++j) {
        const Mode& n = modes[j];
        const std::string m = mode_name(n);
        const double ow = covariance_oracle(n[0], n[1], n[2], kInf, T), o2 = wick_square_variance(ctx, n),
                     o3 = oracle(n[0], n[1], n[2]);
        run.estimate("W_variance" + m, mom[5 * j].mean, mom[5 * j].stderr_mean(), N);
        check_sigma(run, "W_variance" + m, mom[5 * j], ow, 5.0);
        run.estimate("wick_square_mean" + m, mom[5 * j + 1].mean, mom[5 * j + 1].stderr_mean(), N);
        check_sigma(run, "zero_mean_wick_square" + m, mom[5 * j + 1], 0.0, 4.0);
        run.estimate("wick_square_variance" + m, mom[5 * j + 2].mean, mom[5 * j + 2].stderr_mean(), N);
        check_sigma(run, "wick_square_variance" + m, mom[5 * j + 2], o2, 5.0);
        run.estimate("cubic_mean" + m, mom[5 * j + 3].mean, mom[5 * j + 3].stderr_mean(), N);
        check_sigma(run, "zero_mean_cubic" + m, mom[5 * j + 3], 0.0, 4.0);
        run.estimate("cubic_variance" + m, mom[5 * j + 4].mean, mom[5 * j + 4].stderr_mean(), N);
        check_sigma(run, "cubic_variance" + m, mom[5 * j + 4], o3, 5.0);
    }
    run.estimate("quartic_energy_mean", mom.back().mean, mom.back().stderr_mean(), N);
    check_sigma(run, "zero_mean_quartic_energy", mom.back(), 0.0, 4.0);

    // W^[3] at the end of the grid against the martingale covariance sum.
    run.tic();
    const std::size_t N3 = std::size_t(cfg.option("w3_samples", double(N)));
    const TimeGrid grid = TimeGrid::covering(T, cfg.per_octave, K);
    const auto ladder = context_ladder(grid, T, V, cfg.lambda, cfg.n_power, K);
    std::vector<CubicVarianceOracle> oracles;
    for (const RenormContext& c : ladder) oracles.emplace_back(c);
    const SlotAmplitudes amps(grid, K, T);
    const std::vector<Mode> w3_modes{{1, 0, 0}, {1, 1, 0}, {2, 1, 0}};
    const int M = grid.intervals();
    const std::vector<Moments> w3m = gather_moments(N3, w3_modes.size(), workers, [&](std::size_t i) {
        const GaussianPath path(BrownianDriver::sample(grid, LatticeSpec(K), cfg.seed + 1, i), T);
        const SpectralField w3 = w3_bold(path, ladder)[std::size_t(M)];
        std::vector<double> v;
        for (const Mode& n : w3_modes) v.push_back(std::norm(w3(n[0], n[1], n[2])));
        return v;
    });
    for (std::size_t j = 0; j < w3_modes.size(); ++j) {
        const Mode& n = w3_modes[j];
        run.estimate("w3_variance" + mode_name(n), w3m[j].mean, w3m[j].stderr_mean(), N3);
        check_sigma(run, "w3_variance" + mode_name(n), w3m[j], w3_variance_oracle(n[0], n[1], n[2], amps, oracles), 5.0);
    }

    // Convolution oracles against brute force on a small band.
    run.tic();
    const int Kb = std::min(K, 4);
    const RenormContext small = build_context(0.7, T, V, cfg.lambda, cfg.n_power, Kb);
    const CubicVarianceOracle small_oracle(small);
    double worst = 0.0;
    for (const Mode& n : std::vector<Mode>{{0, 0, 0}, {1, 0, 0}, {2, -1, 1}, {-3, 2, 1}})
        worst = std::max(worst, rel_diff(small_oracle(n[0], n[1], n[2]), cubic_variance_bruteforce(n[0], n[1], n[2], small)));
    SpectralField hf(Kb);
    for (std::size_t j = 0; j < hf.size(); ++j) hf.data()[j] = small.h[j];
    const SpectralField hh = multiply(hf, hf, Kb);
    for (const Mode& n : std::vector<Mode>{{0, 0, 0}, {1, 2, 0}, {Kb, 0, -1}})
        worst = std::max(worst, rel_diff(2.0 * hh(n[0], n[1], n[2]).real(), wick_square_variance(small, n)));
    run.estimate("oracle_bruteforce_max_rel_error", worst, 0.0, 7);
    run.check_le("oracle_bruteforce", worst, 1e-10);

    // Direct against martingale quartic energy under halving of the step.
    run.tic();
    const int Kr = int(cfg.option("refine_K", 2));
    const std::size_t Nr = std::size_t(cfg.option("refine_samples", 200));
    const TimeGrid fine = TimeGrid::covering(T, int(cfg.option("refine_per_octave", 16)), Kr);
    std::vector<std::vector<RenormContext>> ladders;
    const std::vector<int> factors{4, 2, 1};
    for (int f : factors) ladders.push_back(context_ladder(fine.coarsened(f), T, V, cfg.lambda, cfg.n_power, Kr));
    const std::vector<Moments> disc = gather_moments(Nr, 3, workers, [&](std::size_t i) {
        const BrownianDriver d = BrownianDriver::sample(fine, LatticeSpec(Kr), cfg.seed + 2, i);
        std::vector<double> v;
        for (std::size_t j = 0; j < factors.size(); ++j) {
            const GaussianPath path(factors[j] == 1 ? d : d.coarsened(factors[j]), T);
            const int Mj = path.grid().intervals();
            const double diff = quartic_energy_pathwise(path, Mj, ladders[j], QuarticMethod::Direct) -
                                quartic_energy_pathwise(path, Mj, ladders[j], QuarticMethod::Martingale);
            v.push_back(diff * diff);
        }
        return v;
    });
    const double order = std::log2(disc[0].mean / disc[2].mean) / 4.0;
    run.estimate("quartic_refinement_order", order, 0.0, Nr);
    run.check("quartic_refinement_order", order >= 0.4 && disc[1].mean < disc[0].mean && disc[2].mean < disc[1].mean,
              order, 0.4,
              "mean square " + num(disc[0].mean) + ", " + num(disc[1].mean) + ", " + num(disc[2].mean));
}

// ---------------------------------------------------------------------------
// constants: c^{T,lambda}.

void run_constants(SuiteRun& run, const RunConfig& cfg, int workers) {
    const Potential V = Potential::fourier(cfg.beta);
    std::vector<CEstimate> cs;
    for (double T : cfg.T_list) {
        run.tic();
        const DriftModel model(TimeGrid::covering(T, cfg.per_octave, cfg.K), T, V, cfg.K,
                               drift_options(cfg, cfg.option("hermite_term", 0.0) != 0.0));
        const CEstimate c = estimate_c(model, cfg.samples, cfg.seed, workers);
        cs.push_back(c);
        const std::string t = "(T=" + num(T) + ")";
        run.estimate("c" + t, c.value, c.stderr_, c.n);
        run.estimate("c_term2_exact" + t, c.term2_exact, 0.0, 0);
        run.estimate("c_term2_mc" + t, c.term2_mc, c.term2_mc_stderr, c.n);
        run.estimate("c_term3" + t, c.term3, c.term3_stderr, c.n);
        run.estimate("c_term4" + t, c.term4, c.term4_stderr, c.n);
        const double z = std::abs(c.term2_exact - c.term2_mc) / c.term2_mc_stderr;
        run.check_le("c_term2_cross_check" + t, z, 5.0, "in units of the MC stderr");
    }
    for (std::size_t i = 1; i < cs.size(); ++i) {
        const double z = std::abs(cs[i].value - cs[i - 1].value) / std::hypot(cs[i].stderr_, cs[i - 1].stderr_);
        run.check_le("c_stable(T=" + num(cfg.T_list[i - 1]) + "," + num(cfg.T_list[i]) + ")", z, 5.0,
                     "difference " + num(cs[i].value - cs[i - 1].value) + " in units of the combined stderr");
    }
}

// ---------------------------------------------------------------------------
// partition: Girsanov exactness, the two estimators of Z and the drift scale.

void run_partition(SuiteRun& run, const RunConfig& cfg, int workers) {
    const double T = cfg.T_list.front();
    const Potential V = Potential::fourier(cfg.beta);

    run.tic();
    const int Kg = std::min(cfg.K, int(cfg.option("girsanov_K", 4)));
    const std::size_t Ng = std::size_t(cfg.option("girsanov_samples", 20000));
    DriftOptions go = drift_options(cfg, true);
    go.cap = cfg.option("girsanov_cap", 2.0);
    const TimeGrid gg = TimeGrid::covering(T, cfg.per_octave, Kg);
    const DriftModel gm(gg, T, V, Kg, go);
    const std::vector<Moments> ex = gather_moments(Ng, 1, workers, [&](std::size_t i) {
        return std::vector<double>{std::exp(gm.solve(BrownianDriver::sample(gg, LatticeSpec(Kg), cfg.seed, i)).girsanov_log)};
    });
    run.estimate("girsanov_mean", ex[0].mean, ex[0].stderr_mean(), Ng);
    check_sigma(run, "girsanov_exactness", ex[0], 1.0, 4.0);

    run.tic();
    const DriftModel model(TimeGrid::covering(T, cfg.per_octave, cfg.K), T, V, cfg.K, drift_options(cfg, true));
    const WeightSummary p = partition_P(model, cfg.samples, cfg.seed + 1, workers);
    run.estimate("Z_P", p.mean, p.stderr_, p.n);
    run.estimate("Z_P_log", p.log_mean, p.stderr_ / p.mean, p.n);
    run.estimate("Z_P_ess", p.ess, 0.0, p.n);
    run.tic();
    const WeightSummary q = partition_Q(model, cfg.samples, cfg.seed + 2, workers);
    run.estimate("Z_Q", q.mean, q.stderr_, q.n);
    run.estimate("Z_Q_log", q.log_mean, q.stderr_ / q.mean, q.n);
    run.estimate("Z_Q_ess", q.ess, 0.0, q.n);
    // Compared on a common scale so that the test survives large log Z.
    const double ref = std::max(p.log_mean, q.log_mean);
    const double pv = std::exp(p.log_mean - ref), qv = std::exp(q.log_mean - ref);
    const double se = std::hypot(pv * p.stderr_ / p.mean, qv * q.stderr_ / q.mean);
    run.check_le("partition_consistency", std::abs(pv - qv) / se, 4.0,
                 "log Z_P " + num(p.log_mean) + ", log Z_Q " + num(q.log_mean) + ", ESS " + num(p.ess) + " / " +
                     num(q.ess));

    run.tic();
    const std::size_t Nb = std::size_t(cfg.option("bd_samples", 200));
    const DriftScaleResult r = optimize_drift_scale(model, Nb, cfg.seed + 3, workers);
    run.estimate("drift_scale_theta", r.theta, 0.0, Nb);
    run.estimate("bd_bound", r.bound.value, r.bound.stderr_, r.bound.n);
    run.estimate("bd_at_zero", r.at_zero.value, r.at_zero.stderr_, r.at_zero.n);
    run.check("bd_bound_below_zero_drift", r.bound.value <= r.at_zero.value, r.bound.value, r.at_zero.value);
}

// ---------------------------------------------------------------------------
// density: L^q of D_T, the reference measure and the Laplace probe.

void run_density(SuiteRun& run, const RunConfig& cfg, int workers) {
    const Potential V = Potential::fourier(cfg.beta);
    const double q = cfg.option("q", 1.25);
    std::vector<double> values;
    const double ess_floor = cfg.option("ess_floor", 50.0);
    std::size_t hits = 0, total = 0;
    double min_ess = kInf;
    for (double T : cfg.T_list) {
        run.tic();
        const DriftModel model(TimeGrid::covering(T, cfg.per_octave, cfg.K), T, V, cfg.K, drift_options(cfg, true));
        const ReferenceEnsemble e = reference_ensemble(model, cfg.samples, cfg.seed, workers);
        const LqEstimate l = self_normalized_moment(e.log_weights, q);
        const std::string t = "(T=" + num(T) + ")";
        run.estimate("density_Lq" + t, l.value, l.stderr_, cfg.samples);
        run.estimate("density_ess" + t, l.ess, 0.0, cfg.samples);
        run.estimate("tau_hits" + t, double(e.tau_hits), 0.0, cfg.samples);
        run.check("density_Lq_finite" + t, std::isfinite(l.value) && std::isfinite(l.stderr_), l.value, kInf);
        min_ess = std::min(min_ess, l.ess);
        values.push_back(l.value);
        hits += e.tau_hits;
        total += cfg.samples;
    }
    double spread = 0.0;
    for (double v : values) spread = std::max(spread, std::abs(v / values.front() - 1.0));
    run.check_le("density_Lq_flat", spread, 0.3, "max relative deviation from the first T");
    // With a collapsed ensemble the self-normalized moment sits at n^{q-1}
    // whatever the density, so flatness only counts above the ESS floor.
    run.check("density_Lq_ess", min_ess >= ess_floor, min_ess, ess_floor, "smallest ESS over T");
    run.check_le("tau_hit_frequency", double(hits) / double(total), 0.0,
                 std::to_string(hits) + " of " + std::to_string(total) + " at cap " + num(cfg.cap));

    // Cubic component of the reference measure: second moments and dyadic decay.
    run.tic();
    const int Kg = int(cfg.option("g3_K", 8));
    const double Tg = cfg.option("g3_T", cfg.T_list.back());
    const std::size_t Ng = std::size_t(cfg.option("g3_samples", 1000));
    const TimeGrid grid = TimeGrid::covering(Tg, cfg.per_octave, Kg);
    const DriftModel model(grid, Tg, V, Kg, drift_options(cfg, true));
    const std::vector<Mode> modes{{1, 0, 0}, {1, 1, 0}, {2, 1, 0}};
    const std::vector<double> blocks{1.0, 2.0, 4.0};
    std::vector<std::vector<double>> chi(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        chi[b].resize(SpectralField(Kg).size());
        SpectralField(Kg).for_each_mode([&](int x, int y, int z, std::size_t i) {
            const double c = chi_block(mode_norm(x, y, z), blocks[b]);
            chi[b][i] = c * c;
        });
    }
    const std::vector<Moments> g3 = gather_moments(Ng, modes.size() + blocks.size(), workers, [&](std::size_t i) {
        const ReferenceSample s = model.sample_reference(BrownianDriver::sample(grid, LatticeSpec(Kg), cfg.seed + 1, i));
        std::vector<double> v;
        for (const Mode& n : modes) v.push_back(std::norm(s.g3(n[0], n[1], n[2])));
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            double e = 0.0;
            for (std::size_t j = 0; j < s.g3.size(); ++j) e += chi[b][j] * std::norm(s.g3.data()[j]);
            v.push_back(e);
        }
        return v;
    });
    std::vector<CubicVarianceOracle> oracles;
    for (const RenormContext& c : model.ladder()) oracles.emplace_back(c);
    const double l2 = cfg.lambda * cfg.lambda;
    for (std::size_t j = 0; j < modes.size(); ++j) {
        const Mode& n = modes[j];
        const double o = l2 * w3_variance_oracle(n[0], n[1], n[2], model.amplitudes(), oracles);
        run.estimate("g3_second_moment" + mode_name(n), g3[j].mean, g3[j].stderr_mean(), Ng);
        check_sigma(run, "g3_second_moment" + mode_name(n), g3[j], o, 5.0);
    }
    std::vector<double> energy;
    for (std::size_t b = 0; b < blocks.size(); ++b) energy.push_back(g3[modes.size() + b].mean);
    const double slope = loglog_slope(blocks, energy);
    const double expect = -2.0 * std::min(0.5 + cfg.beta, 1.0);
    run.estimate("g3_dyadic_slope", slope, 0.0, Ng);
    run.check_le("g3_dyadic_slope", std::abs(slope - expect), 0.25, "expected " + num(expect));

    // Laplace transform of a bounded functional under mu_T at two horizons.
    run.tic();
    const std::vector<double> TL{cfg.option("laplace_T1", 8.0), cfg.option("laplace_T2", 16.0)};
    const double clip = cfg.option("laplace_clip", 8.0);
    const LaplaceReport lr = laplace_cauchy_probe([clip](const SpectralField& W) { return clipped_besov(W, -0.75, clip); }, TL, V,
                                                  int(cfg.option("laplace_K", 4)), cfg.per_octave,
                                                  drift_options(cfg, true),
                                                  std::size_t(cfg.option("laplace_samples", 2000)), cfg.seed + 2, workers);
    for (const LaplaceEntry& e : lr.entries) {
        run.estimate("laplace(T=" + num(e.T) + ")", e.value, e.stderr_, std::size_t(cfg.option("laplace_samples", 2000)));
        run.estimate("laplace_ess(T=" + num(e.T) + ")", e.ess, 0.0, 0);
    }
    double laplace_se = 0.0, laplace_ess = kInf;
    for (const LaplaceEntry& e : lr.entries) {
        laplace_se = std::hypot(laplace_se, e.stderr_);
        laplace_ess = std::min(laplace_ess, e.ess);
    }
    run.check("laplace_cauchy", laplace_se > 0.0 && lr.z_scores.front() <= 5.0, lr.z_scores.front(), 5.0,
              "difference in units of the combined stderr " + num(laplace_se));
    run.check("laplace_cauchy_ess", laplace_ess >= ess_floor, laplace_ess, ess_floor, "smallest ESS over T");
}

// ---------------------------------------------------------------------------
// singularity: GFF and Gibbs scans, witness region and main term.

std::string series_csv(const ScanSeries& s) {
    std::ostringstream os;
    write_series_csv(os, s);
    return os.str();
}

void run_singularity(SuiteRun& run, const RunConfig& cfg, int workers) {
    SingularityOptions o;
    o.beta = cfg.beta;
    o.delta = cfg.delta;
    o.lambda = cfg.lambda;
    o.n_power = cfg.n_power;
    o.hermite_term = cfg.option("hermite_term", 1.0) != 0.0;
    o.cap = cfg.cap;
    o.per_octave = cfg.per_octave;
    o.T = cfg.option("T", 0.0);
    o.max_band = int(cfg.option("gibbs_max_band", 16));
    o.ess_floor = cfg.option("ess_floor", 50.0);
    o.samples = cfg.samples;
    o.oracle_samples = cfg.oracle_samples;
    o.seed = cfg.seed;
    o.workers = workers;
    const std::vector<double>& S = cfg.S_list;

    run.tic();
    const ScanSeries gff = gff_scan(S, o);
    run.report.csv["gff.csv"] = series_csv(gff);
    for (const ScanPoint& p : gff.points) {
        const std::string s = "(S=" + num(p.S) + ")";
        run.estimate("gff_mean" + s, p.mean, p.stderr_, p.n);
        run.estimate("gff_rms" + s, p.rms, p.rms_stderr, p.n);
        run.estimate("gff_second_moment" + s, p.second_moment, p.second_moment_stderr, p.n);
        run.estimate("gff_oracle" + s, p.oracle, p.oracle_stderr, o.oracle_samples);
        run.check_le("gff_mean_zero" + s, std::abs(p.mean) / p.stderr_, 4.0, "in units of the stderr");
        run.check_le("gff_second_moment_oracle" + s,
                     std::abs(p.second_moment - p.oracle) / std::hypot(p.second_moment_stderr, p.oracle_stderr), 5.0,
                     "MC " + num(p.second_moment) + " oracle " + num(p.oracle));
    }
    if (gff.fit_valid) {
        run.estimate("gff_rms_slope", gff.fit.slope, 0.5 * (gff.fit.ci_high - gff.fit.ci_low) / 1.96, gff.points.size());
        run.check_le("gff_rms_slope", gff.fit.slope, -0.05 + 0.15,
                     "95% interval [" + num(gff.fit.ci_low) + ", " + num(gff.fit.ci_high) + "]");
    } else {
        run.check("gff_rms_slope", false, std::nan(""), 0.1, "fit unavailable");
    }

    run.tic();
    SingularityOptions og = o;
    og.samples = std::size_t(cfg.option("gibbs_samples", double(cfg.samples)));
    og.seed = cfg.seed + 1;
    const ScanSeries gibbs = gibbs_scan(S, og);
    run.report.csv["gibbs.csv"] = series_csv(gibbs);
    bool negative = true, monotone = true;
    for (std::size_t i = 0; i < gibbs.points.size(); ++i) {
        const ScanPoint& p = gibbs.points[i];
        const std::string s = "(S=" + num(p.S) + ")";
        run.estimate("gibbs_mean" + s, p.mean, p.stderr_, p.n);
        run.estimate("gibbs_ess" + s, p.ess, 0.0, p.n);
        negative = negative && p.mean < 0.0;
        if (i > 0) monotone = monotone && p.mean < gibbs.points[i - 1].mean;
    }
    std::string means;
    for (const ScanPoint& p : gibbs.points) means += (means.empty() ? "" : ", ") + num(p.mean);
    run.check("gibbs_means_negative", negative, gibbs.points.empty() ? 0.0 : gibbs.points.back().mean, 0.0, means);
    run.check("gibbs_means_decreasing", monotone, gibbs.points.empty() ? 0.0 : gibbs.points.back().mean, 0.0, means);
    const double s_lo = cfg.option("separation_S_low", 4.0), s_hi = cfg.option("separation_S_high", 16.0);
    const ScanPoint* lo = nullptr;
    const ScanPoint* hi = nullptr;
    for (const ScanPoint& p : gibbs.points) {
        if (p.S == s_lo) lo = &p;
        if (p.S == s_hi) hi = &p;
    }
    if (lo && hi) {
        // A collapsed ensemble reports a zero stderr; that is not a separation.
        const double se = std::hypot(lo->stderr_, hi->stderr_);
        const double z = se > 0.0 ? (lo->mean - hi->mean) / se : std::nan("");
        run.check("gibbs_separation", z >= 4.0, z, 4.0, "mean(S=" + num(s_lo) + ") - mean(S=" + num(s_hi) + ") in stderr");
    }
    double min_ess = kInf;
    for (const ScanPoint& p : gibbs.points) min_ess = std::min(min_ess, p.ess);
    run.check("gibbs_ess_floor", !gibbs.rejected, min_ess, o.ess_floor, "smallest ESS of the scan");

    run.tic();
    std::vector<double> wv;
    std::ostringstream wcsv;
    wcsv << "S,value,count\n";
    wcsv.precision(17);
    for (double s : S) {
        const WitnessSum w = witness_region_sum(s, cfg.beta);
        wcsv << s << "," << w.value << "," << w.count << "\n";
        run.estimate("witness_sum(S=" + num(s) + ")", w.value, 0.0, w.count);
        wv.push_back(w.value);
    }
    run.report.csv["witness.csv"] = wcsv.str();
    try {
        const ScalingFit wf = scaling_exponent_fit(S, wv, 1000, cfg.seed);
        run.estimate("witness_slope", wf.slope, 0.5 * (wf.ci_high - wf.ci_low) / 1.96, S.size());
        run.check_le("witness_slope", std::abs(wf.slope - (1.0 - 2.0 * cfg.beta)), 0.2,
                     "expected " + num(1.0 - 2.0 * cfg.beta));
    } catch (const std::invalid_argument& e) {
        run.check("witness_slope", false, std::nan(""), 0.2, e.what());
    }

    run.tic();
    const double Tm = cfg.option("main_T", 64.0);
    const std::size_t Nm = std::size_t(cfg.option("main_samples", 20000));
    const Potential V = Potential::fourier(cfg.beta);
    std::ostringstream mcsv;
    mcsv << "S,value,stderr,n_samples\n";
    mcsv.precision(17);
    std::vector<double> mv;
    for (double s : S) {
        const MainTermEstimate m = main_term_expectation(s, Tm, V, Nm, cfg.seed + 2);
        mcsv << s << "," << m.value << "," << m.stderr_ << "," << m.n << "\n";
        run.estimate("main_term(S=" + num(s) + ")", m.value, m.stderr_, m.n);
        mv.push_back(m.value);
    }
    run.report.csv["main_term.csv"] = mcsv.str();
    try {
        const ScalingFit mf = scaling_exponent_fit(S, mv, 1000, cfg.seed);
        run.estimate("main_term_slope", mf.slope, 0.5 * (mf.ci_high - mf.ci_low) / 1.96, S.size());
    } catch (const std::invalid_argument&) {
        // Too few or nonpositive points: the slope is not reported.
    }
}

// ---------------------------------------------------------------------------
// probes: deterministic inequalities and the random operator norm.

void run_probes(SuiteRun& run, const RunConfig& cfg, int workers) {
    const Potential V = Potential::fourier(cfg.beta);
    run.tic();
    const ProbeReport pr = inequality_probes(V, std::size_t(cfg.option("probe_samples", 8)), cfg.seed);
    for (const ProbeSeries& s : pr.series) {
        run.estimate("probe_max_ratio(" + s.name + ")", s.max_ratio, 0.0, s.scale.size());
        run.check("probe_bounded(" + s.name + ")", !s.unbounded_trend, s.max_ratio, kInf);
    }

    std::vector<double> means;
    std::size_t failures = 0;
    for (double T : cfg.T_list) {
        run.tic();
        const RenormContext ctx = build_context(kInf, T, V, cfg.lambda, cfg.n_power, cfg.K);
        struct Item {
            double value = 0.0;
            bool converged = true;
        };
        const std::vector<Item> items = parallel_map_reduce(
            cfg.samples, workers,
            [&](std::size_t i) {
                try {
                    return Item{operator_norm(sample_gff(cfg.K, T, cfg.seed, i), cfg.gamma, ctx, 1e-6, 500, cfg.seed + i).value,
                                true};
                } catch (const ConvergenceError& e) {
                    return Item{e.history().empty() ? 0.0 : e.history().back(), false};
                }
            },
            std::vector<Item>{}, [](std::vector<Item>& acc, const Item& it) { acc.push_back(it); });
        Moments m;
        for (const Item& it : items) {
            m.add(it.value);
            failures += it.converged ? 0 : 1;
        }
        run.estimate("operator_norm(T=" + num(T) + ")", m.mean, m.stderr_mean(), cfg.samples);
        means.push_back(m.mean);
    }
    double spread = 0.0;
    for (double v : means) spread = std::max(spread, std::abs(v / means.front() - 1.0));
    run.check_le("operator_norm_flat", spread, 0.2, "max relative deviation from the first T");
    run.check_le("operator_norm_converged", double(failures), 0.0, "power iterations that missed 1e-6");
}

// ---------------------------------------------------------------------------
// chaos: product formula, hypercontractivity and orthogonality.

ChaosKernel linear_kernel(int M, const Mode& n, cplx c) {
    ChaosKernel f(1);
    for (int s = 1; s <= M; ++s) {
        const double w = std::exp(-0.25 * s);
        f.add({{s, n[0], n[1], n[2]}}, c * w);
        f.add({{s, -n[0], -n[1], -n[2]}}, std::conj(c) * w);
    }
    return f;
}

// Order-1 kernel c e^{-s/4} on the interval slots of a single mode.
ChaosKernel mode_kernel(int M, const Mode& n, cplx c) {
    ChaosKernel f(1);
    for (int s = 1; s <= M; ++s) f.add({{s, n[0], n[1], n[2]}}, c * std::exp(-0.25 * s));
    return f;
}

void run_chaos(SuiteRun& run, const RunConfig& cfg, int workers) {
    // Product formula on single-mode kernels at opposite modes, so that every
    // contraction order contributes while the tensor kernels stay small.
    const TimeGrid pbase = TimeGrid::covering(kInf, int(cfg.option("product_per_octave", 1)), 1);
    const int PM = pbase.intervals();
    const SlotAmplitudes pamps(pbase, 1, kInf);
    const ChaosKernel a = mode_kernel(PM, {1, 0, 0}, cplx(1.0, 0.5));
    const ChaosKernel b = mode_kernel(PM, {-1, 0, 0}, cplx(0.7, -0.2));
    const ChaosKernel ab = contract(a, b, 0, pamps), aa = contract(a, a, 0, pamps);
    const ChaosKernel aab = contract(aa, b, 0, pamps);
    struct Pair {
        std::string name;
        ChaosKernel f, g;
    };
    const std::vector<Pair> pairs{{"(1,1)", a, b}, {"(2,1)", ab, a}, {"(2,2)", ab, ab}, {"(3,1)", aab, b}};
    const std::size_t Np = std::size_t(cfg.option("product_samples", 1000));
    for (const Pair& p : pairs) {
        run.tic();
        std::vector<double> disc;
        const int f0 = int(cfg.option("product_first_factor", 4));
        for (int factor : {f0, 2 * f0, 4 * f0}) {
            const TimeGrid g = TimeGrid::log_uniform(bracket_time(pbase.end()), pbase.per_octave() * factor);
            disc.push_back(product_formula_check(p.f.refined(factor, PM), p.g.refined(factor, PM), g, 1, kInf,
                                                 cfg.seed, Np)
                               .mean_sq_discrepancy);
        }
        const double order = std::log2(disc[0] / disc[2]) / 2.0;
        run.estimate("product_formula_order" + p.name, order, 0.0, Np);
        run.check("product_formula_order" + p.name, order >= 0.8, order, 0.8,
                  "mean square " + num(disc[0]) + ", " + num(disc[1]) + ", " + num(disc[2]));
    }

    const TimeGrid base = TimeGrid::covering(kInf, cfg.per_octave, 1);
    const int M = base.intervals();
    const SlotAmplitudes amps(base, 1, kInf);
    // These kernels are conjugate paired, so the integrals are real.
    run.tic();
    const ChaosKernel f1 = linear_kernel(M, {1, 0, 0}, 1.0), f1b = linear_kernel(M, {0, 1, 0}, 1.0);
    const ChaosKernel f2 = contract(f1, f1b, 0, amps);
    const ChaosKernel f3 = contract(f2, f1, 0, amps);
    const std::size_t N = cfg.samples;
    struct Obs {
        double x1 = 0.0, x2 = 0.0, x3 = 0.0;
    };
    const std::vector<Obs> obs = parallel_map_reduce(
        N, workers,
        [&](std::size_t i) {
            const ChaosEvaluator ev(GaussianPath(BrownianDriver::sample(base, LatticeSpec(1), cfg.seed + 1, i), kInf));
            return Obs{ev.integral(f1).real(), ev.integral(f2).real(), ev.integral(f3).real()};
        },
        std::vector<Obs>{}, [](std::vector<Obs>& acc, const Obs& o) { acc.push_back(o); });
    std::vector<std::vector<double>> xs(3);
    Moments c12, c13, c23;
    for (const Obs& o : obs) {
        xs[0].push_back(o.x1);
        xs[1].push_back(o.x2);
        xs[2].push_back(o.x3);
        c12.add(o.x1 * o.x2);
        c13.add(o.x1 * o.x3);
        c23.add(o.x2 * o.x3);
    }
    for (int k = 1; k <= 3; ++k)
        for (double p : {4.0, 6.0}) {
            const double r = hypercontractivity_ratio(xs[std::size_t(k - 1)], p);
            const double bound = std::pow(p - 1.0, 0.5 * k) * 1.05;
            const std::string name = "(k=" + std::to_string(k) + ",p=" + num(p) + ")";
            run.estimate("hypercontractivity" + name, r, 0.0, N);
            run.check_le("hypercontractivity" + name, r, bound);
        }
    check_sigma(run, "chaos_orthogonality(1,2)", c12, 0.0, 4.0);
    check_sigma(run, "chaos_orthogonality(1,3)", c13, 0.0, 4.0);
    check_sigma(run, "chaos_orthogonality(2,3)", c23, 0.0, 4.0);
}

}  // namespace

Report run_command(const std::string& command, const RunConfig& config, int workers) {
    config.validate();
    if (workers < 1) throw ConfigError("workers must be >= 1");
    SuiteRun run(command, config);
    if (command == "verify") run_verify(run, config, workers);
    else if (command == "moments") run_moments(run, config, workers);
    else if (command == "constants") run_constants(run, config, workers);
    else if (command == "partition") run_partition(run, config, workers);
    else if (command == "density") run_density(run, config, workers);
    else if (command == "singularity") run_singularity(run, config, workers);
    else if (command == "probes") run_probes(run, config, workers);
    else if (command == "chaos") run_chaos(run, config, workers);
    else throw ConfigError("unknown command '" + command + "'");
    return run.report;
}

}  // namespace hartree
