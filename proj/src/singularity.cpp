#include "hartree/singularity.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "hartree/objects.hpp"
#include "hartree/parallel.hpp"
#include "hartree/rng.hpp"

namespace hartree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SpectralField times_table(const SpectralField& f, const std::vector<double>& t, double s = 1.0) {
    SpectralField out = f;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s * t[i];
    return out;
}

std::vector<double> rho_table(double S, int band) {
    std::vector<double> t(SpectralField(band).size());
    SpectralField(band).for_each_mode([&](int x, int y, int z, std::size_t i) { t[i] = rho_t(mode_norm(x, y, z), S); });
    return t;
}

// Statistic without the band checks (for truncated lattices).
double normalized_quartic(const SpectralField& phi, double norm, const RenormContext& ctx,
                          const std::vector<double>& rhoS) {
    const SpectralField f = times_table(phi.with_band(ctx.band), rhoS);
    return wick_quartic_energy(f, ctx) / norm;
}

Potential scan_potential(const SingularityOptions& o) { return Potential::fourier(o.beta); }

void check_S_list(const std::vector<double>& S_list) {
    if (S_list.empty()) throw std::invalid_argument("singularity scan: empty S list");
    for (double S : S_list)
        if (!(S > 0.0) || std::isinf(S)) throw std::invalid_argument("singularity scan: S must be positive and finite");
}

void fit_series(ScanSeries& s, bool negate_mean) {
    if (s.points.size() < 3) return;
    std::vector<double> S, v;
    for (const ScanPoint& p : s.points) {
        const double y = negate_mean ? -p.mean : p.rms;
        if (!(y > 0.0) || !std::isfinite(y)) return;
        S.push_back(p.S);
        v.push_back(y);
    }
    s.fit = scaling_exponent_fit(S, v);
    s.fit_valid = true;
}

struct DecompositionLadder {
    std::vector<RenormContext> ctx;  // at the grid nodes 0..M-1, T = S
    RenormContext ctx_inf;
};

DecompositionLadder decomposition_ladder(const DriftModel& model, double S) {
    const RenormContext& c0 = model.context_inf();
    DecompositionLadder L;
    const TimeGrid& g = model.grid();
    for (int k = 0; k < g.intervals(); ++k)
        L.ctx.push_back(build_context(g.t(k), S, c0.V, c0.lambda, c0.n_power, model.band()));
    L.ctx_inf = build_context(kInf, S, c0.V, c0.lambda, c0.n_power, model.band());
    return L;
}

QuarticDecomposition decompose_with(const DriftModel& model, const BrownianDriver& driver, double S,
                                    const DecompositionLadder& L, const ReferenceSample& sample) {
    const TimeGrid& grid = model.grid();
    const int m = grid.intervals();
    const int K = model.band();
    const GaussianPath Y(driver, model.T());
    const GaussianPath YS(driver, S);
    const std::vector<SpectralField> IS = integrate_I(sample.traj.u, grid, S);
    const SlotAmplitudes& ampS = YS.amplitudes();
    const std::optional<int>& tau = sample.traj.tau_hit;

    QuarticDecomposition d;
    d.head = wick_quartic_energy(YS.at(0), L.ctx.front());
    double mform = d.head;
    for (int k = 0; k < m; ++k) {
        const RenormContext& ctx = L.ctx[std::size_t(k)];
        const double dt = grid.dt(k);
        const std::vector<double> JS = ampS.J(k);
        const SpectralField& Yk = YS.at(k);
        const SpectralField WS = Yk + IS[std::size_t(k)];
        const SpectralField dWS = (YS.at(k + 1) - Yk) + (IS[std::size_t(k) + 1] - IS[std::size_t(k)]);
        const SpectralField CW = wick_cubic(WS, ctx);
        mform += 4.0 * pairing(CW, dWS);

        SpectralField cp(K), hp(K);
        if (!(tau && k >= *tau)) model.forcing(Y.at(k), k, &cp, &hp);
        const SpectralField dB = driver.increment(k);
        const SpectralField JSCY = times_table(wick_cubic(Yk, ctx), JS);
        // cp = -lambda J C(Y), so 4 < ., cp > dt is the -4 lambda < ., J C(Y) > dt term.
        d.main += 4.0 * pairing(JSCY, cp) * dt;
        d.main_martingale += 4.0 * pairing(JSCY, dB);
        const auto A = drift_side_A(Yk, IS[std::size_t(k)], ctx, JS);
        for (int j = 0; j < 3; ++j) {
            d.drift_minor[std::size_t(j)] += 4.0 * pairing(A[std::size_t(j)], cp) * dt;
            d.martingale_minor[std::size_t(j)] += 4.0 * pairing(A[std::size_t(j)], dB);
        }
        d.coercive += 4.0 * pairing(times_table(CW, JS), hp) * dt;
    }
    d.martingale_form = mform;
    d.direct = wick_quartic_energy(YS.infinity() + IS.back(), L.ctx_inf);
    return d;
}

// Gibbs-side ensemble: per sample the log-weight followed by one value per S.
struct GibbsSetup {
    double T = 0.0;
    int band = 0;
    TimeGrid grid;
};

GibbsSetup gibbs_setup(const std::vector<double>& S_list, const SingularityOptions& o) {
    check_S_list(S_list);
    const double Smax = *std::max_element(S_list.begin(), S_list.end());
    GibbsSetup g;
    g.T = o.T > 0.0 ? o.T : gibbs_default_T(Smax);
    if (g.T < Smax) throw std::invalid_argument("gibbs_scan: T must be >= max S");
    int full = 0;
    for (double S : S_list) full = std::max(full, singularity_band(S));
    g.band = o.max_band > 0 ? std::min(o.max_band, full) : full;
    g.grid = TimeGrid::covering(g.T, o.per_octave, g.band);
    return g;
}

DriftModel gibbs_model(const GibbsSetup& g, const SingularityOptions& o) {
    DriftOptions d;
    d.lambda = o.lambda;
    d.n_power = o.n_power;
    d.hermite_term = o.hermite_term;
    d.cap = o.cap;
    return DriftModel(g.grid, g.T, scan_potential(o), g.band, d);
}

}  // namespace

int singularity_band(double S) {
    if (!(S >= 0.0) || std::isinf(S)) throw std::invalid_argument("singularity_band: S must be finite and >= 0");
    return int(std::ceil(4.0 * bracket_time(S) - 1e-12));
}

double gibbs_default_T(double S_max) {
    const double b = 16.0 * bracket_time(S_max);
    return std::sqrt(b * b - 1.0);
}

double singularity_normalizer(double S, double beta, double delta) { return std::pow(S, 1.0 - 2.0 * beta - delta); }

double quartic_statistic(const SpectralField& phi, double S, double beta, double delta, const RenormContext& ctx_S) {
    const int need = singularity_band(S);
    if (ctx_S.band < need) throw BandError("quartic_statistic: context band does not cover 4<S>");
    if (phi.band() < need) throw BandError("quartic_statistic: field band does not cover 4<S>");
    return normalized_quartic(phi, singularity_normalizer(S, beta, delta), ctx_S, rho_table(S, ctx_S.band));
}

ScanSeries gff_scan(const std::vector<double>& S_list, const SingularityOptions& o) {
    check_S_list(S_list);
    ScanSeries out;
    out.name = "gff";
    const Potential V = scan_potential(o);
    for (double S : S_list) {
        const int K = singularity_band(S);
        const RenormContext ctx = build_context(kInf, S, V, o.lambda, o.n_power, K);
        const std::vector<double> rhoS = rho_table(S, K);
        const double norm = singularity_normalizer(S, o.beta, o.delta);
        const std::vector<double> x = parallel_samples(o.samples, o.workers, [&](std::size_t i) {
            return normalized_quartic(sample_gff(K, kInf, o.seed, i), norm, ctx, rhoS);
        });
        Moments m1, m2;
        for (double v : x) {
            m1.add(v);
            m2.add(v * v);
        }
        ScanPoint p;
        p.S = S;
        p.band = K;
        p.n = x.size();
        p.ess = double(x.size());
        p.mean = m1.mean;
        p.stderr_ = m1.stderr_mean();
        p.second_moment = m2.mean;
        p.second_moment_stderr = m2.stderr_mean();
        p.rms = std::sqrt(m2.mean);
        p.rms_stderr = p.rms > 0.0 ? p.second_moment_stderr / (2.0 * p.rms) : 0.0;
        const OracleValue orc = quartic_second_moment_oracle(ctx, 8, o.oracle_samples, o.seed);
        p.oracle = orc.value / (norm * norm);
        p.oracle_stderr = orc.stderr_ / (norm * norm);
        out.points.push_back(p);
    }
    fit_series(out, false);
    return out;
}

ScanSeries gibbs_scan(const std::vector<double>& S_list, const SingularityOptions& o) {
    const GibbsSetup g = gibbs_setup(S_list, o);
    const DriftModel model = gibbs_model(g, o);
    const Potential V = scan_potential(o);
    const std::size_t nS = S_list.size();
    std::vector<RenormContext> ctx;
    std::vector<std::vector<double>> rho;
    std::vector<double> norm;
    for (double S : S_list) {
        const int K = std::min(singularity_band(S), g.band);
        ctx.push_back(build_context(kInf, S, V, o.lambda, o.n_power, K));
        rho.push_back(rho_table(S, K));
        norm.push_back(singularity_normalizer(S, o.beta, o.delta));
    }
    const LatticeSpec lat(g.band);
    const auto rows = parallel_map_reduce(
        o.samples, o.workers,
        [&](std::size_t i) {
            const BrownianDriver d = BrownianDriver::sample(g.grid, lat, o.seed, i);
            const ReferenceSample s = model.sample_reference(d);
            std::vector<double> row{model.gibbs_log_weight(s, d, 0.0)};
            for (std::size_t j = 0; j < nS; ++j)
                row.push_back(normalized_quartic(s.W_inf, norm[j], ctx[j], rho[j]));
            return row;
        },
        std::vector<std::vector<double>>{}, [](auto& acc, const std::vector<double>& r) { acc.push_back(r); });

    ScanSeries out;
    out.name = "gibbs";
    double mx = -kInf;
    for (const auto& r : rows) mx = std::max(mx, r[0]);
    std::vector<double> w;
    double sw = 0.0, sw2 = 0.0;
    for (const auto& r : rows) {
        w.push_back(std::exp(r[0] - mx));
        sw += w.back();
        sw2 += w.back() * w.back();
    }
    const double ess = sw > 0.0 ? sw * sw / sw2 : 0.0;
    for (std::size_t j = 0; j < nS; ++j) {
        ScanPoint p;
        p.S = S_list[j];
        p.band = ctx[j].band;
        p.truncated = ctx[j].band < singularity_band(p.S);
        p.n = rows.size();
        p.ess = ess;
        p.flagged = ess < o.ess_floor;
        double mean = 0.0, sec = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            mean += w[i] * rows[i][j + 1];
            sec += w[i] * rows[i][j + 1] * rows[i][j + 1];
        }
        mean /= sw;
        sec /= sw;
        double v1 = 0.0, v2 = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double x = rows[i][j + 1];
            v1 += w[i] * w[i] * (x - mean) * (x - mean);
            v2 += w[i] * w[i] * (x * x - sec) * (x * x - sec);
        }
        p.mean = mean;
        p.stderr_ = std::sqrt(v1) / sw;
        p.second_moment = sec;
        p.second_moment_stderr = std::sqrt(v2) / sw;
        p.rms = std::sqrt(sec);
        p.rms_stderr = p.rms > 0.0 ? p.second_moment_stderr / (2.0 * p.rms) : 0.0;
        out.rejected = out.rejected || p.flagged;
        out.points.push_back(p);
    }
    fit_series(out, true);
    return out;
}

void write_series_csv(std::ostream& os, const ScanSeries& series) {
    os << "S,mean,stderr,rms,ess,n_samples\n";
    os << std::setprecision(12);
    for (const ScanPoint& p : series.points)
        os << p.S << ',' << p.mean << ',' << p.stderr_ << ',' << p.rms << ',' << p.ess << ',' << p.n << '\n';
}

ScalingFit scaling_exponent_fit(const std::vector<double>& S, const std::vector<double>& values,
                                std::size_t resamples, uint64_t seed) {
    if (S.size() != values.size()) throw std::invalid_argument("scaling_exponent_fit: size mismatch");
    if (S.size() < 3) throw std::invalid_argument("scaling_exponent_fit: need at least 3 points");
    const std::size_t n = S.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(S[i] > 0.0) || !(values[i] > 0.0) || !std::isfinite(values[i]))
            throw std::invalid_argument("scaling_exponent_fit: values and scales must be positive");
        x[i] = std::log(S[i]);
        y[i] = std::log(values[i]);
    }
    double xm = 0.0;
    for (double v : x) xm += v / double(n);
    double sxx = 0.0;
    for (double v : x) sxx += (v - xm) * (v - xm);
    if (!(sxx > 0.0)) throw std::invalid_argument("scaling_exponent_fit: scales must not all coincide");
    auto fit = [&](const std::vector<double>& yy) {
        double ym = 0.0;
        for (double v : yy) ym += v / double(n);
        double sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) sxy += (x[i] - xm) * (yy[i] - ym);
        const double slope = sxy / sxx;
        return std::pair<double, double>{slope, ym - slope * xm};
    };
    ScalingFit f;
    std::tie(f.slope, f.intercept) = fit(y);
    std::vector<double> yhat(n), res(n);
    for (std::size_t i = 0; i < n; ++i) {
        yhat[i] = f.intercept + f.slope * x[i];
        res[i] = y[i] - yhat[i];
    }
    CounterRng rng(seed, 0, 0xB007u);
    std::vector<double> slopes;
    slopes.reserve(resamples);
    std::vector<double> yy(n);
    for (std::size_t b = 0; b < resamples; ++b) {
        for (std::size_t i = 0; i < n; ++i)
            yy[i] = yhat[i] + res[std::min(n - 1, std::size_t(rng.uniform() * double(n)))];
        slopes.push_back(fit(yy).first);
    }
    if (slopes.empty()) {
        f.ci_low = f.ci_high = f.slope;
        return f;
    }
    std::sort(slopes.begin(), slopes.end());
    auto q = [&](double p) { return slopes[std::min(slopes.size() - 1, std::size_t(p * double(slopes.size())))]; };
    f.ci_low = std::min(q(0.025), f.slope);
    f.ci_high = std::max(q(0.975), f.slope);
    return f;
}

double witness_time_weight(double r0, const std::array<double, 3>& r, const TimeGrid* grid) {
    auto others = [&](double t) {
        double p = 1.0;
        for (double rj : r) p *= rho_t(rj, t) * rho_t(rj, t);
        return p;
    };
    if (grid) {
        double s = 0.0;
        for (int k = 0; k < grid->intervals(); ++k) {
            const double a = rho_t(r0, grid->t(k)), b = rho_t(r0, grid->t(k + 1));
            if (b * b != a * a) s += (b * b - a * a) * others(grid->t(k));
        }
        return s;
    }
    // In u = log <s>: d(rho(r0 / <s>)^2) = -2 y rho(y) rho'(y) du with y = r0 / <s>.
    const double lo = std::log(std::max(1.0, r0 / 4.0)), hi = std::log(4.0 * r0);
    if (!(hi > lo)) return 0.0;
    std::vector<double> cuts{lo, hi};
    for (double rj : r)
        for (double c : {std::log(rj / 4.0), std::log(4.0 * rj)})
            if (rj > 0.0 && c > lo && c < hi) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    auto integrand = [&](double u) {
        const double b = std::exp(u), y = r0 / b;
        double p = -2.0 * y * cutoff_rho(y) * cutoff_rho_prime(y);
        for (double rj : r) {
            const double q = cutoff_rho(rj / b);
            p *= q * q;
        }
        return p;
    };
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] > cuts[i]) s += boost::math::quadrature::gauss<double, 20>::integrate(integrand, cuts[i], cuts[i + 1]);
    return s;
}

WitnessSum witness_region_sum(double S, double beta) {
    if (!(S > 0.0) || std::isinf(S)) throw std::invalid_argument("witness_region_sum: S must be positive and finite");
    const double rad = S / 20.0;
    // Lattice points of the ball of radius S/20 around S e_j.
    std::array<std::vector<std::array<int, 3>>, 3> ball;
    for (int j = 0; j < 3; ++j) {
        std::array<double, 3> c{0.0, 0.0, 0.0};
        c[std::size_t(j)] = S;
        std::array<int, 3> lo{}, hi{};
        for (int a = 0; a < 3; ++a) {
            lo[std::size_t(a)] = int(std::ceil(c[std::size_t(a)] - rad));
            hi[std::size_t(a)] = int(std::floor(c[std::size_t(a)] + rad));
        }
        for (int x = lo[0]; x <= hi[0]; ++x)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int z = lo[2]; z <= hi[2]; ++z) {
                    const double d2 = (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) + (z - c[2]) * (z - c[2]);
                    if (d2 <= rad * rad * (1.0 + 1e-12)) ball[std::size_t(j)].push_back({x, y, z});
                }
    }
    WitnessSum out;
    for (const auto& a : ball[0])
        for (const auto& b : ball[1])
            for (const auto& c : ball[2]) {
                const double r1 = mode_norm(a[0], a[1], a[2]), r2 = mode_norm(b[0], b[1], b[2]),
                             r3 = mode_norm(c[0], c[1], c[2]);
                const double r12 = mode_norm(a[0] + b[0], a[1] + b[1], a[2] + b[2]);
                const double r0 = mode_norm(a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]);
                const double brk = bracket(r0) * bracket(r1) * bracket(r2) * bracket(r3);
                const double cut = rho_t(r0, S) * rho_t(r1, S) * rho_t(r2, S) * rho_t(r3, S);
                out.value += cut * witness_time_weight(r0, {r1, r2, r3}) * std::pow(bracket(r12), -2.0 * beta) /
                             (brk * brk);
                ++out.count;
            }
    return out;
}

MainTermEstimate main_term_expectation(double S, double T, const Potential& V, std::size_t samples, uint64_t seed,
                                       const TimeGrid* grid) {
    if (!(S > 0.0) || !(T > 0.0)) throw std::invalid_argument("main_term_expectation: S and T must be positive");
    if (samples < 2) throw std::invalid_argument("main_term_expectation: need at least 2 samples");
    const int K = singularity_band(std::min(S, T));
    const SpectralField layout(K);
    const int s = layout.side();
    std::vector<double> c(layout.size()), cdf(layout.size());
    double acc = 0.0;
    layout.for_each_mode([&](int x, int y, int z, std::size_t i) {
        const double r = mode_norm(x, y, z), b = bracket(r);
        c[i] = rho_t(r, S) * rho_t(r, T) / (b * b);
        cdf[i] = (acc += c[i]);
    });
    CounterRng rng(seed, 0, 0x3A1Fu);
    auto draw = [&] {
        const double u = rng.uniform() * acc;
        const std::size_t i = std::min(cdf.size() - 1, std::size_t(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin()));
        const int j = int(i);
        return std::array<int, 3>{j / (s * s) - K, (j / s) % s - K, j % s - K};
    };
    Moments m;
    for (std::size_t n = 0; n < samples; ++n) {
        const auto a = draw(), b = draw(), d = draw();
        const int x = a[0] + b[0] + d[0], y = a[1] + b[1] + d[1], z = a[2] + b[2] + d[2];
        double v = 0.0;
        if (layout.contains(x, y, z)) {
            const double cn = c[layout.index(x, y, z)];
            if (cn > 0.0) {
                const double vs = V.vhat(a[0] + b[0], a[1] + b[1], a[2] + b[2]) +
                                  V.vhat(a[0] + d[0], a[1] + d[1], a[2] + d[2]) +
                                  V.vhat(b[0] + d[0], b[1] + d[1], b[2] + d[2]);
                const std::array<double, 3> r{mode_norm(a[0], a[1], a[2]), mode_norm(b[0], b[1], b[2]),
                                              mode_norm(d[0], d[1], d[2])};
                v = (2.0 / 3.0) * vs * vs * cn * witness_time_weight(mode_norm(x, y, z), r, grid);
            }
        }
        m.add(v);
    }
    const double scale = acc * acc * acc;
    MainTermEstimate e;
    e.value = scale * m.mean;
    e.stderr_ = scale * m.stderr_mean();
    e.n = samples;
    return e;
}

double QuarticDecomposition::total() const {
    double s = head + main + main_martingale + coercive;
    for (int j = 0; j < 3; ++j) s += drift_minor[std::size_t(j)] + martingale_minor[std::size_t(j)];
    return s;
}

std::array<SpectralField, 3> drift_side_A(const SpectralField& Yin, const SpectralField& Iin, const RenormContext& ctx,
                                         const std::vector<double>& JS) {
    const int K = ctx.band;
    const SpectralField Y = Yin.with_band(K), I = Iin.with_band(K);
    const SpectralField vYI = ctx.convolve_V(multiply(Y, I, 2 * K));
    const SpectralField vI2 = ctx.convolve_V(multiply(I, I, 2 * K));
    SpectralField a1 = multiply(ctx.convolve_V(wick_square(Y, ctx)), I, K);
    a1.add_scaled(multiply(vYI, Y, K) - ctx.apply_M(I), 2.0);
    SpectralField a2 = multiply(vI2, Y, K);
    a2.add_scaled(multiply(vYI, I, K), 2.0);
    return {times_table(a1, JS), times_table(a2, JS), times_table(multiply(vI2, I, K), JS)};
}

QuarticDecomposition decompose_quartic_statistic(const DriftModel& model, const BrownianDriver& driver, double S) {
    if (!(S > 0.0) || std::isinf(S)) throw std::invalid_argument("decompose_quartic_statistic: S must be positive and finite");
    const DecompositionLadder L = decomposition_ladder(model, S);
    return decompose_with(model, driver, S, L, model.sample_reference(driver));
}

std::vector<MinorTermPoint> minor_term_scan(const std::vector<double>& S_list, const SingularityOptions& o) {
    const GibbsSetup g = gibbs_setup(S_list, o);
    const DriftModel model = gibbs_model(g, o);
    std::vector<DecompositionLadder> ladders;
    for (double S : S_list) ladders.push_back(decomposition_ladder(model, S));
    const std::size_t nS = S_list.size();
    const LatticeSpec lat(g.band);
    using Row = std::vector<std::array<double, 7>>;
    const auto rows = parallel_map_reduce(
        o.samples, o.workers,
        [&](std::size_t i) {
            const BrownianDriver d = BrownianDriver::sample(g.grid, lat, o.seed, i);
            const ReferenceSample s = model.sample_reference(d);
            Row row(nS);
            for (std::size_t j = 0; j < nS; ++j) {
                const QuarticDecomposition q = decompose_with(model, d, S_list[j], ladders[j], s);
                const double norm = singularity_normalizer(S_list[j], o.beta, o.delta);
                for (int a = 0; a < 3; ++a) {
                    row[j][std::size_t(a)] = std::abs(q.drift_minor[std::size_t(a)]) / norm;
                    row[j][std::size_t(a) + 3] = std::abs(q.martingale_minor[std::size_t(a)]) / norm;
                }
                row[j][6] = std::abs(q.coercive) / norm;
            }
            return row;
        },
        std::vector<Row>{}, [](auto& acc, const Row& r) { acc.push_back(r); });
    std::vector<MinorTermPoint> out(nS);
    for (std::size_t j = 0; j < nS; ++j) {
        out[j].S = S_list[j];
        for (std::size_t a = 0; a < 7; ++a) {
            Moments m;
            for (const Row& r : rows) m.add(r[j][a]);
            out[j].magnitude[a] = m.mean;
            out[j].stderr_[a] = m.stderr_mean();
        }
    }
    return out;
}

}  // namespace hartree
