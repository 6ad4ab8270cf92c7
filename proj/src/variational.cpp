#include "hartree/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "hartree/parallel.hpp"
#include "hartree/rng.hpp"

namespace hartree {

namespace {

SpectralField times_table(const SpectralField& f, const std::vector<double>& t, double s = 1.0) {
    SpectralField out = f;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s * t[i];
    return out;
}

// int (V * (a b)) c d dx for fields of band <= ctx.band.
double quad_form(const RenormContext& ctx, const SpectralField& a, const SpectralField& b, const SpectralField& c,
                 const SpectralField& d) {
    const int B = 2 * ctx.band;
    return pairing(ctx.convolve_V(multiply(a, b, B)), multiply(c, d, B));
}

// int (V * (W f)) W g - int (M f) g.
double random_form(const RenormContext& ctx, const SpectralField& W, const SpectralField& f, const SpectralField& g) {
    return quad_form(ctx, W, f, W, g) - pairing(ctx.apply_M(f), g);
}

// I_inf[u] = sum_k amp_{k+1} sqrt(dt_k) u_k.
SpectralField integrate_to_end(const DriftModel& model, const std::vector<SpectralField>& u) {
    SpectralField I(model.band());
    for (int k = 0; k < model.grid().intervals(); ++k)
        I += times_table(u[std::size_t(k)], model.amplitudes().amp(k + 1), std::sqrt(model.grid().dt(k)));
    return I;
}

double drift_energy(const DriftModel& model, const std::vector<SpectralField>& u) {
    double e = 0.0;
    for (int k = 0; k < model.grid().intervals(); ++k) e += pairing(u[std::size_t(k)], u[std::size_t(k)]) * model.grid().dt(k);
    return e;
}

Estimate mean_of(const std::vector<double>& v) {
    Moments m;
    for (double x : v) m.add(x);
    return {m.mean, m.stderr_mean(), v.size()};
}

}  // namespace

double renormalized_potential(const SpectralField& f, const RenormContext& ctx, double c) {
    if (ctx.lambda == 0.0) return c;
    return 0.25 * ctx.lambda * wick_quartic_energy(f, ctx) + c;
}

double interaction_energy(const SpectralField& f, const RenormContext& ctx) {
    const SpectralField sq = multiply(f, f, 2 * f.band());
    return pairing(ctx.convolve_V(sq), sq);
}

VariationalPath variational_path(const DriftModel& model, const BrownianDriver& driver) {
    const GaussianPath path(driver, model.T());
    VariationalPath p;
    p.W_inf = path.infinity();
    p.w3 = SpectralField(model.band());
    const auto& ladder = model.ladder();
    for (int k = 0; k < model.grid().intervals(); ++k) {
        SpectralField c = cubic_object(path, k, ladder[std::size_t(k)]);
        const std::vector<double>& a = model.amplitudes().amp(k + 1);
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double a2 = a[i] * a[i];
            p.w3.data()[i] += a2 * c.data()[i];
            p.jc_norm_sq += a2 * std::norm(c.data()[i]);
        }
        p.cubic.push_back(std::move(c));
    }
    return p;
}

std::vector<SpectralField> scaled_u_star(const DriftModel& model, const VariationalPath& path, double theta) {
    std::vector<SpectralField> u;
    const double s = -theta * model.options().lambda;
    for (int k = 0; k < model.grid().intervals(); ++k)
        u.push_back(times_table(path.cubic[std::size_t(k)], model.amplitudes().J(k), s));
    return u;
}

std::vector<SpectralField> shifted_drift(const DriftModel& model, const VariationalPath& path,
                                         const std::vector<SpectralField>& u) {
    if (int(u.size()) != model.grid().intervals()) throw std::invalid_argument("shifted_drift: need one drift value per interval");
    std::vector<SpectralField> w;
    const double lambda = model.options().lambda;
    for (int k = 0; k < model.grid().intervals(); ++k)
        w.push_back(u[std::size_t(k)] + times_table(path.cubic[std::size_t(k)], model.amplitudes().J(k), lambda));
    return w;
}

double bd_sample(const DriftModel& model, const VariationalPath& path, const std::vector<SpectralField>& u, double c,
                 const FieldFunctional& F) {
    if (int(u.size()) != model.grid().intervals()) throw std::invalid_argument("bd_sample: need one drift value per interval");
    const SpectralField X = path.W_inf + integrate_to_end(model, u);
    double v = model.renormalized_potential(X, c) + 0.5 * drift_energy(model, u);
    if (F) v += F(X);
    return v;
}

EnergyDecomposition decompose_objective(const DriftModel& model, const VariationalPath& path,
                                        const std::vector<SpectralField>& u, double c, const FieldFunctional& F) {
    if (int(u.size()) != model.grid().intervals()) throw std::invalid_argument("decompose_objective: need one drift value per interval");
    const RenormContext& ctx = model.context_inf();
    const double lambda = model.options().lambda;
    const double l2 = lambda * lambda, l3 = l2 * lambda;
    const SpectralField& W = path.W_inf;
    const SpectralField& W3 = path.w3;
    const SpectralField I = integrate_to_end(model, u);
    const SpectralField Iw = I + lambda * W3;
    const SpectralField VW2 = ctx.convolve_V(wick_square(W, ctx));
    const int B = 2 * ctx.band;
    auto with_VW2 = [&](const SpectralField& f, const SpectralField& g) { return pairing(VW2, multiply(f, g, B)); };

    EnergyDecomposition d;
    d.c = c;
    d.E0 = 0.25 * lambda * wick_quartic_energy(W, ctx) - 0.5 * l2 * path.jc_norm_sq + 0.5 * l3 * with_VW2(W3, W3) +
           l3 * random_form(ctx, W, W3, W3);
    d.E1 = (F ? F(W + I) : 0.0) - l2 * with_VW2(W3, Iw) - 2.0 * l2 * random_form(ctx, W, W3, Iw);
    d.E2 = lambda * random_form(ctx, W, Iw, Iw) + 0.5 * lambda * with_VW2(Iw, Iw);
    d.E3 = lambda * quad_form(ctx, I, I, I, W) + 0.25 * lambda * (interaction_energy(I, ctx) - interaction_energy(Iw, ctx));
    d.coercive = 0.25 * lambda * interaction_energy(Iw, ctx) + 0.5 * drift_energy(model, shifted_drift(model, path, u));
    if (lambda != 0.0) {
        const SpectralField C_inf = wick_cubic(W, ctx);
        for (int k = 0; k < model.grid().intervals(); ++k) {
            const SpectralField dI =
                times_table(u[std::size_t(k)], model.amplitudes().amp(k + 1), std::sqrt(model.grid().dt(k)));
            d.martingale += lambda * pairing(C_inf - path.cubic[std::size_t(k)], dI);
        }
    }
    return d;
}

double c_term2_exact(const DriftModel& model) {
    const double lambda = model.options().lambda;
    if (lambda == 0.0) return 0.0;
    double s = 0.0;
    for (int k = 0; k < model.grid().intervals(); ++k) {
        std::vector<double> w = model.amplitudes().amp(k + 1);
        double wmax = 0.0;
        for (double& v : w) {
            v *= v;
            wmax = std::max(wmax, v);
        }
        if (wmax == 0.0) continue;
        s += CubicVarianceOracle(model.ladder()[std::size_t(k)]).weighted_sum(w);
    }
    return 0.5 * lambda * lambda * s;
}

CEstimate estimate_c(const DriftModel& model, std::size_t samples, uint64_t seed, int workers) {
    CEstimate r;
    r.n = samples;
    const double lambda = model.options().lambda;
    if (lambda == 0.0) return r;
    const double l2 = lambda * lambda, l3 = l2 * lambda;
    struct Item {
        double t2 = 0.0, t3 = 0.0, t4 = 0.0;
    };
    const RenormContext& ctx = model.context_inf();
    std::vector<Item> items(samples);
    parallel_map_reduce(
        samples, workers,
        [&](std::size_t i) {
            const VariationalPath p =
                variational_path(model, BrownianDriver::sample(model.grid(), LatticeSpec(model.band()), seed, i));
            const SpectralField VW2 = ctx.convolve_V(wick_square(p.W_inf, ctx));
            Item it;
            it.t2 = 0.5 * l2 * p.jc_norm_sq;
            it.t3 = 0.5 * l3 * pairing(VW2, multiply(p.w3, p.w3, 2 * ctx.band));
            it.t4 = l3 * random_form(ctx, p.W_inf, p.w3, p.w3);
            return it;
        },
        std::size_t(0), [&](std::size_t& j, const Item& it) { items[j++] = it; });
    Moments m2, m3, m4, m34;
    for (const Item& it : items) {
        m2.add(it.t2);
        m3.add(it.t3);
        m4.add(it.t4);
        m34.add(it.t3 + it.t4);
    }
    r.term2_exact = c_term2_exact(model);
    r.term2_mc = m2.mean;
    r.term2_mc_stderr = m2.stderr_mean();
    r.term3 = m3.mean;
    r.term3_stderr = m3.stderr_mean();
    r.term4 = m4.mean;
    r.term4_stderr = m4.stderr_mean();
    r.value = r.term2_exact - m34.mean;
    r.stderr_ = m34.stderr_mean();
    return r;
}

Estimate bd_objective(const DriftModel& model, double theta, std::size_t samples, uint64_t seed, int workers, double c,
                      const FieldFunctional& F) {
    const std::vector<double> v = parallel_samples(samples, workers, [&](std::size_t i) {
        const VariationalPath p =
            variational_path(model, BrownianDriver::sample(model.grid(), LatticeSpec(model.band()), seed, i));
        return bd_sample(model, p, scaled_u_star(model, p, theta), c, F);
    });
    return mean_of(v);
}

double golden_section_minimize(const std::function<double(double)>& phi, double a, double b, double tol) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = phi(x1), f2 = phi(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = phi(x2);
        }
    }
    return 0.5 * (a + b);
}

DriftScaleResult optimize_drift_scale(const DriftModel& model, std::size_t samples, uint64_t seed, int workers,
                                      double c) {
    // The objective of theta u_star is exactly a quartic in theta; recover its
    // coefficients from five evaluations by Lagrange interpolation.
    constexpr int P = 5;
    const double nodes[P] = {0.0, 0.5, 1.0, 1.5, 2.0};
    using Poly = std::array<double, P>;
    auto interpolate = [&](const Poly& vals) {
        Poly coef{};
        for (int j = 0; j < P; ++j) {
            Poly basis{};
            basis[0] = 1.0;
            double denom = 1.0;
            for (int m = 0; m < P; ++m) {
                if (m == j) continue;
                Poly next{};
                for (int d = 0; d + 1 < P; ++d) {
                    next[std::size_t(d) + 1] += basis[std::size_t(d)];
                    next[std::size_t(d)] -= nodes[m] * basis[std::size_t(d)];
                }
                basis = next;
                denom *= nodes[j] - nodes[m];
            }
            for (int d = 0; d < P; ++d) coef[std::size_t(d)] += vals[std::size_t(j)] * basis[std::size_t(d)] / denom;
        }
        return coef;
    };
    auto eval = [](const Poly& p, double x) {
        double v = 0.0;
        for (int d = P - 1; d >= 0; --d) v = v * x + p[std::size_t(d)];
        return v;
    };
    std::vector<Poly> polys(samples);
    parallel_map_reduce(
        samples, workers,
        [&](std::size_t i) {
            const VariationalPath p =
                variational_path(model, BrownianDriver::sample(model.grid(), LatticeSpec(model.band()), seed, i));
            Poly vals{};
            for (int j = 0; j < P; ++j) vals[std::size_t(j)] = bd_sample(model, p, scaled_u_star(model, p, nodes[j]), c);
            return interpolate(vals);
        },
        std::size_t(0), [&](std::size_t& j, const Poly& p) { polys[j++] = p; });
    Poly mean{};
    for (const Poly& p : polys)
        for (int d = 0; d < P; ++d) mean[std::size_t(d)] += p[std::size_t(d)] / double(std::max<std::size_t>(1, samples));
    DriftScaleResult r;
    r.mean_poly.assign(mean.begin(), mean.end());
    r.theta = golden_section_minimize([&](double t) { return eval(mean, t); }, 0.0, 2.0, 1e-7);
    auto at = [&](double t) {
        std::vector<double> v;
        v.reserve(polys.size());
        for (const Poly& p : polys) v.push_back(eval(p, t));
        return mean_of(v);
    };
    r.bound = at(r.theta);
    r.at_zero = at(0.0);
    r.at_one = at(1.0);
    return r;
}

SpectralField operator_apply(const SpectralField& W, double gamma, const RenormContext& ctx, const SpectralField& g) {
    const int K = ctx.band;
    const SpectralField Wk = W.with_band(K);
    const auto weight = [gamma](int x, int y, int z) { return std::pow(1.0 + x * x + y * y + z * z, -0.5 * gamma); };
    const SpectralField f = apply_symbol(g.with_band(K), weight);
    SpectralField r = multiply(ctx.convolve_V(multiply(Wk, f, 2 * K)), Wk, K);
    r -= ctx.apply_M(f);
    return apply_symbol(r, weight);
}

OperatorNormResult operator_norm(const SpectralField& W, double gamma, const RenormContext& ctx, double tol,
                                 int max_iter, uint64_t seed) {
    const double beta = ctx.V.beta();
    if (!(gamma > std::max(1.0 - beta, 0.5))) throw std::invalid_argument("operator_norm: need gamma > max(1 - beta, 1/2)");
    SpectralField v = standard_noise(ctx.band, seed, 0, 0x0E7u);
    v *= 1.0 / v.l2_norm();
    OperatorNormResult r;
    double prev = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        // One step of power iteration on A^2; |A v| for unit v is the Rayleigh
        // quotient of A^2 taken to the power 1/2.
        SpectralField w = operator_apply(W, gamma, ctx, v);
        const double sigma = w.l2_norm();
        r.history.push_back(sigma);
        if (sigma == 0.0) {
            r.value = 0.0;
            r.iterations = it;
            return r;
        }
        if (prev >= 0.0 && std::abs(sigma - prev) <= tol * sigma) {
            r.value = sigma;
            r.iterations = it;
            return r;
        }
        prev = sigma;
        SpectralField z = operator_apply(W, gamma, ctx, w);
        v = (1.0 / z.l2_norm()) * z;
    }
    throw ConvergenceError("operator_norm: power iteration did not converge", r.history);
}

// ---------------------------------------------------------------------------
// Inequality probes.

ProbeSeries finish_series(ProbeSeries s) {
    s.max_ratio = 0.0;
    for (double r : s.ratio) s.max_ratio = std::max(s.max_ratio, r);
    s.unbounded_trend = false;
    const std::size_t n = s.ratio.size();
    if (n >= 3) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (std::size_t i = n - 3; i < n; ++i) {
            if (!(s.ratio[i] > 0.0) || !(s.scale[i] > 0.0)) continue;
            const double x = std::log(s.scale[i]), y = std::log(s.ratio[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++m;
        }
        if (m == 3) {
            const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            s.unbounded_trend = slope > 0.1 && s.ratio.back() >= s.max_ratio;
        }
    }
    for (double r : s.ratio)
        if (!std::isfinite(r)) s.unbounded_trend = true;
    return s;
}

ProbeSeries visan_probe(const Potential& V, const std::vector<int>& freqs, std::size_t samples, uint64_t seed) {
    ProbeSeries s;
    s.name = "visan";
    const double beta = V.beta();
    auto ratio = [&](const SpectralField& f) {
        const int B = f.band();
        const SpectralField g =
            apply_symbol(f, [&](int x, int y, int z) { return std::pow(1.0 + x * x + y * y + z * z, -0.125 * beta); });
        const SpectralField g2 = multiply(g, g, 2 * B);
        const SpectralField f2 = multiply(f, f, 2 * B);
        const double lhs = pairing(g2, g2);
        const double rhs = pairing(apply_symbol(f2, [&](int x, int y, int z) { return V.vhat(x, y, z); }), f2);
        return lhs / rhs;
    };
    for (int N : freqs) {
        const int B = 2 * N;
        double worst = 0.0;
        if (N == freqs.front()) worst = ratio(SpectralField::constant(1.0, 0));
        CounterRng rng(seed, std::uint64_t(N), 0x715u);
        for (std::size_t i = 0; i < samples; ++i) {
            // Gaussian bump of width 1/N at a random centre.
            const double c1 = 2 * M_PI * rng.uniform(), c2 = 2 * M_PI * rng.uniform(), c3 = 2 * M_PI * rng.uniform();
            SpectralField bump(B);
            bump.for_each_mode([&](int x, int y, int z, std::size_t j) {
                const double e = std::exp(-0.5 * (x * x + y * y + z * z) / double(N * N));
                bump.data()[j] = e * std::polar(1.0, -(x * c1 + y * c2 + z * c3));
            });
            worst = std::max(worst, ratio(bump));
            // Noise on the annulus N/2 <= |n| <= 2N.
            SpectralField noise = standard_noise(B, seed, (std::uint64_t(N) << 32) | i, 0x716u);
            noise.for_each_mode([&](int x, int y, int z, std::size_t j) {
                const double r = mode_norm(x, y, z);
                if (r < 0.5 * N || r > 2.0 * N) noise.data()[j] = 0.0;
            });
            worst = std::max(worst, ratio(noise));
        }
        s.scale.push_back(N);
        s.ratio.push_back(worst);
    }
    return finish_series(s);
}

double counting_sum(const std::array<int, 3>& v, const std::array<int, 3>& w, double a, double b) {
    if (!(a > 0.0 && b > 0.0 && a + b > 1.0 && a + b < 3.0))
        throw std::invalid_argument("counting_sum: need a, b > 0 and 1 < a + b < 3");
    const double vn = mode_norm(v[0], v[1], v[2]), wn = mode_norm(w[0], w[1], w[2]);
    const int R = std::max(32, int(std::ceil(6.0 * std::max(vn, wn))));
    const int shift = int(std::ceil(std::max(vn, wn))) + 1;
    const int maxsq = 3 * (R + shift) * (R + shift) + 1;
    std::vector<double> pa(std::size_t(maxsq) + 1), pb(pa.size()), p2(pa.size());
    for (int q = 0; q <= maxsq; ++q) {
        pa[std::size_t(q)] = std::pow(1.0 + q, -0.5 * a);
        pb[std::size_t(q)] = std::pow(1.0 + q, -0.5 * b);
        p2[std::size_t(q)] = 1.0 / (1.0 + q);
    }
    double s = 0.0;
    for (int x = -R; x <= R; ++x)
        for (int y = -R; y <= R; ++y)
            for (int z = -R; z <= R; ++z) {
                const int q = x * x + y * y + z * z;
                if (q > R * R) continue;
                const int qa = (x + v[0]) * (x + v[0]) + (y + v[1]) * (y + v[1]) + (z + v[2]) * (z + v[2]);
                const int qb = (x + w[0]) * (x + w[0]) + (y + w[1]) * (y + w[1]) + (z + w[2]) * (z + w[2]);
                s += pa[std::size_t(qa)] * pb[std::size_t(qb)] * p2[std::size_t(q)];
            }
    // The shifts average out over spheres to second order, so beyond R the
    // summand is r^{-(a+b+2)} up to O(|v|^2 / r^2).
    return s + 4.0 * M_PI * std::pow(double(R), 1.0 - a - b) / (a + b - 1.0);
}

ProbeSeries counting_probe(double a, double b, const std::vector<int>& v_norms) {
    ProbeSeries s;
    s.name = "counting";
    for (int m : v_norms) {
        const std::array<int, 3> v{m, 0, 0};
        const double br = bracket(double(m));
        s.scale.push_back(br);
        s.ratio.push_back(counting_sum(v, v, a, b) / std::pow(br, 1.0 - a - b));
    }
    return finish_series(s);
}

ProbeSeries vhat_residual_probe(const Potential& V, int K) {
    ProbeSeries s;
    s.name = "vhat_residual";
    const double beta = V.beta();
    for (int N = 1; N <= K / 2; N *= 2) {
        double worst = 0.0;
        for (int x = 0; x <= std::min(K, 2 * N); ++x)
            for (int y = 0; y <= x; ++y)
                for (int z = 0; z <= y; ++z) {
                    const double r = mode_norm(x, y, z);
                    if (r < N || r >= 2 * N) continue;
                    worst = std::max(worst, std::abs(V.residual(x, y, z)) * std::pow(1.0 + r * r, 0.5 * (beta + 1.0)));
                }
        s.scale.push_back(N);
        s.ratio.push_back(worst);
    }
    return finish_series(s);
}

bool ProbeReport::ok() const {
    for (const auto& s : series)
        if (s.unbounded_trend || !std::isfinite(s.max_ratio)) return false;
    return true;
}

ProbeReport inequality_probes(const Potential& V, std::size_t samples, uint64_t seed) {
    ProbeReport r;
    r.series.push_back(visan_probe(V, {1, 2, 4, 8}, samples, seed));
    r.series.push_back(counting_probe(0.75, 0.75, {0, 1, 2, 4, 8, 16, 32}));
    const int K = V.mode() == PotentialMode::Physical ? V.table_band() : 32;
    r.series.push_back(vhat_residual_probe(V, K));
    return r;
}

double clipped_besov(const SpectralField& W, double s, double clip) { return std::min(besov_norm(W, s), clip); }

LaplaceReport laplace_cauchy_probe(const FieldFunctional& f, const std::vector<double>& T_list, const Potential& V,
                                   int band, int per_octave, DriftOptions opts, std::size_t samples, uint64_t seed,
                                   int workers) {
    LaplaceReport rep;
    for (double T : T_list) {
        const DriftModel model(TimeGrid::covering(T, per_octave, band), T, V, band, opts);
        struct Item {
            double logw = 0.0, y = 0.0;
        };
        std::vector<Item> items(samples);
        parallel_map_reduce(
            samples, workers,
            [&](std::size_t i) {
                const BrownianDriver d = BrownianDriver::sample(model.grid(), LatticeSpec(band), seed, i);
                const ReferenceSample s = model.sample_reference(d);
                return Item{model.gibbs_log_weight(s, d, 0.0), std::exp(-f(s.W_inf))};
            },
            std::size_t(0), [&](std::size_t& j, const Item& it) { items[j++] = it; });
        double mx = -std::numeric_limits<double>::infinity();
        for (const Item& it : items) mx = std::max(mx, it.logw);
        double sw = 0.0, swy = 0.0, sw2 = 0.0;
        for (const Item& it : items) {
            const double w = std::exp(it.logw - mx);
            sw += w;
            swy += w * it.y;
            sw2 += w * w;
        }
        LaplaceEntry e;
        e.T = T;
        e.value = swy / sw;
        double var = 0.0;
        for (const Item& it : items) {
            const double w = std::exp(it.logw - mx);
            var += w * w * (it.y - e.value) * (it.y - e.value);
        }
        e.stderr_ = std::sqrt(var) / sw;
        e.ess = sw * sw / sw2;
        rep.entries.push_back(e);
    }
    for (std::size_t i = 1; i < rep.entries.size(); ++i) {
        const auto& a = rep.entries[i - 1];
        const auto& b = rep.entries[i];
        const double se = std::hypot(a.stderr_, b.stderr_);
        rep.z_scores.push_back(se > 0.0 ? std::abs(b.value - a.value) / se
                                        : (b.value == a.value ? 0.0 : std::numeric_limits<double>::infinity()));
    }
    return rep;
}

}  // namespace hartree
