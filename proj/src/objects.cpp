#include "hartree/objects.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hartree/rng.hpp"

namespace hartree {

namespace {

SpectralField real_field(const std::vector<double>& table, int band) {
    SpectralField f(band);
    for (std::size_t i = 0; i < table.size(); ++i) f.data()[i] = table[i];
    return f;
}

std::size_t cube_index(int x, int y, int z, int band) {
    const int s = 2 * band + 1;
    return (std::size_t(x + band) * s + std::size_t(y + band)) * s + std::size_t(z + band);
}

// Canonical representative of the orbit of n under coordinate permutations
// and sign flips.
std::array<int, 3> orbit_key(int x, int y, int z) {
    std::array<int, 3> k{std::abs(x), std::abs(y), std::abs(z)};
    std::sort(k.begin(), k.end());
    return k;
}

}  // namespace

std::vector<RenormContext> context_ladder(const TimeGrid& grid, double T, const Potential& V, double lambda,
                                          int n_power, int band) {
    std::vector<RenormContext> out;
    out.reserve(grid.nodes().size());
    for (double t : grid.nodes()) out.push_back(build_context(t, T, V, lambda, n_power, band));
    return out;
}

SpectralField cubic_object(const GaussianPath& path, int node, const RenormContext& ctx) {
    return wick_cubic(path.at(node), ctx);
}

CubicVarianceOracle::CubicVarianceOracle(const RenormContext& ctx)
    : band_(ctx.band), h_(ctx.h), vhat_(ctx.vhat), h_field_(real_field(ctx.h, ctx.band)) {
    const int K = band_;
    SpectralField P = multiply(h_field_, h_field_, 2 * K);
    for (std::size_t i = 0; i < P.size(); ++i) P.data()[i] *= vhat_[i] * vhat_[i];
    const SpectralField A = multiply(P, h_field_, K);
    pair_.resize(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) pair_[i] = A.data()[i].real();
    grid_ = fft_size_at_least(4 * K + 1);
    h_phys_ = to_physical(h_field_, grid_).data();
}

double CubicVarianceOracle::pair_term(int x, int y, int z) const {
    if (std::max({std::abs(x), std::abs(y), std::abs(z)}) > band_) return 0.0;
    return pair_[cube_index(x, y, z, band_)];
}

double CubicVarianceOracle::cross_term(int x, int y, int z) const {
    const int K = band_;
    if (std::max({std::abs(x), std::abs(y), std::abs(z)}) > K) return 0.0;
    const auto key = orbit_key(x, y, z);
    auto it = cross_cache_.find(key);
    if (it != cross_cache_.end()) return it->second;
    const int nx = key[0], ny = key[1], nz = key[2];
    SpectralField g(K);
    g.for_each_mode([&](int a, int b, int c, std::size_t i) {
        g.data()[i] = h_[i] * vhat_[cube_index(nx - a, ny - b, nz - c, 2 * K)];
    });
    // g is real but not even, so its synthesis is complex: split it into the
    // even part (real synthesis) and the odd part (imaginary synthesis).
    SpectralField ge(K), go(K);
    g.for_each_mode([&](int a, int b, int c, std::size_t i) {
        const double p = g.data()[i].real(), q = g(-a, -b, -c).real();
        ge.data()[i] = 0.5 * (p + q);
        go.data()[i] = cplx(0.0, -0.5 * (p - q));
    });
    const PhysicalField pe = to_physical(ge, grid_), po = to_physical(go, grid_);
    // n-th coefficient of g^2 h by a separable phase sum.
    const int N = grid_;
    std::vector<cplx> ex(static_cast<std::size_t>(N)), ey(ex), ez(ex);
    for (int j = 0; j < N; ++j) {
        const double th = 2.0 * M_PI * j / N;
        ex[std::size_t(j)] = std::polar(1.0, -nx * th);
        ey[std::size_t(j)] = std::polar(1.0, -ny * th);
        ez[std::size_t(j)] = std::polar(1.0, -nz * th);
    }
    cplx total = 0.0;
    std::size_t idx = 0;
    for (int i = 0; i < N; ++i) {
        cplx sy = 0.0;
        for (int j = 0; j < N; ++j) {
            cplx sz = 0.0;
            for (int l = 0; l < N; ++l, ++idx) {
                const cplx G(pe[idx], po[idx]);
                sz += G * G * h_phys_[idx] * ez[std::size_t(l)];
            }
            sy += sz * ey[std::size_t(j)];
        }
        total += sy * ex[std::size_t(i)];
    }
    const double v = total.real() / (double(N) * N * N);
    cross_cache_.emplace(key, v);
    return v;
}

double CubicVarianceOracle::weighted_sum(const std::vector<double>& w) const {
    double s = 0.0;
    h_field_.for_each_mode([&](int x, int y, int z, std::size_t i) {
        if (w[i] != 0.0) s += w[i] * (*this)(x, y, z);
    });
    return s;
}

double cubic_variance_oracle(int x, int y, int z, const RenormContext& ctx) {
    return CubicVarianceOracle(ctx)(x, y, z);
}

double cubic_variance_bruteforce(int x, int y, int z, const RenormContext& ctx) {
    const int K = ctx.band;
    auto h = [&](int a, int b, int c) {
        if (std::max({std::abs(a), std::abs(b), std::abs(c)}) > K) return 0.0;
        return ctx.h[cube_index(a, b, c, K)];
    };
    auto v = [&](int a, int b, int c) { return ctx.vhat[cube_index(a, b, c, 2 * K)]; };
    double s = 0.0;
    for (int a1 = -K; a1 <= K; ++a1)
        for (int a2 = -K; a2 <= K; ++a2)
            for (int a3 = -K; a3 <= K; ++a3) {
                const double h1 = h(a1, a2, a3);
                if (h1 == 0.0) continue;
                for (int b1 = -K; b1 <= K; ++b1)
                    for (int b2 = -K; b2 <= K; ++b2)
                        for (int b3 = -K; b3 <= K; ++b3) {
                            const int c1 = x - a1 - b1, c2 = y - a2 - b2, c3 = z - a3 - b3;
                            const double hh = h1 * h(b1, b2, b3) * h(c1, c2, c3);
                            if (hh == 0.0) continue;
                            // (1/6) (sum over S_3 of V^(pair))^2 with the sum 2(V12 + V13 + V23).
                            const double w = 2.0 * (v(a1 + b1, a2 + b2, a3 + b3) + v(a1 + c1, a2 + c2, a3 + c3) +
                                                    v(b1 + c1, b2 + c2, b3 + c3));
                            s += w * w / 6.0 * hh;
                        }
            }
    return s;
}

std::vector<SpectralField> w3_bold(const GaussianPath& path, const std::vector<RenormContext>& ladder) {
    const int m = path.grid().intervals();
    if (int(ladder.size()) != m + 1) throw std::invalid_argument("w3_bold: need one context per node");
    const SlotAmplitudes& amps = path.amplitudes();
    std::vector<SpectralField> out;
    out.reserve(std::size_t(m) + 1);
    out.emplace_back(path.band());
    for (int k = 0; k < m; ++k) {
        const std::vector<double>& a = amps.amp(k + 1);
        SpectralField next = out.back();
        const SpectralField c = cubic_object(path, k, ladder[std::size_t(k)]);
        for (std::size_t i = 0; i < next.size(); ++i) next.data()[i] += a[i] * a[i] * c.data()[i];
        out.push_back(std::move(next));
    }
    return out;
}

double w3_variance_oracle(int x, int y, int z, const SlotAmplitudes& amps,
                          const std::vector<CubicVarianceOracle>& oracles) {
    const int m = int(oracles.size()) - 1;
    std::vector<double> c(static_cast<std::size_t>(m)), o(c);
    for (int j = 0; j < m; ++j) {
        c[std::size_t(j)] = amps.variance(j + 1, x, y, z);
        o[std::size_t(j)] = oracles[std::size_t(j)](x, y, z);
    }
    double s = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) s += c[std::size_t(i)] * c[std::size_t(j)] * o[std::size_t(std::min(i, j))];
    return s;
}

double quartic_energy_pathwise(const GaussianPath& path, int node, const std::vector<RenormContext>& ladder,
                               QuarticMethod method) {
    if (node < 0 || node > path.grid().intervals()) throw std::invalid_argument("quartic_energy_pathwise: bad node");
    if (method == QuarticMethod::Direct) return wick_quartic_energy(path.at(node), ladder[std::size_t(node)]);
    double q = wick_quartic_energy(path.at(0), ladder[0]);
    for (int k = 0; k < node; ++k)
        q += 4.0 * pairing(cubic_object(path, k, ladder[std::size_t(k)]), path.slot_increment(k + 1));
    return q;
}

OracleValue quartic_second_moment_oracle(const RenormContext& ctx, int exact_band, std::size_t mc_samples,
                                         uint64_t seed) {
    const int K = ctx.band;
    const CubicVarianceOracle oracle(ctx);
    OracleValue out;
    double pair = 0.0;
    SpectralField(K).for_each_mode([&](int x, int y, int z, std::size_t i) {
        if (ctx.h[i] != 0.0) pair += ctx.h[i] * oracle.pair_term(x, y, z);
    });
    if (K <= exact_band) {
        double cross = 0.0;
        SpectralField(K).for_each_mode([&](int x, int y, int z, std::size_t i) {
            if (ctx.h[i] != 0.0) cross += ctx.h[i] * oracle.cross_term(x, y, z);
        });
        out.value = 8.0 * pair + 16.0 * cross;
        return out;
    }
    // Importance sampling of sum_{n1,n2,n3} V^(n12) V^(n13) h1 h2 h3 h(n123).
    std::vector<double> cdf(ctx.h.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < ctx.h.size(); ++i) cdf[i] = (acc += ctx.h[i]);
    const int s = 2 * K + 1;
    auto draw = [&](CounterRng& rng) {
        const double u = rng.uniform() * acc;
        const std::size_t i = std::size_t(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        const int j = int(std::min(i, cdf.size() - 1));
        return std::array<int, 3>{j / (s * s) - K, (j / s) % s - K, j % s - K};
    };
    CounterRng rng(seed, 0, 0x51u);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t n = 1; n <= mc_samples; ++n) {
        const auto a = draw(rng), b = draw(rng), c = draw(rng);
        const int x = a[0] + b[0] + c[0], y = a[1] + b[1] + c[1], z = a[2] + b[2] + c[2];
        double v = 0.0;
        if (std::max({std::abs(x), std::abs(y), std::abs(z)}) <= K) {
            v = ctx.vhat[cube_index(a[0] + b[0], a[1] + b[1], a[2] + b[2], 2 * K)] *
                ctx.vhat[cube_index(a[0] + c[0], a[1] + c[1], a[2] + c[2], 2 * K)] * ctx.h[cube_index(x, y, z, K)];
        }
        const double d = v - mean;
        mean += d / double(n);
        m2 += d * (v - mean);
    }
    const double scale = acc * acc * acc;
    const double se = std::sqrt(m2 / double(mc_samples - 1) / double(mc_samples));
    out.value = 8.0 * pair + 16.0 * scale * mean;
    out.stderr_ = 16.0 * scale * se;
    return out;
}

}  // namespace hartree
