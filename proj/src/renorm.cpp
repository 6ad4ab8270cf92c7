#include "hartree/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace hartree {

namespace {

SpectralField table_field(const std::vector<double>& table, int band) {
    SpectralField f(band);
    for (std::size_t i = 0; i < table.size(); ++i) f.data()[i] = table[i];
    return f;
}

// Radial weights rho_t^T(n)^2 / <n>^2 (times an optional extra radial factor)
// laid out on the cube.
template <class Fn>
std::vector<double> radial(int band, Fn&& fn) {
    SpectralField layout(band);
    std::vector<double> out(layout.size());
    std::map<int, double> cache;
    layout.for_each_mode([&](int x, int y, int z, std::size_t i) {
        const int sq = x * x + y * y + z * z;
        auto it = cache.find(sq);
        if (it == cache.end()) it = cache.emplace(sq, fn(std::sqrt(double(sq)))).first;
        out[i] = it->second;
    });
    return out;
}

// Physical grid size on which the cubic nonlinearity of a band-B field can be
// formed pointwise and read off exactly on |n|_inf <= out.
int cubic_grid(int B, int out) { return fft_size_at_least(std::max(4 * B, 3 * B + out) + 1); }

}  // namespace

double rho_tT(double nnorm, double t, double T) { return rho_t(nnorm, t) * rho_t(nnorm, T); }

SpectralField RenormContext::convolve_V(const SpectralField& f) const {
    if (f.band() > 2 * band) throw BandError("convolve_V: field band exceeds the product band");
    return apply_symbol(f, vhat, 2 * band);
}

SpectralField RenormContext::apply_M(const SpectralField& f) const {
    if (f.band() > band) throw BandError("apply_M: field band exceeds the lattice band");
    return apply_symbol(f, m_symbol, band);
}

RenormContext build_context(double t, double T, const Potential& V, double lambda, int n_power, const LatticeSpec& lat) {
    return build_context(t, T, V, lambda, n_power, lat.K);
}

RenormContext build_context(double t, double T, const Potential& V, double lambda, int n_power, int band) {
    if (band < 0) throw std::invalid_argument("build_context: negative band");
    if (t < 0.0 || T < 0.0) throw std::invalid_argument("build_context: times must be nonnegative");
    if (n_power < 1) throw std::invalid_argument("build_context: n_power must be positive");
    RenormContext ctx;
    ctx.t = t;
    ctx.T = T;
    ctx.V = V;
    ctx.lambda = lambda;
    ctx.n_power = n_power;
    ctx.band = band;
    const int K = band;
    ctx.h = radial(K, [&](double r) {
        const double w = rho_tT(r, t, T);
        return w * w / (1.0 + r * r);
    });
    ctx.vhat = V.table(2 * K);
    const std::vector<double> hv3 = radial(K, [&](double r) {
        const double w = rho_tT(r, t, T);
        return w * w / std::pow(1.0 + r * r, 1.5);
    });
    ctx.a = 0.0;
    ctx.hermite_var = 0.0;
    for (std::size_t i = 0; i < ctx.h.size(); ++i) {
        ctx.a += ctx.h[i];
        ctx.hermite_var += hv3[i];
    }
    const SpectralField hf = table_field(ctx.h, K);
    const SpectralField hh = multiply(hf, hf, 2 * K);
    double b = 0.0;
    for (std::size_t i = 0; i < hh.size(); ++i) b += ctx.vhat[i] * hh.data()[i].real();
    ctx.b = b;
    // h is even, so sum_m V^(n + m) h(m) = (V^ * h)(n).
    const SpectralField ms = multiply(table_field(ctx.vhat, 2 * K), hf, K);
    ctx.m_symbol.resize(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) ctx.m_symbol[i] = ms.data()[i].real();
    return ctx;
}

std::vector<double> m_symbol_decomposed(const RenormContext& ctx, double N1, double N2) {
    const int K = ctx.band;
    const std::vector<double> w = radial(K, [&](double r) {
        const double c = rho_tT(r, ctx.t, ctx.T);
        return chi_block(r, N1) * chi_block(r, N2) * c * c / (1.0 + r * r);
    });
    const SpectralField ms = multiply(table_field(ctx.vhat, 2 * K), table_field(w, K), K);
    std::vector<double> out(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) out[i] = ms.data()[i].real();
    return out;
}

double correlation(const RenormContext& ctx, double N1, double N2, double y1, double y2, double y3) {
    const int K = ctx.band;
    double s = 0.0;
    for (int x = -K; x <= K; ++x)
        for (int y = -K; y <= K; ++y)
            for (int z = -K; z <= K; ++z) {
                const double r = mode_norm(x, y, z);
                const double c = rho_tT(r, ctx.t, ctx.T);
                const double w = chi_block(r, N1) * chi_block(r, N2) * c * c / (1.0 + r * r);
                if (w != 0.0) s += w * std::cos(x * y1 + y * y2 + z * y3);
            }
    return s;
}

PhysicalField correlation_grid(const RenormContext& ctx, double N1, double N2, int n) {
    const int K = ctx.band;
    const std::vector<double> w = radial(K, [&](double r) {
        const double c = rho_tT(r, ctx.t, ctx.T);
        return chi_block(r, N1) * chi_block(r, N2) * c * c / (1.0 + r * r);
    });
    return to_physical(table_field(w, K), n);
}

SpectralField wick_square(const SpectralField& f, const RenormContext& ctx) {
    SpectralField sq = multiply(f, f, 2 * f.band());
    sq(0, 0, 0) -= ctx.a;
    return sq;
}

SpectralField wick_cubic(const SpectralField& f, const RenormContext& ctx, int out_band) {
    const int B = f.band();
    const int out = out_band < 0 ? B : out_band;
    const int n = cubic_grid(B, out);
    const PhysicalField pf = to_physical(f, n);
    PhysicalField sq(n);
    for (std::size_t i = 0; i < sq.data().size(); ++i) sq[i] = pf[i] * pf[i];
    const SpectralField vsq = ctx.convolve_V(to_spectral(sq, 2 * B));
    PhysicalField prod = to_physical(vsq, n);
    for (std::size_t i = 0; i < prod.data().size(); ++i) prod[i] *= pf[i];
    SpectralField c = to_spectral(prod, out);
    const SpectralField fo = f.with_band(out);
    c.add_scaled(fo, -ctx.a * ctx.vhat0());
    c.add_scaled(ctx.apply_M(f.with_band(std::min(B, ctx.band))).with_band(out), -2.0);
    return c;
}

double wick_quartic_energy(const SpectralField& f, const RenormContext& ctx) {
    const SpectralField sq = multiply(f, f, 2 * f.band());
    const double quartic = pairing(ctx.convolve_V(sq), sq);
    const SpectralField mf = ctx.apply_M(f);
    const double ff = pairing(f, f);
    return quartic - 2.0 * ctx.a * ctx.vhat0() * ff - 4.0 * pairing(mf, f) + ctx.a * ctx.a * ctx.vhat0() + 2.0 * ctx.b;
}

double hermite_scalar(double x, int n, double sigma_sq) {
    if (n < 0) throw std::invalid_argument("hermite: order must be nonnegative");
    double hm = 1.0, h = x;
    if (n == 0) return 1.0;
    for (int k = 1; k < n; ++k) {
        const double next = x * h - k * sigma_sq * hm;
        hm = h;
        h = next;
    }
    return h;
}

SpectralField hermite_power(const SpectralField& g, int n, double sigma_sq, int out_band) {
    if (n < 0) throw std::invalid_argument("hermite_power: order must be nonnegative");
    const int B = g.band();
    const int full = n * B;
    const int out = out_band < 0 ? full : out_band;
    const int grid = fft_size_at_least(std::max(full + std::min(out, full) + 1, 2 * std::max(B, out) + 1));
    const PhysicalField pg = to_physical(g, grid);
    PhysicalField ph(grid);
    for (std::size_t i = 0; i < ph.data().size(); ++i) ph[i] = hermite_scalar(pg[i], n, sigma_sq);
    SpectralField res = to_spectral(ph, std::min(out, full));
    return out > full ? res.with_band(out) : res;
}

SpectralField translated_pair(const SpectralField& W, double y1, double y2, double y3, double N1, double N2,
                              const RenormContext& ctx) {
    const SpectralField a = translate(project(W, Filter::Block, N1), y1, y2, y3);
    const SpectralField b = project(W, Filter::Block, N2);
    SpectralField p = multiply(a, b, a.band() + b.band());
    p(0, 0, 0) -= correlation(ctx, N1, N2, y1, y2, y3);
    return p;
}

SpectralField binomial_expand_cubic(const SpectralField& W, const SpectralField& f, const RenormContext& ctx,
                                    int out_band) {
    const int B = std::max(W.band(), f.band());
    const int out = out_band < 0 ? B : out_band;
    const SpectralField w2 = wick_square(W, ctx);
    const SpectralField wf = multiply(W, f, 2 * B);
    const SpectralField f2 = multiply(f, f, 2 * B);
    const SpectralField vw2 = ctx.convolve_V(w2), vwf = ctx.convolve_V(wf), vf2 = ctx.convolve_V(f2);
    SpectralField res = wick_cubic(W, ctx, out);
    res += multiply(vw2, f, out);
    res.add_scaled(multiply(vwf, W, out), 2.0);
    res.add_scaled(ctx.apply_M(f).with_band(out), -2.0);
    res.add_scaled(multiply(vwf, f, out), 2.0);
    res += multiply(vf2, W, out);
    res += multiply(vf2, f, out);
    return res;
}

double binomial_expand_quartic(const SpectralField& W, const SpectralField& f, const RenormContext& ctx) {
    const int B = std::max(W.band(), f.band());
    const SpectralField w2 = wick_square(W, ctx);
    const SpectralField wf = multiply(W, f, 2 * B);
    const SpectralField f2 = multiply(f, f, 2 * B);
    double r = wick_quartic_energy(W, ctx);
    r += 4.0 * pairing(wick_cubic(W, ctx, f.band()), f);
    r += 2.0 * pairing(ctx.convolve_V(w2), f2);
    r += 4.0 * (pairing(ctx.convolve_V(wf), wf) - pairing(ctx.apply_M(f), f));
    r += 4.0 * pairing(ctx.convolve_V(f2), wf);
    r += pairing(ctx.convolve_V(f2), f2);
    return r;
}

}  // namespace hartree
