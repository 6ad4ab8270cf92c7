#include <limits>

#include "doctest.h"
#include "hartree/gaussian_control.hpp"
#include "hartree/renorm.hpp"
#include "test_util.hpp"

using namespace hartree;
using testutil::random_field;
using testutil::rel_err;
using testutil::RunningStats;

static const double kInf = std::numeric_limits<double>::infinity();

namespace {

double h_of(int x, int y, int z, double t, double T) {
    const double r = mode_norm(x, y, z);
    const double w = rho_t(r, t) * rho_t(r, T);
    return w * w / (1.0 + r * r);
}

}  // namespace

TEST_CASE("context on the one-mode lattice") {
    const Potential V = Potential::fourier(1.0, 1.7);
    const RenormContext ctx = build_context(0.0, 0.0, V, 1.0, 5, 0);
    CHECK(ctx.a == 1.0);
    CHECK(ctx.b == doctest::Approx(1.7).epsilon(1e-14));
    CHECK(ctx.hermite_var == 1.0);
    SpectralField probe(0);
    probe(0, 0, 0) = 1.0;
    CHECK(ctx.apply_M(probe)(0, 0, 0).real() == doctest::Approx(1.7).epsilon(1e-14));
}

TEST_CASE("renormalization constants against brute-force sums") {
    const int K = 8;
    const Potential V = Potential::fourier(1.0);
    const RenormContext ctx = build_context(kInf, kInf, V, 1.0, 5, LatticeSpec(K));
    double a = 0.0, hv = 0.0, b = 0.0;
    std::vector<double> hs;
    std::vector<std::array<int, 3>> ms;
    for (int x = -K; x <= K; ++x)
        for (int y = -K; y <= K; ++y)
            for (int z = -K; z <= K; ++z) {
                const double h = h_of(x, y, z, kInf, kInf);
                a += h;
                hv += h / std::sqrt(1.0 + x * x + y * y + z * z);
                hs.push_back(h);
                ms.push_back({x, y, z});
            }
    for (std::size_t i = 0; i < ms.size(); ++i)
        for (std::size_t j = 0; j < ms.size(); ++j)
            b += V.vhat(ms[i][0] + ms[j][0], ms[i][1] + ms[j][1], ms[i][2] + ms[j][2]) * hs[i] * hs[j];
    CHECK(rel_err(ctx.a, a) < 1e-12);
    CHECK(rel_err(ctx.hermite_var, hv) < 1e-12);
    CHECK(rel_err(ctx.b, b) < 1e-10);
}

TEST_CASE("multiplier symbol against the direct double sum") {
    for (double beta : {0.25, 1.0}) {
        const int K = 5;
        const Potential V = Potential::fourier(beta);
        const RenormContext ctx = build_context(1.5, 3.0, V, 1.0, 5, LatticeSpec(K));
        SpectralField layout(K);
        double worst = 0.0;
        layout.for_each_mode([&](int x, int y, int z, std::size_t i) {
            double s = 0.0;
            for (int p = -K; p <= K; ++p)
                for (int q = -K; q <= K; ++q)
                    for (int r = -K; r <= K; ++r) s += V.vhat(x + p, y + q, z + r) * h_of(p, q, r, 1.5, 3.0);
            worst = std::max(worst, rel_err(ctx.m_symbol[i], s));
        });
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("a_N identity and monotonicity") {
    const Potential V = Potential::fourier(0.75);
    const LatticeSpec lat(6);
    for (double N : {1.0, 2.0, 5.0}) {
        const RenormContext c1 = build_context(kInf, N, V, 1.0, 5, lat), c2 = build_context(N, kInf, V, 1.0, 5, lat);
        CHECK(c1.a == c2.a);
        CHECK(c1.b == doctest::Approx(c2.b).epsilon(1e-14));
        CHECK(c1.m_symbol == c2.m_symbol);
    }
    double pa = 0.0, pb = 0.0;
    for (double t : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 30.0}) {
        const RenormContext c = build_context(t, 3.0, V, 1.0, 5, lat);
        CHECK(c.a >= pa);
        CHECK(c.b >= pb - 1e-12);
        pa = c.a;
        pb = c.b;
    }
    pa = 0.0;
    for (double T : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        const RenormContext c = build_context(2.0, T, V, 1.0, 5, lat);
        CHECK(c.a >= pa);
        pa = c.a;
    }
}

TEST_CASE("Wick square") {
    const Potential V = Potential::fourier(1.0);
    const RenormContext ctx = build_context(kInf, 2.0, V, 1.0, 5, LatticeSpec(4));
    const SpectralField z = wick_square(SpectralField(4), ctx);
    CHECK(z(0, 0, 0).real() == -ctx.a);
    CHECK(z.l2_norm() == doctest::Approx(ctx.a));
    SpectralField f(4);
    f(1, 0, 0) = 1.0;
    f(-1, 0, 0) = 1.0;
    const SpectralField w = wick_square(f, ctx);
    CHECK(w(0, 0, 0).real() == doctest::Approx(2.0 - ctx.a).epsilon(1e-14));
    CHECK(w(2, 0, 0).real() == doctest::Approx(1.0).epsilon(1e-14));
    RunningStats m0, m1;
    for (int s = 0; s < 4000; ++s) {
        const SpectralField W = sample_gff(4, 2.0, 17, uint64_t(s));
        const SpectralField q = wick_square(W, ctx);
        m0.add(q(0, 0, 0).real());
        m1.add(q(1, 1, 0).real());
    }
    CHECK(std::abs(m0.mean) < 4 * m0.stderr_mean());
    CHECK(std::abs(m1.mean) < 4 * m1.stderr_mean());
}

TEST_CASE("Wick cubic") {
    const Potential V = Potential::fourier(0.5);
    const RenormContext ctx = build_context(kInf, 2.0, V, 1.0, 5, LatticeSpec(4));
    CHECK(wick_cubic(SpectralField(4), ctx).l2_norm() == 0.0);

    // One-mode algebra: on the lattice {0}, a = sigma^2 = 1 and the cubic
    // becomes V^(0) H_3(c, 1).
    const RenormContext c0 = build_context(0.0, 0.0, V, 1.0, 5, 0);
    for (double c : {-1.3, 0.2, 2.5}) {
        const SpectralField f = SpectralField::constant(c, 0);
        CHECK(wick_cubic(f, c0)(0, 0, 0).real() == doctest::Approx(V.vhat0() * (c * c * c - 3 * c)).epsilon(1e-13));
    }

    // Full band against direct convolutions.
    const SpectralField f = random_field(2, 4, 1.0);
    const SpectralField full = wick_cubic(f, ctx, 6);
    SpectralField expect = multiply_direct(ctx.convolve_V(multiply_direct(f, f, 4)), f, 6);
    expect.add_scaled(f.with_band(6), -ctx.a * ctx.vhat0());
    expect.add_scaled(ctx.apply_M(f.with_band(4)).with_band(6), -2.0);
    CHECK((full - expect).l2_norm() < 1e-11 * expect.l2_norm());

    RunningStats m[3];
    const int modes[3][3] = {{0, 0, 0}, {1, 0, 0}, {2, 1, -1}};
    for (int s = 0; s < 4000; ++s) {
        const SpectralField W = sample_gff(4, 2.0, 23, uint64_t(s));
        const SpectralField q = wick_cubic(W, ctx);
        for (int k = 0; k < 3; ++k) m[k].add(q(modes[k][0], modes[k][1], modes[k][2]).real());
    }
    for (auto& r : m) CHECK(std::abs(r.mean) < 4 * r.stderr_mean());
}

TEST_CASE("Wick quartic energy") {
    const Potential V = Potential::fourier(1.0);
    const RenormContext ctx = build_context(kInf, kInf, V, 1.0, 5, LatticeSpec(1));
    CHECK(wick_quartic_energy(SpectralField(1), ctx) == doctest::Approx(ctx.a * ctx.a * V.vhat0() + 2 * ctx.b));

    // Two-mode field alpha + g (e^{ix} + e^{-ix}), expanded by hand.
    const double al = 0.7, g = -0.4;
    SpectralField f(1);
    f(0, 0, 0) = al;
    f(1, 0, 0) = g;
    f(-1, 0, 0) = g;
    SpectralField e0(1), e1(1);
    e0(0, 0, 0) = 1.0;
    e1(1, 0, 0) = 1.0;
    const double m0 = ctx.apply_M(e0)(0, 0, 0).real(), m1 = ctx.apply_M(e1)(1, 0, 0).real();
    const double s0 = al * al + 2 * g * g;
    const double hand = V.vhat0() * s0 * s0 + 2 * V.vhat(1, 0, 0) * std::pow(2 * al * g, 2) +
                        2 * V.vhat(2, 0, 0) * std::pow(g, 4) - 2 * ctx.a * V.vhat0() * s0 -
                        4 * (m0 * al * al + 2 * m1 * g * g) + ctx.a * ctx.a * V.vhat0() + 2 * ctx.b;
    CHECK(wick_quartic_energy(f, ctx) == doctest::Approx(hand).epsilon(1e-12));

    // Zero mean under the GFF at t = T = inf.
    const RenormContext c4 = build_context(kInf, kInf, V, 1.0, 5, LatticeSpec(3));
    RunningStats q;
    for (int s = 0; s < 4000; ++s) q.add(wick_quartic_energy(sample_gff(3, kInf, 31, uint64_t(s)), c4));
    CHECK(std::abs(q.mean) < 4 * q.stderr_mean());
}

TEST_CASE("Hermite powers") {
    const SpectralField g = random_field(2, 8, 1.0);
    CHECK((hermite_power(g, 0, 0.7) - SpectralField::constant(1.0, 0)).l2_norm() < 1e-14);
    CHECK((hermite_power(g, 1, 0.7) - g).l2_norm() < 1e-13);
    SpectralField h2 = multiply_direct(g, g, 4);
    h2(0, 0, 0) -= 0.7;
    CHECK((hermite_power(g, 2, 0.7) - h2).l2_norm() < 1e-13);
    CHECK(hermite_scalar(1.5, 3, 2.0) == doctest::Approx(1.5 * 1.5 * 1.5 - 3 * 2.0 * 1.5));
    CHECK(hermite_scalar(0.0, 5, 1.3) == 0.0);

    // Binomial formula H_n(g + h) = sum C(n,k) H_k(g) h^{n-k}.
    for (int trial = 0; trial < 5; ++trial) {
        const SpectralField a = random_field(2, 40 + trial, 1.0), b = random_field(2, 60 + trial, 1.0);
        for (int n : {3, 5}) {
            const SpectralField lhs = hermite_power(a + b, n, 0.9);
            SpectralField rhs(n * 2);
            SpectralField bp = SpectralField::constant(1.0, 0);  // b^{n-k}, built downwards
            std::vector<SpectralField> bpow{bp};
            for (int k = 1; k <= n; ++k) bpow.push_back(multiply_direct(bpow.back(), b, 2 * k));
            double binom = 1.0;
            for (int k = 0; k <= n; ++k) {
                if (k > 0) binom = binom * (n - k + 1) / k;
                rhs += binom * multiply_direct(hermite_power(a, k, 0.9), bpow[std::size_t(n - k)], 2 * n);
            }
            CHECK((lhs - rhs).l2_norm() <= 1e-9 * rhs.l2_norm());
        }
    }
}

TEST_CASE("correlation function and translated pairs") {
    const Potential V = Potential::fourier(1.0);
    const int K = 4;
    const RenormContext ctx = build_context(kInf, 2.0, V, 1.0, 5, LatticeSpec(K));
    for (double N1 : {1.0, 2.0, 4.0})
        for (double N2 : {1.0, 2.0, 4.0}) {
            double s = 0.0;
            for (int x = -K; x <= K; ++x)
                for (int y = -K; y <= K; ++y)
                    for (int z = -K; z <= K; ++z) {
                        const double r = mode_norm(x, y, z);
                        s += chi_block(r, N1) * chi_block(r, N2) * h_of(x, y, z, kInf, 2.0);
                    }
            CHECK(correlation(ctx, N1, N2, 0, 0, 0) == doctest::Approx(s).epsilon(1e-13));
            CHECK(correlation(ctx, N1, N2, 0.3, -1.0, 2.0) == doctest::Approx(correlation(ctx, N1, N2, -0.3, 1.0, -2.0)));
        }
    RunningStats m0, my;
    for (int s = 0; s < 4000; ++s) {
        const SpectralField W = sample_gff(K, 2.0, 41, uint64_t(s));
        m0.add(translated_pair(W, 0, 0, 0, 2.0, 2.0, ctx)(0, 0, 0).real());
        my.add(translated_pair(W, 0.5, 0.25, 0, 2.0, 4.0, ctx)(0, 0, 0).real());
    }
    CHECK(std::abs(m0.mean) < 4 * m0.stderr_mean());
    CHECK(std::abs(my.mean) < 4 * my.stderr_mean());
}

TEST_CASE("physical-space representation of the decomposed multiplier") {
    const int K = 4;
    const Potential V = make_potential(0.5, 1.0, K, PotentialMode::Physical);
    const RenormContext ctx = build_context(kInf, 2.0, V, 1.0, 5, LatticeSpec(K));
    const int n = fft_size_at_least(4 * K + 1);
    const PhysicalField vphys = V.band_limited_physical(2 * K, n);
    for (double N1 : {1.0, 2.0})
        for (double N2 : {2.0, 4.0}) {
            PhysicalField cv = correlation_grid(ctx, N1, N2, n);
            for (std::size_t i = 0; i < cv.data().size(); ++i) cv[i] *= vphys[i];
            const SpectralField sym = to_spectral(cv, K);
            const std::vector<double> m = m_symbol_decomposed(ctx, N1, N2);
            const SpectralField f = random_field(K, 3);
            const SpectralField lhs = apply_symbol(f, m, K);
            SpectralField rhs(K);
            for (std::size_t i = 0; i < rhs.size(); ++i) rhs.data()[i] = sym.data()[i] * f.data()[i];
            CHECK((lhs - rhs).l2_norm() <= 1e-9 * lhs.l2_norm());
        }
}

TEST_CASE("binomial formulas") {
    const int K = 6;
    for (double beta : {0.25, 1.0}) {
        const Potential V = Potential::fourier(beta);
        const RenormContext ctx = build_context(2.0, 4.0, V, 1.0, 5, LatticeSpec(K));
        double worst_c = 0.0, worst_q = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const SpectralField W = random_field(K, 300 + trial, 1.0), f = random_field(K, 400 + trial, 1.5);
            const SpectralField lhs = wick_cubic(W + f, ctx);
            const SpectralField rhs = binomial_expand_cubic(W, f, ctx);
            worst_c = std::max(worst_c, (lhs - rhs).l2_norm() / lhs.l2_norm());
            worst_q = std::max(worst_q, rel_err(wick_quartic_energy(W + f, ctx), binomial_expand_quartic(W, f, ctx)));
        }
        CHECK(worst_c < 1e-9);
        CHECK(worst_q < 1e-9);
    }
    const Potential V = Potential::fourier(1.0);
    const RenormContext ctx = build_context(kInf, kInf, V, 1.0, 5, LatticeSpec(3));
    const SpectralField W = random_field(3, 1, 1.0), f = random_field(3, 2, 1.0);
    CHECK(binomial_expand_quartic(W, SpectralField(3), ctx) == doctest::Approx(wick_quartic_energy(W, ctx)));
    // W = 0: only the pure f^4 term and the constants survive.
    const double at_zero = binomial_expand_quartic(SpectralField(3), f, ctx);
    const SpectralField f2 = multiply_direct(f, f, 6);
    const double expect = wick_quartic_energy(SpectralField(3), ctx) - 2 * ctx.a * V.vhat0() * pairing(f, f) -
                          4 * pairing(ctx.apply_M(f), f) + pairing(ctx.convolve_V(f2), f2);
    CHECK(at_zero == doctest::Approx(expect).epsilon(1e-12));
}
