#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "hartree/spectral.hpp"
#include "test_util.hpp"

using namespace hartree;
using testutil::random_field;

TEST_CASE("cutoff profile values and shape") {
    CHECK(cutoff_rho(0.2) == 1.0);
    CHECK(cutoff_rho(5.0) == 0.0);
    CHECK(cutoff_rho(1.0) == doctest::Approx(0.5).epsilon(1e-15));
    double prev = 1.0;
    for (int i = 0; i <= 4000; ++i) {
        const double y = 5.0 * i / 4000.0;
        const double r = cutoff_rho(y);
        CHECK(r <= prev + 1e-15);
        prev = r;
    }
    for (double y = 0.5; y <= 2.0; y += 0.01) {
        CHECK(cutoff_rho(y) > 0.0);
        CHECK(-cutoff_rho_prime(y) > 0.0);
    }
    // Derivative matches a central difference and vanishes at the junctions.
    for (double y : {0.3, 0.7, 1.3, 2.9}) {
        const double h = 1e-6;
        CHECK(cutoff_rho_prime(y) == doctest::Approx((cutoff_rho(y + h) - cutoff_rho(y - h)) / (2 * h)).epsilon(1e-6));
    }
    CHECK(std::abs(cutoff_rho_prime(0.2500001)) < 1e-5);
    CHECK(std::abs(cutoff_rho_prime(3.9999999)) < 1e-6);
}

TEST_CASE("rho_t and sigma_t^2") {
    for (double t : {0.0, 1.0, 7.5, 100.0}) {
        CHECK(rho_t(0.0, t) == 1.0);
        CHECK(sigma_t_sq(0.0, t) == 0.0);
    }
    CHECK(rho_t(8.0, 0.0) == 0.0);
    // int_0^inf sigma_t^2 dt = 1 - rho_0^2, by adaptive quadrature of the
    // analytic derivative.
    for (double r : {0.5, 1.0, 2.0, std::sqrt(3.0), 8.0, 20.0}) {
        using boost::math::quadrature::gauss_kronrod;
        const double upper = 8.0 * r + 8.0;
        double total = 0.0;
        for (int p = 0; p < 64; ++p) {
            const double a = upper * p / 64, b = upper * (p + 1) / 64;
            total += gauss_kronrod<double, 31>::integrate([&](double t) { return sigma_t_sq(r, t); }, a, b, 8, 1e-13);
        }
        const double r0 = rho_t(r, 0.0);
        CHECK(total == doctest::Approx(1.0 - r0 * r0).epsilon(1e-8));
    }
    // Monotone non-decreasing in t.
    for (double r : {0.7, 3.0, 11.0}) {
        double prev = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double v = rho_t(r, 0.05 * i);
            CHECK(v >= prev - 1e-15);
            prev = v;
        }
    }
}

TEST_CASE("projections") {
    const SpectralField one = SpectralField::constant(1.0, 4);
    const SpectralField p = project(one, Filter::LowPass, 2.0);
    CHECK(p(0, 0, 0).real() == 1.0);

    const SpectralField f = random_field(8, 3);
    SpectralField sum(8);
    for (double N = 1.0; N <= 64.0; N *= 2.0) sum += project(f, Filter::Block, N);
    CHECK((sum - f).l2_norm() < 1e-13 * f.l2_norm());

    // chi_4 is not idempotent: compare against the symbol-level computation.
    const SpectralField p4 = project(f, Filter::Block, 4.0);
    const SpectralField p44 = project(p4, Filter::Block, 4.0);
    double expect = 0.0;
    f.for_each_mode([&](int x, int y, int z, std::size_t i) {
        const double c = chi_block(mode_norm(x, y, z), 4.0);
        expect += std::norm((c * c - c) * f.data()[i]);
    });
    CHECK((p44 - p4).l2_norm() == doctest::Approx(std::sqrt(expect)).epsilon(1e-12));
    CHECK((p44 - p4).l2_norm() > 0.0);
    CHECK(p44.hermitian_defect() < 1e-14);
}

TEST_CASE("exact products") {
    const SpectralField one = SpectralField::constant(1.0, 0);
    const SpectralField g = random_field(3, 11);
    const LatticeSpec lat(3);
    CHECK((multiply(lat, one, g) - g.with_band(3)).l2_norm() < 1e-13);

    const SpectralField e1 = SpectralField::cosine_mode(1, 0, 0, 1);
    const SpectralField sq = multiply(LatticeSpec(1), e1, e1);
    CHECK(sq.band() == 2);
    CHECK(std::abs(sq(0, 0, 0) - cplx(2.0)) < 1e-14);
    CHECK(std::abs(sq(2, 0, 0) - cplx(1.0)) < 1e-14);
    CHECK(std::abs(sq(-2, 0, 0) - cplx(1.0)) < 1e-14);
    CHECK(std::abs(sq(1, 0, 0)) < 1e-14);

    CHECK_THROWS_AS(multiply(LatticeSpec(2), random_field(2, 1), random_field(3, 2)), BandError);

    for (int k = 0; k < 5; ++k) {
        const SpectralField a = random_field(4, 100 + k), b = random_field(3, 200 + k);
        const SpectralField fast = multiply(a, b, 7), slow = multiply_direct(a, b, 7);
        CHECK((fast - slow).l2_norm() <= 1e-10 * slow.l2_norm());
        CHECK(fast.hermitian_defect() < 1e-12);
        // Mode 0 of the product against the explicit double sum.
        cplx s = 0.0;
        for (int x = -3; x <= 3; ++x)
            for (int y = -3; y <= 3; ++y)
                for (int z = -3; z <= 3; ++z) s += a(x, y, z) * b(-x, -y, -z);
        CHECK(std::abs(fast(0, 0, 0) - s) < 1e-12 * std::abs(s) + 1e-14);
    }
}

TEST_CASE("Parseval and integration") {
    for (int k = 0; k < 100; ++k) {
        const SpectralField f = random_field(3, 1000 + k), g = random_field(3, 2000 + k);
        const double via_product = integrate(multiply(f, g, 0));
        CHECK(testutil::rel_err(pairing(f, g), via_product) < 1e-10);
    }
    CHECK(integrate(SpectralField::constant(1.0, 3)) == 1.0);
    CHECK(integrate(SpectralField::cosine_mode(1, 2, 0, 3)) == 0.0);
    // Quadrature on an (exact) uniform grid from direct synthesis.
    const SpectralField f = random_field(2, 5);
    const int n = 6;
    double q = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                q += testutil::point_value(f, 2 * M_PI * i / n, 2 * M_PI * j / n, 2 * M_PI * l / n);
    q /= n * n * n;
    CHECK(std::abs(integrate(f) - q) < 1e-10);
}

TEST_CASE("physical transforms are real and round-trip") {
    const SpectralField f = random_field(5, 9);
    const PhysicalField p = to_physical(f, 16);
    CHECK(p.data()[3] == doctest::Approx(testutil::point_value(f, 0, 0, 2 * M_PI * 3 / 16)).epsilon(1e-10));
    const SpectralField back = to_spectral(p, 5);
    CHECK((back - f).l2_norm() < 1e-12 * f.l2_norm());
    // Imaginary part of the synthesis vanishes for a Hermitian field.
    double im = 0.0;
    for (int x = -5; x <= 5; ++x)
        for (int y = -5; y <= 5; ++y)
            for (int z = -5; z <= 5; ++z) {
                const double ph = 0.3 * x - 1.1 * y + 2.0 * z;
                im += (f(x, y, z) * cplx(std::cos(ph), std::sin(ph))).imag();
            }
    CHECK(std::abs(im) < 1e-10 * f.l2_norm());
}

TEST_CASE("norms and translation") {
    const SpectralField f = random_field(4, 21);
    CHECK(sobolev_norm(f, 0.0) == doctest::Approx(f.l2_norm()).epsilon(1e-14));
    CHECK((translate(f, 0, 0, 0) - f).l2_norm() == 0.0);
    const SpectralField t = translate(f, 0.4, -1.0, 2.2);
    CHECK(t.hermitian_defect() < 1e-13);
    CHECK(testutil::point_value(t, 1.0, 1.0, 1.0) == doctest::Approx(testutil::point_value(f, 0.6, 2.0, -1.2)).epsilon(1e-10));

    // Single mode of norm N: each block contributes chi_M(N) times the
    // amplitude 2 of the cosine; the sup over blocks is the Besov norm.
    for (int N : {2, 4, 8}) {
        const SpectralField c = SpectralField::cosine_mode(N, 0, 0, N);
        double expect = 0.0;
        for (double M = 1.0; M <= 64.0; M *= 2.0) expect = std::max(expect, M * 2.0 * std::abs(chi_block(N, M)));
        CHECK(besov_norm(c, 1.0) == doctest::Approx(expect).epsilon(1e-10));
        CHECK(besov_norm(c, 1.0) > 1.0 * N);
        CHECK(besov_norm(c, 1.0) <= 2.0 * N * 2.0);
    }
}

TEST_CASE("Fourier-built potential") {
    const Potential v = make_potential(1.0, 2.0, 4, PotentialMode::Fourier);
    CHECK(v.vhat0() == 2.0);
    CHECK(v.vhat(1, 0, 0) == doctest::Approx(2.0 * std::pow(2.0, -0.5)).epsilon(1e-15));
    CHECK(v.residual(3, 1, 2) == 0.0);
    CHECK_THROWS(make_potential(3.0, 1.0, 4, PotentialMode::Fourier));
    CHECK_THROWS(make_potential(0.0, 1.0, 4, PotentialMode::Fourier));
    CHECK_THROWS(make_potential(1.0, -1.0, 4, PotentialMode::Fourier));
}

TEST_CASE("physical-built potential") {
    // Reference coefficients from an independent 30-digit radial quadrature.
    struct Ref {
        double beta;
        int x, y, z;
        double value;
    };
    const Ref refs[] = {{1.0, 0, 0, 0, 1.2140846016432674},   {1.0, 1, 0, 0, 0.93296421436883038},
                        {1.0, 1, 1, 0, 0.78656264658663866},  {1.0, 3, 0, 0, 0.32599724430867424},
                        {1.0, 4, 3, 0, 0.2031711000438923},   {0.25, 0, 0, 0, 1.128167876166119},
                        {0.25, 0, 1, 0, 0.97321024199567702}, {0.25, 1, 0, 1, 0.92730810022809565},
                        {0.25, 0, 0, 3, 0.75949921506533324}, {0.25, 5, 0, 0, 0.66915798810850818}};
    for (const auto& r : refs) {
        const Potential v = Potential::physical(r.beta, 1.0, 6);
        CHECK(v.vhat(r.x, r.y, r.z) == doctest::Approx(r.value).epsilon(1e-10));
    }
    for (double beta : {0.25, 1.0, 2.0}) {
        const int K = 24;
        const Potential v = make_potential(beta, 1.0, K / 2, PotentialMode::Physical);
        // The weighted residual must stay bounded: its sup over the outer
        // shells may not exceed the sup over the inner ones.
        double inner = 0.0, outer = 0.0;
        for (int x = 0; x <= K; ++x)
            for (int y = 0; y <= x; ++y)
                for (int z = 0; z <= y; ++z) {
                    const double r = mode_norm(x, y, z);
                    CHECK(v.vhat(x, y, z) > 0.0);
                    CHECK(v.vhat(x, y, z) == v.vhat(-x, -y, -z));
                    if (r < 4.0 || r > K) continue;
                    const double w = std::abs(v.residual(x, y, z)) * std::pow(1.0 + r * r, 0.5 * (beta + 1));
                    (r < K / 2.0 ? inner : outer) = std::max(r < K / 2.0 ? inner : outer, w);
                }
        CHECK(inner < 5.0);
        CHECK(outer <= inner);
        for (int i = 1; i <= 400; ++i) CHECK(v.physical_value(i * M_PI * std::sqrt(3.0) / 400) > 0.0);
    }
}
