#include <limits>
#include "doctest.h"
#include "hartree/gaussian_control.hpp"
#include "test_util.hpp"

using namespace hartree;
using testutil::RunningStats;

static const double kInf = std::numeric_limits<double>::infinity();

TEST_CASE("time grid") {
    const TimeGrid g = TimeGrid::log_uniform(20.0, 8);
    CHECK(g.intervals() == 40);
    CHECK(g.t(0) == 0.0);
    CHECK(bracket_time(g.end()) == doctest::Approx(32.0).epsilon(1e-13));
    for (int k = 0; k < g.intervals(); ++k) CHECK(g.dt(k) > 0.0);
    const TimeGrid c = g.coarsened(2);
    CHECK(c.intervals() == 20);
    for (int k = 0; k <= c.intervals(); ++k) CHECK(c.t(k) == g.t(2 * k));
    CHECK(g.node_index(g.t(17)) == 17);
    CHECK(g.node_index(0.123456) == -1);
    // Finite T: the grid reaches 16 <T> or the band limit, whichever is first.
    const TimeGrid f = TimeGrid::covering(4.0, 4, 64);
    CHECK(bracket_time(f.end()) >= 16.0 * bracket_time(4.0));
    const TimeGrid b = TimeGrid::covering(kInf, 4, 6);
    CHECK(bracket_time(b.end()) >= 4.0 * std::sqrt(3.0) * 6);
    CHECK_THROWS(TimeGrid::log_uniform(20.0, 0));
    CHECK_THROWS(g.coarsened(3));
}

TEST_CASE("Brownian driver determinism and symmetry") {
    const TimeGrid g = TimeGrid::log_uniform(8.0, 2);
    const LatticeSpec lat(3);
    const BrownianDriver a = BrownianDriver::sample(g, lat, 42, 7), b = BrownianDriver::sample(g, lat, 42, 7);
    const BrownianDriver c = BrownianDriver::sample(g, lat, 42, 8);
    CHECK(a.slots() == g.intervals() + 2);
    double diff = 0.0;
    for (int s = 0; s < a.slots(); ++s) {
        CHECK(a.noise(s).data() == b.noise(s).data());
        CHECK(a.noise(s).hermitian_defect() == 0.0);
        CHECK(a.noise(s)(0, 0, 0).imag() == 0.0);
        diff += (a.noise(s) - c.noise(s)).l2_norm();
    }
    CHECK(diff > 0.0);

    // E|Delta B|^2 / dt = 1 per mode, and increments on different intervals
    // are uncorrelated.
    RunningStats sq, cross;
    for (int s = 0; s < 10000; ++s) {
        const BrownianDriver d = BrownianDriver::sample(g, LatticeSpec(1), 5, uint64_t(s));
        const SpectralField i0 = d.increment(1), i1 = d.increment(2);
        sq.add(std::norm(i0(1, 0, -1)) / g.dt(1));
        cross.add((i0(1, 0, -1) * std::conj(i1(1, 0, -1))).real() / std::sqrt(g.dt(1) * g.dt(2)));
    }
    CHECK(std::abs(sq.mean - 1.0) < 4 * sq.stderr_mean());
    CHECK(std::abs(cross.mean) < 4 * cross.stderr_mean());
}

TEST_CASE("coarsened driver reproduces summed increments") {
    const TimeGrid g = TimeGrid::log_uniform(16.0, 4);
    const BrownianDriver d = BrownianDriver::sample(g, LatticeSpec(2), 9, 0);
    const BrownianDriver c = d.coarsened(2);
    for (int k = 0; k < c.grid().intervals(); ++k) {
        const SpectralField expect = d.increment(2 * k) + d.increment(2 * k + 1);
        CHECK((c.increment(k) - expect).l2_norm() < 1e-13);
    }
}

TEST_CASE("covariance oracle") {
    CHECK(covariance_oracle(0, 0, 0, 0.0, kInf) == 1.0);
    CHECK(covariance_oracle(4, 0, 0, 0.0, kInf) == 0.0);
    CHECK(covariance_oracle(2, 1, 0, 3.0, 2.0) ==
          doctest::Approx(std::pow(rho_t(std::sqrt(5.0), 3.0) * rho_t(std::sqrt(5.0), 2.0), 2) / 6.0));
    // Law of W_T equals law of rho_T W_inf mode by mode.
    for (int x = 0; x <= 6; ++x)
        for (double T : {0.5, 2.0, 4.0})
            CHECK(covariance_oracle(x, 1, 0, T, kInf) == covariance_oracle(x, 1, 0, kInf, T));
}

TEST_CASE("Gaussian path: exact marginals") {
    const int K = 3;
    const double T = 2.0;
    const TimeGrid g = TimeGrid::covering(T, 2, K);
    const int nodes[] = {0, 2, 5, g.intervals()};
    const int modes[][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 1}, {2, -1, 0}, {3, 3, 1}};
    RunningStats var[4][5], inf_var[5], h1;
    const int samples = 20000;
    for (int s = 0; s < samples; ++s) {
        const BrownianDriver d = BrownianDriver::sample(g, LatticeSpec(K), 2024, uint64_t(s));
        const GaussianPath p(d, T);
        for (int a = 0; a < 4; ++a)
            for (int m = 0; m < 5; ++m) var[a][m].add(std::norm(p.at(nodes[a])(modes[m][0], modes[m][1], modes[m][2])));
        for (int m = 0; m < 5; ++m) inf_var[m].add(std::norm(p.infinity()(modes[m][0], modes[m][1], modes[m][2])));
        if (s == 0) {
            for (int k = 0; k <= g.intervals(); ++k) CHECK(p.at(k)(0, 0, 0) == p.at(0)(0, 0, 0));
            CHECK(p.infinity().hermitian_defect() == 0.0);
        }
        h1.add(std::pow(sobolev_norm(p.infinity(), -1.0), 2));
    }
    for (int a = 0; a < 4; ++a)
        for (int m = 0; m < 5; ++m) {
            const double oracle = covariance_oracle(modes[m][0], modes[m][1], modes[m][2], g.t(nodes[a]), T);
            if (oracle == 0.0) {
                CHECK(var[a][m].mean == 0.0);
                continue;
            }
            CHECK(std::abs(var[a][m].mean - oracle) < 4 * var[a][m].stderr_mean());
        }
    for (int m = 0; m < 5; ++m) {
        const double oracle = covariance_oracle(modes[m][0], modes[m][1], modes[m][2], kInf, T);
        CHECK(std::abs(inf_var[m].mean - oracle) < 4 * inf_var[m].stderr_mean());
    }
    double expect = 0.0;
    for (int x = -K; x <= K; ++x)
        for (int y = -K; y <= K; ++y)
            for (int z = -K; z <= K; ++z) {
                const double r2 = 1.0 + x * x + y * y + z * z;
                expect += std::pow(rho_t(std::sqrt(r2 - 1.0), T), 2) / (r2 * r2);
            }
    CHECK(std::abs(h1.mean - expect) < 4 * h1.stderr_mean());
}

TEST_CASE("slot amplitudes add up to the marginal variance") {
    const TimeGrid g = TimeGrid::covering(kInf, 8, 4);
    const SlotAmplitudes amps(g, 4, 3.0);
    for (int x = 0; x <= 4; ++x) {
        double acc = 0.0;
        for (int s = 0; s <= g.intervals() + 1; ++s) {
            acc += amps.variance(s, x, 1, 2);
            if (s <= g.intervals())
                CHECK(acc == doctest::Approx(covariance_oracle(x, 1, 2, g.t(s), 3.0)).epsilon(1e-12));
        }
        CHECK(acc == doctest::Approx(covariance_oracle(x, 1, 2, kInf, 3.0)).epsilon(1e-12));
    }
}

TEST_CASE("GFF sampler") {
    RunningStats v;
    for (int s = 0; s < 20000; ++s) v.add(std::norm(sample_gff(2, 1.5, 3, uint64_t(s))(1, 1, 0)));
    const double oracle = covariance_oracle(1, 1, 0, kInf, 1.5);
    CHECK(std::abs(v.mean - oracle) < 4 * v.stderr_mean());
}

TEST_CASE("smoothing integrator I_t[u]") {
    const int K = 4;
    const TimeGrid g = TimeGrid::covering(kInf, 4, K);
    const int m = g.intervals();
    const std::vector<SpectralField> zero(std::size_t(m), SpectralField{K});
    for (const auto& i : integrate_I(zero, g, 3.0)) CHECK(i.l2_norm() == 0.0);

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<SpectralField> u;
        double l2 = 0.0;
        for (int k = 0; k < m; ++k) {
            u.push_back(testutil::random_field(K, 500 + 31 * trial + k));
            l2 += g.dt(k) * std::pow(u.back().l2_norm(), 2);
        }
        for (double T : {2.0, kInf}) {
            const auto I = integrate_I(u, g, T);
            CHECK(sobolev_norm(I.back(), 1.0) <= std::sqrt(l2) * (1.0 + 1e-12));
        }
    }

    // Drift switched on only after every sigma^T has died: I is unchanged.
    const double T = 0.5;
    std::vector<SpectralField> late(std::size_t(m), SpectralField{K});
    int first_dead = -1;
    for (int k = 0; k < m; ++k)
        if (bracket_time(g.t(k)) >= 16.0 * bracket_time(T)) {
            first_dead = k;
            break;
        }
    REQUIRE(first_dead > 0);
    for (int k = first_dead; k < m; ++k) late[std::size_t(k)] = testutil::random_field(K, 900 + k);
    for (const auto& i : integrate_I(late, g, T)) CHECK(i.l2_norm() == 0.0);
}
