#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>

namespace hartree {

// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). A pure function of (counter, key), so any stream can be
// regenerated from its coordinates without carrying generator state around.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const uint64_t p0 = uint64_t(M0) * ctr[0];
        const uint64_t p1 = uint64_t(M1) * ctr[2];
        ctr = {uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], uint32_t(p1), uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], uint32_t(p0)};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

// Random stream addressed by (seed, task, stream). Two streams with different
// coordinates never overlap; the same coordinates always reproduce the same
// numbers regardless of which thread asks.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t task, uint32_t stream)
        : key_{uint32_t(seed), uint32_t(seed >> 32)}, task_(task), stream_(stream) {}

    uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    uint64_t next_u64() {
        const uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in (0, 1); never returns 0 so it is safe under log().
    double uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    // Complex Gaussian with E|z|^2 = 1 (real and imaginary parts of variance 1/2).
    std::complex<double> complex_normal() {
        const double re = normal();
        const double im = normal();
        return {re * M_SQRT1_2, im * M_SQRT1_2};
    }

private:
    void refill() {
        buf_ = philox4x32({block_, uint32_t(task_), uint32_t(task_ >> 32), stream_}, key_);
        ++block_;
        pos_ = 0;
    }

    std::array<uint32_t, 2> key_;
    uint64_t task_;
    uint32_t stream_;
    uint32_t block_ = 0;
    std::array<uint32_t, 4> buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace hartree
