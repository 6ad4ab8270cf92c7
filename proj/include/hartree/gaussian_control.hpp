#pragma once

#include <cstdint>
#include <vector>

#include "hartree/spectral.hpp"

namespace hartree {

// Stochastic-time grid, uniform in log2 <t>. The last node is rounded up to a
// whole octave so that refining by a factor of two nests the node sets.
class TimeGrid {
public:
    TimeGrid() = default;
    // Grid with <t_M> >= bracket_end and `per_octave` intervals per octave.
    static TimeGrid log_uniform(double bracket_end, int per_octave);
    // Grid covering every sigma^T support: <t_M> >= 16 <T_max>; for T_max = inf
    // the band of the lattice decides (sigma_t vanishes once <t> >= 4 sqrt(3) K).
    static TimeGrid covering(double T_max, int per_octave, int K);

    int intervals() const { return int(t_.size()) - 1; }
    int per_octave() const { return per_octave_; }
    double t(int k) const { return t_[std::size_t(k)]; }
    double dt(int k) const { return t_[std::size_t(k) + 1] - t_[std::size_t(k)]; }
    double end() const { return t_.back(); }
    const std::vector<double>& nodes() const { return t_; }
    // Grid with per_octave / factor intervals per octave (same end point).
    TimeGrid coarsened(int factor) const;
    // Index of the node equal to t (exact match up to 1e-12), or -1.
    int node_index(double t) const;

private:
    std::vector<double> t_;
    int per_octave_ = 0;
};

// Noise slots: 0 = the t=0 value, 1..M = grid intervals, M+1 = exact tail to
// t = infinity. Every slot stores standardized Gaussians (E|g^n|^2 = 1),
// complex on the half lattice and conjugate-paired, real at n = 0. The
// Brownian increment on interval k is sqrt(dt_k) times slot k+1.
class BrownianDriver {
public:
    static BrownianDriver sample(const TimeGrid& grid, const LatticeSpec& lat, uint64_t seed, uint64_t task = 0);

    const TimeGrid& grid() const { return grid_; }
    int band() const { return band_; }
    uint64_t seed() const { return seed_; }
    uint64_t task() const { return task_; }
    int slots() const { return int(noise_.size()); }

    const SpectralField& head() const { return noise_.front(); }
    const SpectralField& tail() const { return noise_.back(); }
    const SpectralField& noise(int slot) const { return noise_[std::size_t(slot)]; }
    // Delta B_k = sqrt(dt_k) * noise(k + 1).
    SpectralField increment(int k) const;

    // Driver on the coarsened grid whose increments are sums of this one's.
    BrownianDriver coarsened(int factor) const;
    // Driver with increments Delta B_k + u_k dt_k for a drift u given on the
    // intervals (u_k of band <= band()).
    BrownianDriver with_drift(const std::vector<SpectralField>& u) const;

private:
    TimeGrid grid_;
    int band_ = 0;
    uint64_t seed_ = 0;
    uint64_t task_ = 0;
    std::vector<SpectralField> noise_;
};

// Fill a band-`band` field with standardized Hermitian Gaussian noise drawn
// from the stream (seed, task, stream).
SpectralField standard_noise(int band, uint64_t seed, uint64_t task, uint32_t stream);

// Per-slot standard deviations of W^T: slot 0 carries rho_0^T/<n>, interval k
// carries rho_T sqrt(rho_{t_{k+1}}^2 - rho_{t_k}^2)/<n>, the tail the rest up
// to rho_T/<n>. Tables use the SpectralField cube layout at the lattice band.
class SlotAmplitudes {
public:
    SlotAmplitudes(const TimeGrid& grid, int band, double T);
    int band() const { return band_; }
    double T() const { return T_; }
    const std::vector<double>& amp(int slot) const { return amp_[std::size_t(slot)]; }
    // J_k^T as a multiplier on interval k, realized with the interval-averaged
    // sigma_k: amp(k + 1) / sqrt(dt_k).
    std::vector<double> J(int k) const;
    // Variance of the slot increment, i.e. amp^2.
    double variance(int slot, int x, int y, int z) const;

private:
    int band_;
    double T_;
    TimeGrid grid_;
    std::vector<std::vector<double>> amp_;
};

// W^T on the grid nodes, plus W^T at t = infinity.
class GaussianPath {
public:
    GaussianPath(const BrownianDriver& driver, double T);

    double T() const { return T_; }
    const TimeGrid& grid() const { return grid_; }
    int band() const { return band_; }
    const SpectralField& at(int node) const { return nodes_[std::size_t(node)]; }
    const SpectralField& infinity() const { return inf_; }
    // W increment carried by the given noise slot (slot 0 is W_0 itself).
    SpectralField slot_increment(int slot) const;
    const SlotAmplitudes& amplitudes() const { return amps_; }

private:
    double T_;
    TimeGrid grid_;
    int band_;
    SlotAmplitudes amps_;
    std::vector<SpectralField> nodes_;
    SpectralField inf_;
};

GaussianPath build_path(const BrownianDriver& driver, double T);

// Exact per-mode variance rho_t(n)^2 rho_T(n)^2 / <n>^2.
double covariance_oracle(int x, int y, int z, double t, double T);

// Direct sample of W^T_infinity, i.e. a GFF sample with covariance
// rho_T^2 <n>^{-2}.
SpectralField sample_gff(int band, double T, uint64_t seed, uint64_t task);

// I^T_t[u] = int_0^t J^T_s u_s ds by the left-point rule on the grid, given u
// on intervals 0..M-1. Returns I at nodes 0..M.
std::vector<SpectralField> integrate_I(const std::vector<SpectralField>& u, const TimeGrid& grid, double T);

}  // namespace hartree
