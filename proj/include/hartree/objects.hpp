#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "hartree/gaussian_control.hpp"
#include "hartree/renorm.hpp"

namespace hartree {

// Renormalization contexts at every node (t_k, T) of a grid.
std::vector<RenormContext> context_ladder(const TimeGrid& grid, double T, const Potential& V, double lambda,
                                          int n_power, int band);

// :(V * (W_t^T)^2) W_t^T: at grid node `node`; ctx must be built at (t_node, T).
SpectralField cubic_object(const GaussianPath& path, int node, const RenormContext& ctx);

// Exact E|F(:(V * W^2) W:)(n)|^2 on the context's band. With h = rho^2/<n>^2,
// the value is 2 A(n) + 4 B(n) where
//   A(n) = sum_{n1+n2+n3=n} V^(n12)^2 h1 h2 h3 = ((V^2 (h*h)) * h)(n),
//   B(n) = sum_{n1+n2+n3=n} V^(n12) V^(n13) h1 h2 h3.
// A is one pair of lattice convolutions. B(n) is formed per mode as the n-th
// coefficient of g_n^2 h with g_n(a) = h(a) V^(n - a), and cached over the
// 48-element symmetry orbits of the cube.
class CubicVarianceOracle {
public:
    explicit CubicVarianceOracle(const RenormContext& ctx);
    int band() const { return band_; }
    double pair_term(int x, int y, int z) const;   // A(n)
    double cross_term(int x, int y, int z) const;  // B(n)
    double operator()(int x, int y, int z) const { return 2.0 * pair_term(x, y, z) + 4.0 * cross_term(x, y, z); }
    // sum over the band with weights w(n) (cube layout); drives the quartic oracle.
    double weighted_sum(const std::vector<double>& w) const;

private:
    int band_;
    std::vector<double> h_, vhat_, pair_;
    SpectralField h_field_;
    int grid_ = 0;
    std::vector<double> h_phys_;
    mutable std::map<std::array<int, 3>, double> cross_cache_;
};

double cubic_variance_oracle(int x, int y, int z, const RenormContext& ctx);
// Same quantity by the explicit double sum over (n1, n2); cost O(K^6) per mode.
double cubic_variance_bruteforce(int x, int y, int z, const RenormContext& ctx);

// W^[3]_t = sum over intervals j < k of amp_{j+1}^2 cubic(t_j), i.e. the
// left-point rule for int_0^t (J_s^T)^2 :(V * W_s^2) W_s: ds. Returns the
// value at every node 0..M. `ladder` holds the contexts at each node.
std::vector<SpectralField> w3_bold(const GaussianPath& path, const std::vector<RenormContext>& ladder);

// Exact per-mode variance of the discrete W^[3]_{t_M}: the cubic object is a
// martingale in t, so E[X_i conj X_j] = oracle at min(t_i, t_j).
double w3_variance_oracle(int x, int y, int z, const SlotAmplitudes& amps,
                          const std::vector<CubicVarianceOracle>& oracles);

enum class QuarticMethod { Direct, Martingale };

// int :(V * W_t^2) W_t^2: dx at node `node`, either evaluated directly or as
// int :(V*W_0^2) W_0^2: + 4 sum_k < cubic(t_k), Delta W_k > over the intervals
// before `node` (left point).
double quartic_energy_pathwise(const GaussianPath& path, int node, const std::vector<RenormContext>& ladder,
                               QuarticMethod method);

struct OracleValue {
    double value = 0.0;
    double stderr_ = 0.0;  // zero when computed exactly
};

// E[(int :(V * W^2) W^2: dx)^2] for the law at the context's (t, T):
// 8 sum_{n1+..+n4=0} (V^(n12)^2 + 2 V^(n12) V^(n13)) prod h = 4 sum_n h(n) cubic_oracle(n).
// The pair part is always exact. The cross part is exact when the band is at
// most `exact_band`; beyond that it is estimated by importance sampling over
// lattice triples with density prod h(n_j)/a (mc_samples draws).
OracleValue quartic_second_moment_oracle(const RenormContext& ctx, int exact_band = 16,
                                         std::size_t mc_samples = 2000000, uint64_t seed = 1);

}  // namespace hartree
