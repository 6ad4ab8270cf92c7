#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "hartree/drift.hpp"

namespace hartree {

// Smallest cube band holding the support |n| < 4<S> of rho_S.
int singularity_band(double S);

// Smallest T with rho_T = 1 on the support of rho_S, i.e. <T> = 16 <S>, so
// that the Gibbs field rho_S W^T has the covariance the S-context assumes.
double gibbs_default_T(double S_max);

// S^{1 - 2 beta - delta}.
double singularity_normalizer(double S, double beta, double delta);

// int :(V * (rho_S phi)^2)(rho_S phi)^2: / S^{1 - 2 beta - delta}, with ctx_S
// built at (infinity, S). Throws BandError unless the context band covers
// 4<S> and phi carries at least the context band.
double quartic_statistic(const SpectralField& phi, double S, double beta, double delta, const RenormContext& ctx_S);

struct SingularityOptions {
    double beta = 0.25;
    double delta = 0.05;
    double lambda = 1.0;
    int n_power = 5;
    bool hermite_term = true;
    double cap = 1e6;
    int per_octave = 2;
    double T = 0.0;       // Gibbs scan horizon; 0 means gibbs_default_T(max S)
    int max_band = 0;     // cap on the Gibbs-side lattice band; 0 means no cap
    double ess_floor = 50.0;
    std::size_t samples = 200;
    std::size_t oracle_samples = 200000;  // lattice MC samples for the oracles
    uint64_t seed = 1;
    int workers = 1;
};

struct ScanPoint {
    double S = 0.0;
    int band = 0;
    bool truncated = false;   // lattice band below singularity_band(S)
    double mean = 0.0, stderr_ = 0.0;
    double rms = 0.0, rms_stderr = 0.0;
    double second_moment = 0.0, second_moment_stderr = 0.0;
    double oracle = 0.0, oracle_stderr = 0.0;  // exact second moment (GFF scan only)
    double ess = 0.0;
    std::size_t n = 0;
    bool flagged = false;     // ESS below the floor
};

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci_low = 0.0, ci_high = 0.0;  // 95% residual-bootstrap interval
};

struct ScanSeries {
    std::string name;
    std::vector<ScanPoint> points;
    ScalingFit fit;         // RMS vs S for the GFF scan, -mean vs S for the Gibbs scan
    bool fit_valid = false;
    bool rejected = false;  // some point fell below the ESS floor
};

// Statistic under the GFF on per-S lattices of band singularity_band(S).
ScanSeries gff_scan(const std::vector<double>& S_list, const SingularityOptions& opts);

// Self-normalized estimate under mu_T from reference samples of nu_T and
// their Gibbs log-weights. One ensemble on a lattice of band
// max_S singularity_band(S) (capped by max_band) serves every S.
ScanSeries gibbs_scan(const std::vector<double>& S_list, const SingularityOptions& opts);

// CSV with columns S,mean,stderr,rms,ess,n_samples.
void write_series_csv(std::ostream& os, const ScanSeries& series);

// Least squares on (log S, log value) with a residual bootstrap interval.
ScalingFit scaling_exponent_fit(const std::vector<double>& S, const std::vector<double>& values,
                                std::size_t resamples = 1000, uint64_t seed = 1);

// int_0^inf sigma_s(r0)^2 prod_j rho_s(r_j)^2 ds. With a grid, the left-point
// sum over its intervals instead, which is what the discrete path computes.
double witness_time_weight(double r0, const std::array<double, 3>& r, const TimeGrid* grid = nullptr);

struct WitnessSum {
    double value = 0.0;
    std::size_t count = 0;  // number of triples in the region
};
// Sum over |n_j - S e_j| <= S/20 of <n123>^-2 <n12>^-2beta prod <n_j>^-2 times
// rho_S(n123) prod rho_S(n_j) witness_time_weight.
WitnessSum witness_region_sum(double S, double beta);

struct MainTermEstimate {
    double value = 0.0, stderr_ = 0.0;
    std::size_t n = 0;
};
// E_P[int (J^S W^{S,[3]}) . (J W^{[3]}) dx ds] for the cubic objects at (S, T),
// which is also its law under Q since W^u is a Q-Brownian path. Computed as
// (2/3) sum (V12 + V13 + V23)^2 prod rho_S rho_T <n_j>^-2 times the J^S J
// symbol at n123 and the time weight, by importance sampling of the triple
// (density prop. to prod rho_S rho_T <n_j>^-2). With a grid the time weight
// is the discrete one of witness_time_weight.
MainTermEstimate main_term_expectation(double S, double T, const Potential& V, std::size_t samples, uint64_t seed,
                                       const TimeGrid* grid = nullptr);

// Discrete-time form of the drift-side representation of the statistic on
// one reference trajectory. With W^S = Y^S + I^S[u], the statistic in
// martingale form is
//   head + 4 sum_k < :(V * (W^S)^2) W^S:_k, Delta W^S_k >
// and splits into the main term, its martingale, the A^j drift and
// martingale terms and the coercive term.
struct QuarticDecomposition {
    double head = 0.0;           // int :(V*(W^S_0)^2)(W^S_0)^2:
    double main = 0.0;           // -4 lambda sum < J^S C^S(Y^S), J C(Y) > dt
    double main_martingale = 0.0;           // 4 sum < J^S C^S(Y^S), Delta B >
    std::array<double, 3> drift_minor{};    // -4 lambda sum < A^j, J C(Y) > dt
    std::array<double, 3> martingale_minor{};  // 4 sum < A^j, Delta B >
    double coercive = 0.0;       // 4 sum < J^S C^S(W^S), Hermite part of u > dt
    double martingale_form = 0.0;  // the left-hand side, evaluated directly
    double direct = 0.0;           // int :(V*(W^S_inf)^2)(W^S_inf)^2:
    double total() const;
};
QuarticDecomposition decompose_quartic_statistic(const DriftModel& model, const BrownianDriver& driver, double S);

// A^{S,1..3} on one interval: J^S times the parts of the cubic binomial
// expansion that are linear, quadratic and cubic in I.
std::array<SpectralField, 3> drift_side_A(const SpectralField& Y, const SpectralField& I, const RenormContext& ctx_S,
                                         const std::vector<double>& JS);

// Per-S mean of |term| / S^{1-2beta-delta} for each minor term (A^j drift and
// martingale parts and the coercive term) under Q.
struct MinorTermPoint {
    double S = 0.0;
    std::array<double, 7> magnitude{};  // drift A1..A3, martingale A1..A3, coercive
    std::array<double, 7> stderr_{};
};
std::vector<MinorTermPoint> minor_term_scan(const std::vector<double>& S_list, const SingularityOptions& opts);

}  // namespace hartree
