#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hartree/gaussian_control.hpp"
#include "hartree/objects.hpp"
#include "hartree/renorm.hpp"

namespace hartree {

struct DriftOptions {
    double lambda = 1.0;
    int n_power = 5;
    bool hermite_term = true;  // the coercive J <D>^{-1/2} :(<D>^{-1/2} W)^n: summand
    double cap = 1e6;          // stopping level N for int |u|^2 dt
};

// Drift on the grid intervals together with its accumulated quantities.
// u[k] acts on interval k; I and cum_l2 are indexed by node.
struct DriftTrajectory {
    double T = 0.0;
    uint64_t seed = 0, task = 0;
    bool reference = false;  // drawn by the constructive sampler (increments are B^u)
    std::vector<SpectralField> u;
    std::vector<SpectralField> I;   // I^T[u] = int J^T u ds at the nodes
    std::vector<double> cum_l2;     // int_0^{t_k} |u|^2 ds at the nodes
    std::optional<int> tau_hit;     // first interval switched off by the cap
    double stochastic_integral = 0.0;  // sum < u_k, Delta B_k > for the driving increments
    double energy = 0.0;               // sum |u_k|^2 dt_k
    // log dQ/dP = int u dB - 1/2 int |u|^2 with B the P-Brownian motion.
    double girsanov_log = 0.0;
};

// One draw of the reference measure nu_T by the constructive sampler: a
// P-law path Y drives the explicit drift u_k = Xi(Y_{t_k}) and W = Y + I[u].
struct ReferenceSample {
    DriftTrajectory traj;
    SpectralField Y_inf;   // rho_T Y_infinity
    SpectralField W_inf;   // rho_T W_infinity = Y_inf + I_inf[u]
    SpectralField g3;      // -lambda sum_k amp^2 J-cubic part of I_inf[u]
    SpectralField gn;      // Hermite part of I_inf[u]
};

// Drift equation data for a fixed (grid, T, V, band): contexts at every node,
// the slot amplitudes of W^T and the context at (infinity, T).
class DriftModel {
public:
    DriftModel(const TimeGrid& grid, double T, const Potential& V, int band, DriftOptions opts);

    const TimeGrid& grid() const { return grid_; }
    double T() const { return T_; }
    int band() const { return band_; }
    const DriftOptions& options() const { return opts_; }
    const std::vector<RenormContext>& ladder() const { return ladder_; }
    const SlotAmplitudes& amplitudes() const { return amps_; }
    const RenormContext& context_inf() const { return ctx_inf_; }

    // Xi^T(field) on interval k; the two summands are returned separately
    // when the out-parameters are given.
    SpectralField forcing(const SpectralField& field, int k, SpectralField* cubic_part = nullptr,
                          SpectralField* hermite_part = nullptr) const;

    // P-side solution of u_k = Xi(W^T_{t_k} - I^T_{t_k}[u]) (left point).
    DriftTrajectory solve(const BrownianDriver& driver) const;
    // Stop the drift once the cap N is reached; u^N on the same driver.
    DriftTrajectory solve(const BrownianDriver& driver, double cap) const;

    ReferenceSample sample_reference(const BrownianDriver& driver) const;

    // -(lambda/4) int :(V*W^2)W^2:(W_inf) - c - int u dB^u - 1/2 int |u|^2,
    // i.e. log D_T + log Z. Throws if the sample was drawn from another driver.
    double gibbs_log_weight(const ReferenceSample& s, const BrownianDriver& driver, double c) const;
    double gibbs_log_weight(const ReferenceSample& s, double c) const;

    // :V^{T,lambda}:(f) = (lambda/4) int :(V * f^2) f^2: + c at (infinity, T).
    double renormalized_potential(const SpectralField& f, double c) const;

private:
    DriftTrajectory run(const BrownianDriver& driver, const GaussianPath& path, bool constructive,
                        double cap, SpectralField* g3, SpectralField* gn) const;

    TimeGrid grid_;
    double T_;
    int band_;
    DriftOptions opts_;
    std::vector<RenormContext> ladder_;
    SlotAmplitudes amps_;
    RenormContext ctx_inf_;
    std::vector<double> half_smoothing_;  // <n>^{-1/2}
    std::vector<std::vector<double>> J_;   // J^T on each interval
};

double girsanov_log_density(const DriftTrajectory& traj);
// sum_k < u_k, Delta B_k > - 1/2 |u_k|^2 dt_k for a drift given in advance.
double girsanov_log_density(const std::vector<SpectralField>& u, const BrownianDriver& driver);

// Summary of a set of importance log-weights.
struct WeightSummary {
    std::size_t n = 0;
    double log_mean = 0.0;  // log of the mean weight
    double mean = 0.0;      // mean weight
    double stderr_ = 0.0;   // standard error of the mean weight
    double ess = 0.0;       // (sum w)^2 / sum w^2
};
WeightSummary summarize_log_weights(const std::vector<double>& logw);

// Self-normalized E[D^q] = mean(w^q) / mean(w)^q with a delta-method error.
struct LqEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    double ess = 0.0;
    std::size_t tau_hits = 0;
};
LqEstimate self_normalized_moment(const std::vector<double>& logw, double q);

// Draws and evaluates the reference ensemble: log-weights (with c = 0) and how
// many trajectories were cut by the cap.
struct ReferenceEnsemble {
    std::vector<double> log_weights;
    std::size_t tau_hits = 0;
};
ReferenceEnsemble reference_ensemble(const DriftModel& model, std::size_t samples, uint64_t seed, int workers);

LqEstimate density_lq_probe(const DriftModel& model, double q, std::size_t samples, uint64_t seed, int workers);

// Z^{T,lambda} (with c = 0) from the P side, E_P[exp(-:V:(W^T_inf))], and from
// the reference side, E_Q[exp(log weight)].
WeightSummary partition_P(const DriftModel& model, std::size_t samples, uint64_t seed, int workers);
WeightSummary partition_Q(const DriftModel& model, std::size_t samples, uint64_t seed, int workers);

}  // namespace hartree
