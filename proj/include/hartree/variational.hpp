#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hartree/drift.hpp"

namespace hartree {

// Functional of the terminal field, F(W_inf^T + I_inf^T[u]).
using FieldFunctional = std::function<double(const SpectralField&)>;

// :V^{T,lambda}:(f) = (lambda/4) int :(V * f^2) f^2: + c, with ctx at (infinity, T).
double renormalized_potential(const SpectralField& f, const RenormContext& ctx, double c);

// Uncorrected interaction int (V * f^2) f^2 dx.
double interaction_energy(const SpectralField& f, const RenormContext& ctx);

// Gaussian data of one driver that the variational formulas need.
struct VariationalPath {
    SpectralField W_inf;               // W^T_infinity
    std::vector<SpectralField> cubic;  // :(V * W_t^2) W_t: at the left node of every interval
    SpectralField w3;                  // W^[3]_infinity = sum_k amp_{k+1}^2 cubic_k
    double jc_norm_sq = 0.0;           // sum_k |J_k cubic_k|^2 dt_k
};
VariationalPath variational_path(const DriftModel& model, const BrownianDriver& driver);

// theta u_star with u_star_k = -lambda J_k cubic_k, i.e. l^T[u_star] = 0.
std::vector<SpectralField> scaled_u_star(const DriftModel& model, const VariationalPath& path, double theta);

// l^T[u]_k = u_k + lambda J_k cubic_k.
std::vector<SpectralField> shifted_drift(const DriftModel& model, const VariationalPath& path,
                                         const std::vector<SpectralField>& u);

// One sample of F(W + I[u]) + :V:(W_inf + I_inf[u]) + 1/2 int |u|^2.
double bd_sample(const DriftModel& model, const VariationalPath& path, const std::vector<SpectralField>& u, double c,
                 const FieldFunctional& F = nullptr);

// Pathwise regrouping of bd_sample through w = l^T[u]:
//   bd_sample = E0 + c + E1 + E2 + E3 + (lambda/4) V(I[w]) + 1/2 |w|^2 + martingale,
// where `martingale` = lambda sum_k < cubic_inf - cubic_k, Delta I_k[u] > is the
// discrete remainder of the Ito step (zero mean).
struct EnergyDecomposition {
    double E0 = 0.0, E1 = 0.0, E2 = 0.0, E3 = 0.0;
    double coercive = 0.0;
    double martingale = 0.0;
    double c = 0.0;
    double total() const { return E0 + c + E1 + E2 + E3 + coercive + martingale; }
};
EnergyDecomposition decompose_objective(const DriftModel& model, const VariationalPath& path,
                                        const std::vector<SpectralField>& u, double c,
                                        const FieldFunctional& F = nullptr);

// c^{T,lambda} = -E[E0]; the quartic chaos term has mean zero and is dropped.
struct CEstimate {
    double value = 0.0, stderr_ = 0.0;
    double term2_exact = 0.0;               // (lambda^2/2) E sum |J cubic|^2 dt, from the cubic oracle
    double term2_mc = 0.0, term2_mc_stderr = 0.0;
    double term3 = 0.0, term3_stderr = 0.0;  // (lambda^3/2) E int (V * :W^2:) (W^[3])^2
    double term4 = 0.0, term4_stderr = 0.0;  // lambda^3 E int (V*(W W^[3])) W W^[3] - (M W^[3]) W^[3]
    std::size_t n = 0;
};
double c_term2_exact(const DriftModel& model);
CEstimate estimate_c(const DriftModel& model, std::size_t samples, uint64_t seed, int workers);

struct Estimate {
    double value = 0.0, stderr_ = 0.0;
    std::size_t n = 0;
};

// MC estimate of the Boue-Dupuis objective for the drift theta u_star on the
// ensemble of drivers (seed, 0..samples-1).
Estimate bd_objective(const DriftModel& model, double theta, std::size_t samples, uint64_t seed, int workers,
                      double c = 0.0, const FieldFunctional& F = nullptr);

// Golden-section minimization of phi on [a, b].
double golden_section_minimize(const std::function<double(double)>& phi, double a, double b, double tol = 1e-6);

struct DriftScaleResult {
    double theta = 0.0;
    Estimate bound;       // objective at theta*: an upper bound on -log Z^{T,lambda}
    Estimate at_zero;     // objective at theta = 0
    Estimate at_one;      // objective at theta = 1
    std::vector<double> mean_poly;  // mean objective as a polynomial in theta (degree 4)
};
// Each sample's objective is a quartic polynomial in theta; the optimizer runs
// on the ensemble mean of these polynomials (common random numbers).
DriftScaleResult optimize_drift_scale(const DriftModel& model, std::size_t samples, uint64_t seed, int workers,
                                      double c = 0.0);

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), history_(std::move(history)) {}
    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

struct OperatorNormResult {
    double value = 0.0;
    int iterations = 0;
    std::vector<double> history;
};
// Largest singular value of (f1, f2) -> int V*(W f1) W f2 - int (M f1) f2 on
// the unit balls of H^gamma, by power iteration on the square of the
// symmetric operator. Requires gamma > max(1 - beta, 1/2).
OperatorNormResult operator_norm(const SpectralField& W, double gamma, const RenormContext& ctx, double tol = 1e-6,
                                 int max_iter = 500, uint64_t seed = 1);
// The underlying symmetric operator g -> <D>^{-gamma} (W (V * (W f)) - M f), f = <D>^{-gamma} g.
SpectralField operator_apply(const SpectralField& W, double gamma, const RenormContext& ctx, const SpectralField& g);

// Numerical probes of the deterministic inequalities: each series reports the
// ratio lhs / rhs against a scale parameter.
struct ProbeSeries {
    std::string name;
    std::vector<double> scale;
    std::vector<double> ratio;
    double max_ratio = 0.0;
    // log-log slope of the ratio over the last three scales exceeds 0.1 and
    // the last ratio is the largest one.
    bool unbounded_trend = false;
};
ProbeSeries finish_series(ProbeSeries s);

// |<D>^{-beta/4} f|_{L^4}^4 / int (V * f^2) f^2 over bumps of width 1/N,
// annulus noise at frequency N and constants.
ProbeSeries visan_probe(const Potential& V, const std::vector<int>& freqs, std::size_t samples, uint64_t seed);
// sum_n <n+v>^-a <n+w>^-b <n>^-2 over Z^3 (sphere cut at R plus the continuum tail).
double counting_sum(const std::array<int, 3>& v, const std::array<int, 3>& w, double a, double b);
ProbeSeries counting_probe(double a, double b, const std::vector<int>& v_norms);
// sup over dyadic shells of <n>^{beta+1} |V^(n) - c_beta <n>^{-beta}|.
ProbeSeries vhat_residual_probe(const Potential& V, int K);

struct ProbeReport {
    std::vector<ProbeSeries> series;
    bool ok() const;
};
ProbeReport inequality_probes(const Potential& V, std::size_t samples, uint64_t seed);

// min(|W|_{B^s_{inf,inf}}, clip): a bounded Lipschitz test functional.
double clipped_besov(const SpectralField& W, double s = -0.75, double clip = 4.0);

struct LaplaceEntry {
    double T = 0.0;
    double value = 0.0, stderr_ = 0.0, ess = 0.0;
};
struct LaplaceReport {
    std::vector<LaplaceEntry> entries;
    // |value_{i+1} - value_i| / combined stderr
    std::vector<double> z_scores;
};
// E_{mu_T}[e^{-f}] from reference samples reweighted by gibbs_log_weight, for
// each T in T_list. Models use the given band, potential and options and a
// grid covering T with `per_octave` intervals per octave.
LaplaceReport laplace_cauchy_probe(const FieldFunctional& f, const std::vector<double>& T_list, const Potential& V,
                                   int band, int per_octave, DriftOptions opts, std::size_t samples, uint64_t seed,
                                   int workers);

}  // namespace hartree
