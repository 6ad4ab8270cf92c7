#pragma once

#include <array>
#include <map>
#include <vector>

#include "hartree/gaussian_control.hpp"

namespace hartree {

// One argument of a chaos kernel: a noise slot of the driver (0 = W_0,
// 1..M = grid intervals, M+1 = tail) and a lattice mode.
struct ChaosPoint {
    int slot = 0;
    int x = 0, y = 0, z = 0;

    ChaosPoint negated() const { return {slot, -x, -y, -z}; }
    auto tie() const { return std::array<int, 4>{slot, x, y, z}; }
    bool operator<(const ChaosPoint& o) const { return tie() < o.tie(); }
    bool operator==(const ChaosPoint& o) const { return tie() == o.tie(); }
};

using ChaosKey = std::vector<ChaosPoint>;

// Symmetric kernel of order k on (slot, mode) points, stored sparsely with one
// entry per sorted k-tuple (the value is shared by every ordering).
class ChaosKernel {
public:
    ChaosKernel() = default;
    explicit ChaosKernel(int order) : order_(order) {}

    int order() const { return order_; }
    std::size_t size() const { return entries_.size(); }
    const std::map<ChaosKey, cplx>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    // f(points) += value (points are sorted internally).
    void add(ChaosKey points, cplx value);
    cplx value(ChaosKey points) const;

    // Kernel from a function on ordered tuples. Throws if the function is not
    // symmetric under permutation of its arguments.
    static ChaosKernel from_ordered(int order, const std::map<ChaosKey, cplx>& ordered);
    // Symmetrization of a function on ordered tuples.
    static ChaosKernel symmetrize(int order, const std::map<ChaosKey, cplx>& ordered);

    // Copy with every interval slot split into `factor` consecutive slots of
    // the refined grid, value unchanged (piecewise constant in time).
    ChaosKernel refined(int factor, int coarse_intervals) const;

private:
    int order_ = 0;
    std::map<ChaosKey, cplx> entries_;
};

ChaosKernel operator*(cplx s, const ChaosKernel& f);
ChaosKernel operator+(const ChaosKernel& f, const ChaosKernel& g);

// Per-slot increments of W^T along one path.
class ChaosEvaluator {
public:
    explicit ChaosEvaluator(const GaussianPath& path);
    cplx increment(const ChaosPoint& p) const;
    // I_k[f] = k! sum over keys with pairwise distinct slots of f prod Delta W.
    cplx integral(const ChaosKernel& f) const;

private:
    std::vector<SpectralField> inc_;
};

cplx multiple_integral(const ChaosKernel& f, const BrownianDriver& driver, double T);

// Contraction of r arguments: pairs (slot, m) with (slot, -m) and weights
// E[Delta W^m Delta W^{-m}] = amp_slot(m)^2. The result is symmetrized.
ChaosKernel contract(const ChaosKernel& f, const ChaosKernel& g, int r, const SlotAmplitudes& amps);

struct ProductFormulaReport {
    int k = 0, l = 0;
    std::size_t samples = 0;
    double mean_lhs = 0.0, mean_rhs = 0.0;
    double stderr_lhs = 0.0, stderr_rhs = 0.0;
    double mean_sq_discrepancy = 0.0;  // E|LHS - RHS|^2
    double stderr_sq_discrepancy = 0.0;
    double max_rel_discrepancy = 0.0;
};

// Right-hand side of the product formula on one path.
cplx product_formula_rhs(const ChaosKernel& f, const ChaosKernel& g, const SlotAmplitudes& amps,
                         const ChaosEvaluator& ev);
// Compares I_k[f] I_l[g] with sum_r r! C(k,r) C(l,r) I_{k+l-2r}[f (x)_r g]
// on the drivers (seed, task) for task in [0, samples).
ProductFormulaReport product_formula_check(const ChaosKernel& f, const ChaosKernel& g, const TimeGrid& grid, int band,
                                           double T, uint64_t seed, std::size_t samples);

// Empirical ||X||_p / ||X||_2.
double hypercontractivity_ratio(const std::vector<double>& samples, double p);

}  // namespace hartree
