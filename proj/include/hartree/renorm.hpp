#pragma once

#include <vector>

#include "hartree/spectral.hpp"

namespace hartree {

// Renormalization data at stochastic times (t, T) on the lattice |n|_inf <= K.
// All sums are exact finite lattice sums over the band.
struct RenormContext {
    double t = 0.0;
    double T = 0.0;
    Potential V;
    double lambda = 1.0;
    int n_power = 5;
    int band = 1;

    double a = 0.0;            // sum rho^2 / <n>^2
    double b = 0.0;            // sum V^(n1 + n2) h(n1) h(n2)
    double hermite_var = 0.0;  // sum rho^2 / <n>^3
    std::vector<double> h;         // rho_t^T(n)^2 / <n>^2 on the band
    std::vector<double> m_symbol;  // sum_m V^(n + m) h(m) on the band
    std::vector<double> vhat;      // V^ on the product band 2K

    double vhat0() const { return V.vhat0(); }
    // Apply V^ as a multiplier to a field of band <= 2K.
    SpectralField convolve_V(const SpectralField& f) const;
    // Apply the multiplier M to a field of band <= K.
    SpectralField apply_M(const SpectralField& f) const;
};

RenormContext build_context(double t, double T, const Potential& V, double lambda, int n_power, const LatticeSpec& lat);
// Same on the cube |n|_inf <= band; band = 0 gives the one-mode lattice {0}.
RenormContext build_context(double t, double T, const Potential& V, double lambda, int n_power, int band);

// rho_t(n) rho_T(n) as a function of |n|_2.
double rho_tT(double nnorm, double t, double T);

// Symbol of M[V; N1, N2] on the band: sum_k V^(n + k) chi_N1 chi_N2 rho^2 / <k>^2.
std::vector<double> m_symbol_decomposed(const RenormContext& ctx, double N1, double N2);
// Correlation function c[N1, N2](y) = sum_k chi_N1 chi_N2 rho^2 / <k>^2 e^{i<k,y>}.
double correlation(const RenormContext& ctx, double N1, double N2, double y1, double y2, double y3);
// The correlation function sampled on the uniform grid of size n.
PhysicalField correlation_grid(const RenormContext& ctx, double N1, double N2, int n);

// :f^2: = f^2 - a (full band 2 band(f)).
SpectralField wick_square(const SpectralField& f, const RenormContext& ctx);
// :(V * f^2) f: = (V * f^2) f - a V^(0) f - 2 M f, returned on |n|_inf <= out_band
// (default: band(f); pass 3 band(f) for the full product).
SpectralField wick_cubic(const SpectralField& f, const RenormContext& ctx, int out_band = -1);
// int :(V * f^2) f^2: dx.
double wick_quartic_energy(const SpectralField& f, const RenormContext& ctx);

// H_n(g, sigma^2) evaluated pointwise, returned on |n|_inf <= out_band
// (default: the full band n band(g)).
SpectralField hermite_power(const SpectralField& g, int n, double sigma_sq, int out_band = -1);
// Scalar Hermite polynomial by the same recurrence.
double hermite_scalar(double x, int n, double sigma_sq);

// :(tau_y P_N1 W) P_N2 W: = (tau_y P_N1 W)(P_N2 W) - c[N1, N2](y).
SpectralField translated_pair(const SpectralField& W, double y1, double y2, double y3, double N1, double N2,
                              const RenormContext& ctx);

// Right-hand sides of the binomial formulas for :(V*(W+f)^2)(W+f): and
// int :(V*(W+f)^2)(W+f)^2:.
SpectralField binomial_expand_cubic(const SpectralField& W, const SpectralField& f, const RenormContext& ctx,
                                    int out_band = -1);
double binomial_expand_quartic(const SpectralField& W, const SpectralField& f, const RenormContext& ctx);

}  // namespace hartree
