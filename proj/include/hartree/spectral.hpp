#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace hartree {

using cplx = std::complex<double>;

class BandError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double bracket(double r) { return std::sqrt(1.0 + r * r); }

inline double mode_norm(int x, int y, int z) { return std::sqrt(double(x * x + y * y + z * z)); }

// Ambient truncated lattice |n|_inf <= K. Products are exact up to product_band.
struct LatticeSpec {
    int K = 1;
    int product_band = 2;

    LatticeSpec() = default;
    explicit LatticeSpec(int k, int pband = -1);
};

// Fourier coefficients of a real field on the torus, stored densely on the
// cube |n|_inf <= band. Index (x, y, z) with each coordinate in [-band, band].
class SpectralField {
public:
    SpectralField() : SpectralField(0) {}
    explicit SpectralField(int band);

    static SpectralField constant(double c, int band = 0);
    // e^{i<n,x>} + e^{-i<n,x>} (or 1 for n = 0).
    static SpectralField cosine_mode(int x, int y, int z, int band);

    int band() const { return band_; }
    int side() const { return 2 * band_ + 1; }
    std::size_t size() const { return c_.size(); }

    std::size_t index(int x, int y, int z) const {
        const int s = side();
        return (std::size_t(x + band_) * s + std::size_t(y + band_)) * s + std::size_t(z + band_);
    }
    bool contains(int x, int y, int z) const {
        return std::abs(x) <= band_ && std::abs(y) <= band_ && std::abs(z) <= band_;
    }

    cplx& operator()(int x, int y, int z) { return c_[index(x, y, z)]; }
    const cplx& operator()(int x, int y, int z) const { return c_[index(x, y, z)]; }
    // Coefficient with zero extension outside the stored band.
    cplx coeff(int x, int y, int z) const { return contains(x, y, z) ? c_[index(x, y, z)] : cplx(0.0); }

    std::vector<cplx>& data() { return c_; }
    const std::vector<cplx>& data() const { return c_; }

    // Zero-padded or truncated copy with the given band.
    SpectralField with_band(int new_band) const;

    SpectralField& add_scaled(const SpectralField& g, double s);
    SpectralField& operator+=(const SpectralField& g) { return add_scaled(g, 1.0); }
    SpectralField& operator-=(const SpectralField& g) { return add_scaled(g, -1.0); }
    SpectralField& operator*=(double s);

    // max_n |c(-n) - conj(c(n))|
    double hermitian_defect() const;
    // Replace c(n) by (c(n) + conj(c(-n)))/2.
    void symmetrize();
    // sqrt(sum |c(n)|^2), the L^2(T^3) norm in the normalized measure.
    double l2_norm() const;

    template <class Fn>
    void for_each_mode(Fn&& fn) const {
        for (int x = -band_; x <= band_; ++x)
            for (int y = -band_; y <= band_; ++y)
                for (int z = -band_; z <= band_; ++z) fn(x, y, z, index(x, y, z));
    }

private:
    int band_;
    std::vector<cplx> c_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

// Real Fourier symbol applied diagonally: c(n) -> m(n) c(n).
SpectralField apply_symbol(const SpectralField& f, const std::function<double(int, int, int)>& m);
// Same with a dense symbol table stored on the cube |n|_inf <= table_band
// (layout identical to SpectralField); modes outside the table get 0.
SpectralField apply_symbol(const SpectralField& f, const std::vector<double>& table, int table_band);

// ---------------------------------------------------------------------------
// Cutoff profile and stochastic-time multipliers.

double cutoff_rho(double y);
double cutoff_rho_prime(double y);

// <t> = sqrt(1 + t^2); t = +inf is allowed and means "no cutoff".
double bracket_time(double t);

// rho_t(n) as a function of |n|_2.
double rho_t(double nnorm, double t);
// sigma_t(n)^2 = d/dt rho_t(n)^2.
double sigma_t_sq(double nnorm, double t);
// P_N block multiplier chi_N (N dyadic, N = 1 gives rho_1).
double chi_block(double nnorm, double N);

enum class Filter { LowPass, Block, Smooth };
// LowPass: rho_N, Block: chi_N, Smooth: rho_T.
SpectralField project(const SpectralField& f, Filter filter, double N);

// ---------------------------------------------------------------------------
// Products and functionals.

// Exact product of two band-limited fields computed via FFT; the result band
// is band(f) + band(g), which must not exceed the lattice product band.
SpectralField multiply(const LatticeSpec& lat, const SpectralField& f, const SpectralField& g);
// Exact product restricted to modes |n|_inf <= out_band.
SpectralField multiply(const SpectralField& f, const SpectralField& g, int out_band);
// Same product by direct coefficient convolution (reference path).
SpectralField multiply_direct(const SpectralField& f, const SpectralField& g, int out_band);

// Integral over T^3 with normalized measure, i.e. Re f^(0).
double integrate(const SpectralField& f);
// Parseval pairing  int f g dx = sum_n f^(n) g^(-n)  (real for real fields).
double pairing(const SpectralField& f, const SpectralField& g);

double sobolev_norm(const SpectralField& f, double s);
double besov_norm(const SpectralField& f, double s);
SpectralField translate(const SpectralField& f, double y1, double y2, double y3);

// Smallest FFT-friendly size (2^a 3^b 5^c 7^d) that is >= n.
int fft_size_at_least(int n);

// Real samples of a field on the uniform grid x_j = 2 pi j / N.
class PhysicalField {
public:
    PhysicalField() = default;
    explicit PhysicalField(int n) : n_(n), v_(std::size_t(n) * n * n, 0.0) {}
    int n() const { return n_; }
    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }

private:
    int n_ = 0;
    std::vector<double> v_;
};

// Requires n >= 2 band(f) + 1.
PhysicalField to_physical(const SpectralField& f, int n);
// Exact for modes with |m|_inf <= out_band as long as there is no aliasing
// into them, i.e. n > band(content) + out_band.
SpectralField to_spectral(const PhysicalField& p, int out_band);

// ---------------------------------------------------------------------------
// Interaction potential.

enum class PotentialMode { Fourier, Physical };

class Potential {
public:
    // V^(n) = c_beta <n>^{-beta}.
    static Potential fourier(double beta, double c_beta = 1.0);
    // Periodized c |x|^{-(3-beta)} with a smooth cut, shifted to be positive;
    // the amplitude is chosen so that V^(n) ~ c_beta |n|^{-beta} at high
    // frequency. Coefficients are tabulated on |n|_inf <= table_band.
    static Potential physical(double beta, double c_beta, int table_band);

    double beta() const { return beta_; }
    double c_beta() const { return c_beta_; }
    PotentialMode mode() const { return mode_; }
    int table_band() const { return table_band_; }

    double vhat(int x, int y, int z) const;
    double vhat0() const { return vhat(0, 0, 0); }
    // V^(n) - c_beta <n>^{-beta}; identically zero in Fourier mode.
    double residual(int x, int y, int z) const;
    // Dense cube table of V^ with the SpectralField layout.
    std::vector<double> table(int band) const;
    // Samples of the band-limited synthesis sum_{|n|<=band} V^(n) e^{inx}.
    PhysicalField band_limited_physical(int band, int n) const;
    // Value of the physical-space potential at distance r from the origin
    // (Physical mode only; excludes r = 0).
    double physical_value(double r) const;

private:
    double beta_ = 1.0;
    double c_beta_ = 1.0;
    PotentialMode mode_ = PotentialMode::Fourier;
    int table_band_ = 0;
    double amplitude_ = 0.0;
    double shift_ = 0.0;
    std::vector<double> table_;
};

Potential make_potential(double beta, double c_beta, int K, PotentialMode mode);

}  // namespace hartree
