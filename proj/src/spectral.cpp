#include "hartree/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <unordered_map>

namespace hartree {

LatticeSpec::LatticeSpec(int k, int pband) : K(k), product_band(pband < 0 ? 2 * k : pband) {
    if (K < 1) throw std::invalid_argument("LatticeSpec: K must be >= 1");
    if (product_band < 2 * K) throw std::invalid_argument("LatticeSpec: product_band must be >= 2K");
}

// ---------------------------------------------------------------------------
// SpectralField

SpectralField::SpectralField(int band) : band_(band) {
    if (band < 0) throw std::invalid_argument("SpectralField: negative band");
    const std::size_t s = std::size_t(2 * band + 1);
    c_.assign(s * s * s, cplx(0.0));
}

SpectralField SpectralField::constant(double c, int band) {
    SpectralField f(band);
    f(0, 0, 0) = c;
    return f;
}

SpectralField SpectralField::cosine_mode(int x, int y, int z, int band) {
    SpectralField f(band);
    if (!f.contains(x, y, z)) throw BandError("cosine_mode: mode outside band");
    if (x == 0 && y == 0 && z == 0) {
        f(0, 0, 0) = 1.0;
    } else {
        f(x, y, z) += 1.0;
        f(-x, -y, -z) += 1.0;
    }
    return f;
}

SpectralField SpectralField::with_band(int new_band) const {
    SpectralField out(new_band);
    const int b = std::min(band_, new_band);
    for (int x = -b; x <= b; ++x)
        for (int y = -b; y <= b; ++y)
            for (int z = -b; z <= b; ++z) out(x, y, z) = (*this)(x, y, z);
    return out;
}

SpectralField& SpectralField::add_scaled(const SpectralField& g, double s) {
    if (g.band_ > band_) *this = with_band(g.band_);
    if (g.band_ == band_) {
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += s * g.c_[i];
        return *this;
    }
    const int b = g.band_;
    for (int x = -b; x <= b; ++x)
        for (int y = -b; y <= b; ++y)
            for (int z = -b; z <= b; ++z) (*this)(x, y, z) += s * g(x, y, z);
    return *this;
}

SpectralField& SpectralField::operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
}

double SpectralField::hermitian_defect() const {
    double d = 0.0;
    for_each_mode([&](int x, int y, int z, std::size_t i) {
        d = std::max(d, std::abs(c_[index(-x, -y, -z)] - std::conj(c_[i])));
    });
    return d;
}

void SpectralField::symmetrize() {
    for_each_mode([&](int x, int y, int z, std::size_t i) {
        const std::size_t j = index(-x, -y, -z);
        if (j < i) return;
        const cplx avg = 0.5 * (c_[i] + std::conj(c_[j]));
        c_[i] = avg;
        c_[j] = std::conj(avg);
    });
}

double SpectralField::l2_norm() const {
    double s = 0.0;
    for (const auto& v : c_) s += std::norm(v);
    return std::sqrt(s);
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

SpectralField apply_symbol(const SpectralField& f, const std::function<double(int, int, int)>& m) {
    SpectralField out(f.band());
    f.for_each_mode([&](int x, int y, int z, std::size_t i) {
        if (f.data()[i] != cplx(0.0)) out.data()[i] = m(x, y, z) * f.data()[i];
    });
    return out;
}

SpectralField apply_symbol(const SpectralField& f, const std::vector<double>& table, int table_band) {
    if (table_band == f.band()) {
        SpectralField out(f.band());
        for (std::size_t i = 0; i < f.size(); ++i) out.data()[i] = table[i] * f.data()[i];
        return out;
    }
    SpectralField out(f.band());
    const int s = 2 * table_band + 1;
    f.for_each_mode([&](int x, int y, int z, std::size_t i) {
        if (std::abs(x) > table_band || std::abs(y) > table_band || std::abs(z) > table_band) return;
        const std::size_t j = (std::size_t(x + table_band) * s + std::size_t(y + table_band)) * s + std::size_t(z + table_band);
        out.data()[i] = table[j] * f.data()[i];
    });
    return out;
}

// ---------------------------------------------------------------------------
// Cutoffs

double cutoff_rho(double y) {
    if (y <= 0.25) return 1.0;
    if (y >= 4.0) return 0.0;
    const double m = (std::log2(y) + 2.0) / 4.0;
    return 0.5 * (1.0 + std::cos(M_PI * m));
}

double cutoff_rho_prime(double y) {
    if (y <= 0.25 || y >= 4.0) return 0.0;
    const double m = (std::log2(y) + 2.0) / 4.0;
    return -0.5 * M_PI * std::sin(M_PI * m) / (4.0 * y * M_LN2);
}

double bracket_time(double t) { return std::isinf(t) ? std::numeric_limits<double>::infinity() : std::sqrt(1.0 + t * t); }

double rho_t(double nnorm, double t) {
    if (std::isinf(t)) return 1.0;
    return cutoff_rho(nnorm / bracket_time(t));
}

double sigma_t_sq(double nnorm, double t) {
    if (std::isinf(t)) return 0.0;
    const double bt2 = 1.0 + t * t;
    const double y = nnorm / std::sqrt(bt2);
    const double v = -2.0 * cutoff_rho(y) * cutoff_rho_prime(y) * y * t / bt2;
    return v > 0.0 ? v : 0.0;
}

double chi_block(double nnorm, double N) {
    if (N <= 1.0) return rho_t(nnorm, 1.0);
    return rho_t(nnorm, N) - rho_t(nnorm, N / 2.0);
}

SpectralField project(const SpectralField& f, Filter filter, double N) {
    return apply_symbol(f, [&](int x, int y, int z) {
        const double r = mode_norm(x, y, z);
        switch (filter) {
            case Filter::LowPass:
            case Filter::Smooth:
                return rho_t(r, N);
            case Filter::Block:
                return chi_block(r, N);
        }
        return 0.0;
    });
}

// ---------------------------------------------------------------------------
// FFT plumbing. Plans are created once per size under a lock (FFTW planning is
// not thread-safe) with FFTW_ESTIMATE so the chosen algorithm, and hence every
// rounding, is the same on every run. Execution uses per-thread buffers.

namespace {

struct Plans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

struct Buffers {
    int n = 0;
    double* r = nullptr;
    fftw_complex* c = nullptr;
    Buffers() = default;
    Buffers(const Buffers&) = delete;
    Buffers& operator=(const Buffers&) = delete;
    ~Buffers() {
        if (r) fftw_free(r);
        if (c) fftw_free(c);
    }
};

std::size_t spec_count(int n) { return std::size_t(n) * n * (n / 2 + 1); }

Buffers& buffers_for(int n) {
    thread_local std::map<int, std::unique_ptr<Buffers>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    std::size_t bytes = 0;
    for (const auto& kv : cache) bytes += std::size_t(kv.first) * kv.first * kv.first * 24;
    if (bytes > (std::size_t(1) << 30)) cache.clear();
    auto b = std::make_unique<Buffers>();
    b->n = n;
    b->r = static_cast<double*>(fftw_malloc(sizeof(double) * std::size_t(n) * n * n));
    b->c = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spec_count(n)));
    if (!b->r || !b->c) throw std::bad_alloc();
    auto& ref = *b;
    cache.emplace(n, std::move(b));
    return ref;
}

const Plans& plans_for(int n) {
    static std::unordered_map<int, Plans> plans;
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    double* r = static_cast<double*>(fftw_malloc(sizeof(double) * std::size_t(n) * n * n));
    fftw_complex* c = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spec_count(n)));
    Plans p;
    p.r2c = fftw_plan_dft_r2c_3d(n, n, n, r, c, FFTW_ESTIMATE);
    p.c2r = fftw_plan_dft_c2r_3d(n, n, n, c, r, FFTW_ESTIMATE);
    fftw_free(r);
    fftw_free(c);
    return plans.emplace(n, p).first->second;
}

inline int wrap(int k, int n) { return k >= 0 ? k : k + n; }

}  // namespace

int fft_size_at_least(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5, 7})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

PhysicalField to_physical(const SpectralField& f, int n) {
    const int b = f.band();
    if (n < 2 * b + 1) throw BandError("to_physical: grid too coarse for band");
    const Plans& plans = plans_for(n);
    Buffers& buf = buffers_for(n);
    const int nz = n / 2 + 1;
    std::fill(reinterpret_cast<double*>(buf.c), reinterpret_cast<double*>(buf.c) + 2 * spec_count(n), 0.0);
    for (int x = -b; x <= b; ++x)
        for (int y = -b; y <= b; ++y)
            for (int z = 0; z <= b; ++z) {
                const cplx v = f(x, y, z);
                const std::size_t k = (std::size_t(wrap(x, n)) * n + wrap(y, n)) * nz + z;
                buf.c[k][0] = v.real();
                buf.c[k][1] = v.imag();
            }
    fftw_execute_dft_c2r(plans.c2r, buf.c, buf.r);
    PhysicalField p(n);
    std::copy(buf.r, buf.r + std::size_t(n) * n * n, p.data().begin());
    return p;
}

SpectralField to_spectral(const PhysicalField& p, int out_band) {
    const int n = p.n();
    if (n < 2 * out_band + 1) throw BandError("to_spectral: grid too coarse for band");
    const Plans& plans = plans_for(n);
    Buffers& buf = buffers_for(n);
    std::copy(p.data().begin(), p.data().end(), buf.r);
    fftw_execute_dft_r2c(plans.r2c, buf.r, buf.c);
    const int nz = n / 2 + 1;
    const double scale = 1.0 / (double(n) * n * n);
    SpectralField f(out_band);
    const int b = out_band;
    for (int x = -b; x <= b; ++x)
        for (int y = -b; y <= b; ++y)
            for (int z = 0; z <= b; ++z) {
                const std::size_t k = (std::size_t(wrap(x, n)) * n + wrap(y, n)) * nz + z;
                const cplx v(buf.c[k][0] * scale, buf.c[k][1] * scale);
                f(x, y, z) = v;
                f(-x, -y, -z) = std::conj(v);
            }
    // The z = 0 plane comes out Hermitian only up to rounding; make it exact.
    for (int x = -b; x <= b; ++x)
        for (int y = -b; y <= b; ++y) {
            if (x < 0 || (x == 0 && y < 0)) continue;
            const cplx avg = 0.5 * (f(x, y, 0) + std::conj(f(-x, -y, 0)));
            f(x, y, 0) = avg;
            f(-x, -y, 0) = std::conj(avg);
        }
    f(0, 0, 0) = f(0, 0, 0).real();
    return f;
}

// ---------------------------------------------------------------------------
// Products

SpectralField multiply(const LatticeSpec& lat, const SpectralField& f, const SpectralField& g) {
    const int out = f.band() + g.band();
    if (out > lat.product_band) throw BandError("multiply: band(f) + band(g) exceeds product band");
    return multiply(f, g, out);
}

SpectralField multiply(const SpectralField& f, const SpectralField& g, int out_band) {
    const int full = f.band() + g.band();
    const int ob = std::min(out_band, full);
    const int n = fft_size_at_least(std::max({f.band() + g.band() + ob + 1, 2 * std::max(f.band(), g.band()) + 1, 2 * ob + 1}));
    PhysicalField pf = to_physical(f, n);
    const PhysicalField pg = to_physical(g, n);
    for (std::size_t i = 0; i < pf.data().size(); ++i) pf[i] *= pg[i];
    SpectralField out = to_spectral(pf, ob);
    return ob == out_band ? out : out.with_band(out_band);
}

SpectralField multiply_direct(const SpectralField& f, const SpectralField& g, int out_band) {
    SpectralField out(out_band);
    f.for_each_mode([&](int x1, int y1, int z1, std::size_t i) {
        const cplx a = f.data()[i];
        if (a == cplx(0.0)) return;
        g.for_each_mode([&](int x2, int y2, int z2, std::size_t j) {
            const int x = x1 + x2, y = y1 + y2, z = z1 + z2;
            if (out.contains(x, y, z)) out(x, y, z) += a * g.data()[j];
        });
    });
    return out;
}

double integrate(const SpectralField& f) { return f(0, 0, 0).real(); }

double pairing(const SpectralField& f, const SpectralField& g) {
    double s = 0.0;
    const int b = std::min(f.band(), g.band());
    for (int x = -b; x <= b; ++x)
        for (int y = -b; y <= b; ++y)
            for (int z = -b; z <= b; ++z) s += (f(x, y, z) * g(-x, -y, -z)).real();
    return s;
}

double sobolev_norm(const SpectralField& f, double s) {
    double acc = 0.0;
    f.for_each_mode([&](int x, int y, int z, std::size_t i) {
        acc += std::pow(1.0 + x * x + y * y + z * z, s) * std::norm(f.data()[i]);
    });
    return std::sqrt(acc);
}

double besov_norm(const SpectralField& f, double s) {
    const int b = f.band();
    const int n = fft_size_at_least(std::max(4 * b, 2 * b + 1));
    const double rmax = std::sqrt(3.0) * b;
    double best = 0.0;
    for (double N = 1.0;; N *= 2.0) {
        const SpectralField pn = project(f, Filter::Block, N);
        const PhysicalField p = to_physical(pn, n);
        double mx = 0.0;
        for (double v : p.data()) mx = std::max(mx, std::abs(v));
        best = std::max(best, std::pow(N, s) * mx);
        // Once rho_{N} is identically one on the band, later blocks vanish.
        if (rho_t(rmax, N) == 1.0) break;
    }
    return best;
}

SpectralField translate(const SpectralField& f, double y1, double y2, double y3) {
    SpectralField out(f.band());
    f.for_each_mode([&](int x, int y, int z, std::size_t i) {
        const double ph = -(x * y1 + y * y2 + z * y3);
        out.data()[i] = f.data()[i] * cplx(std::cos(ph), std::sin(ph));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Potential

namespace {

constexpr double kCutInner = 1.0;
constexpr double kCutOuter = 2.5;

double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / s);
    const double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

double radial_cut(double r) { return 1.0 - smooth_step((r - kCutInner) / (kCutOuter - kCutInner)); }

// int_0^R r^{beta-1} cut(r) sinc(k r) dr, the radial part of the 3-D Fourier
// transform of r^{beta-3} cut(r) (times 4 pi).
double radial_transform(double beta, double k) {
    using boost::math::quadrature::gauss;
    auto integrand = [&](double r) {
        const double kr = k * r;
        const double sinc = kr < 1e-8 ? 1.0 - kr * kr / 6.0 : std::sin(kr) / kr;
        return std::pow(r, beta - 1.0) * radial_cut(r) * sinc;
    };
    const double h = std::min(0.05, 0.5 / std::max(k, 1.0));
    // Near the origin substitute r = s^{1/beta}, which absorbs r^{beta-1}.
    auto head = [&](double s) {
        const double r = std::pow(s, 1.0 / beta);
        const double kr = k * r;
        const double sinc = kr < 1e-8 ? 1.0 - kr * kr / 6.0 : std::sin(kr) / kr;
        return radial_cut(r) * sinc / beta;
    };
    double total = gauss<double, 30>::integrate(head, 0.0, std::pow(h, beta));
    const int panels = int(std::ceil((kCutOuter - h) / h));
    const double w = (kCutOuter - h) / panels;
    for (int p = 0; p < panels; ++p) {
        const double a = h + p * w;
        total += gauss<double, 20>::integrate(integrand, a, a + w);
    }
    return total;
}

}  // namespace

Potential Potential::fourier(double beta, double c_beta) {
    if (!(beta > 0.0 && beta < 3.0)) throw std::invalid_argument("Potential: beta must lie in (0,3)");
    if (!(c_beta > 0.0)) throw std::invalid_argument("Potential: c_beta must be positive");
    Potential v;
    v.beta_ = beta;
    v.c_beta_ = c_beta;
    v.mode_ = PotentialMode::Fourier;
    return v;
}

Potential Potential::physical(double beta, double c_beta, int table_band) {
    Potential v = fourier(beta, c_beta);
    v.mode_ = PotentialMode::Physical;
    v.table_band_ = table_band;
    // R^3 transform of |x|^{beta-3} is C(beta) |xi|^{-beta}; the torus
    // coefficients carry the normalized measure dx / (2 pi)^3.
    const double cb = std::pow(M_PI, 1.5) * std::pow(2.0, beta) * boost::math::tgamma(beta / 2.0) /
                      boost::math::tgamma((3.0 - beta) / 2.0);
    v.amplitude_ = c_beta * std::pow(2.0 * M_PI, 3) / cb;
    v.shift_ = 0.1 * c_beta;
    const double pref = v.amplitude_ * 4.0 * M_PI / std::pow(2.0 * M_PI, 3);
    std::map<int, double> by_sq;
    SpectralField layout(table_band);
    v.table_.assign(layout.size(), 0.0);
    layout.for_each_mode([&](int x, int y, int z, std::size_t i) {
        const int sq = x * x + y * y + z * z;
        auto it = by_sq.find(sq);
        if (it == by_sq.end()) it = by_sq.emplace(sq, pref * radial_transform(beta, std::sqrt(double(sq)))).first;
        v.table_[i] = it->second + (sq == 0 ? v.shift_ : 0.0);
        if (!(v.table_[i] > 0.0)) throw std::runtime_error("Potential: physical-built symbol is not positive");
    });
    return v;
}

double Potential::vhat(int x, int y, int z) const {
    if (mode_ == PotentialMode::Fourier) return c_beta_ * std::pow(1.0 + x * x + y * y + z * z, -0.5 * beta_);
    const int b = table_band_;
    if (std::abs(x) > b || std::abs(y) > b || std::abs(z) > b) throw BandError("Potential: mode outside table band");
    const int s = 2 * b + 1;
    return table_[(std::size_t(x + b) * s + std::size_t(y + b)) * s + std::size_t(z + b)];
}

double Potential::residual(int x, int y, int z) const {
    return vhat(x, y, z) - c_beta_ * std::pow(1.0 + x * x + y * y + z * z, -0.5 * beta_);
}

std::vector<double> Potential::table(int band) const {
    SpectralField layout(band);
    std::vector<double> t(layout.size());
    if (mode_ == PotentialMode::Fourier) {
        std::map<int, double> by_sq;
        layout.for_each_mode([&](int x, int y, int z, std::size_t i) {
            const int sq = x * x + y * y + z * z;
            auto it = by_sq.find(sq);
            if (it == by_sq.end()) it = by_sq.emplace(sq, c_beta_ * std::pow(1.0 + sq, -0.5 * beta_)).first;
            t[i] = it->second;
        });
    } else {
        layout.for_each_mode([&](int x, int y, int z, std::size_t i) { t[i] = vhat(x, y, z); });
    }
    return t;
}

PhysicalField Potential::band_limited_physical(int band, int n) const {
    SpectralField v(band);
    const auto t = table(band);
    for (std::size_t i = 0; i < t.size(); ++i) v.data()[i] = t[i];
    return to_physical(v, n);
}

double Potential::physical_value(double r) const {
    if (mode_ != PotentialMode::Physical) throw std::logic_error("Potential: physical_value needs physical mode");
    return amplitude_ * std::pow(r, beta_ - 3.0) * radial_cut(r) + shift_;
}

Potential make_potential(double beta, double c_beta, int K, PotentialMode mode) {
    if (mode == PotentialMode::Fourier) return Potential::fourier(beta, c_beta);
    return Potential::physical(beta, c_beta, 2 * K);
}

}  // namespace hartree
