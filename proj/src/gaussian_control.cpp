#include "hartree/gaussian_control.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "hartree/rng.hpp"

namespace hartree {

TimeGrid TimeGrid::log_uniform(double bracket_end, int per_octave) {
    if (per_octave < 1) throw std::invalid_argument("TimeGrid: per_octave must be >= 1");
    if (!(bracket_end >= 1.0) || std::isinf(bracket_end)) throw std::invalid_argument("TimeGrid: bad end point");
    const int octaves = std::max(1, int(std::ceil(std::log2(bracket_end) - 1e-12)));
    const int m = octaves * per_octave;
    TimeGrid g;
    g.per_octave_ = per_octave;
    g.t_.resize(std::size_t(m) + 1);
    for (int k = 0; k <= m; ++k) {
        const double b = std::exp2(double(k) / per_octave);
        g.t_[std::size_t(k)] = std::sqrt(std::max(0.0, b * b - 1.0));
    }
    g.t_[0] = 0.0;
    return g;
}

TimeGrid TimeGrid::covering(double T_max, int per_octave, int K) {
    const double band_end = 4.0 * std::sqrt(3.0) * K * 1.0001;
    const double end = std::isinf(T_max) ? band_end : std::min(16.0 * bracket_time(T_max), std::max(band_end, 1.0));
    // With a finite T only modes with |n| < 4<T> are active, and those have
    // sigma_t = 0 once <t> >= 4|n|, so min(16 <T>, band end) covers everything.
    return log_uniform(std::max(end, 2.0), per_octave);
}

TimeGrid TimeGrid::coarsened(int factor) const {
    if (factor < 1 || per_octave_ % factor != 0) throw std::invalid_argument("TimeGrid: bad coarsening factor");
    TimeGrid g;
    g.per_octave_ = per_octave_ / factor;
    for (std::size_t k = 0; k < t_.size(); k += std::size_t(factor)) g.t_.push_back(t_[k]);
    return g;
}

int TimeGrid::node_index(double t) const {
    for (std::size_t k = 0; k < t_.size(); ++k)
        if (std::abs(t_[k] - t) <= 1e-12 * std::max(1.0, t)) return int(k);
    return -1;
}

SpectralField standard_noise(int band, uint64_t seed, uint64_t task, uint32_t stream) {
    CounterRng rng(seed, task, stream);
    SpectralField f(band);
    for (int x = 0; x <= band; ++x)
        for (int y = (x == 0 ? 0 : -band); y <= band; ++y)
            for (int z = (x == 0 && y == 0 ? 0 : -band); z <= band; ++z) {
                if (x == 0 && y == 0 && z == 0) {
                    f(0, 0, 0) = rng.normal();
                    continue;
                }
                const cplx g = rng.complex_normal();
                f(x, y, z) = g;
                f(-x, -y, -z) = std::conj(g);
            }
    return f;
}

BrownianDriver BrownianDriver::sample(const TimeGrid& grid, const LatticeSpec& lat, uint64_t seed, uint64_t task) {
    BrownianDriver d;
    d.grid_ = grid;
    d.band_ = lat.K;
    d.seed_ = seed;
    d.task_ = task;
    const int slots = grid.intervals() + 2;
    d.noise_.reserve(std::size_t(slots));
    for (int s = 0; s < slots; ++s) d.noise_.push_back(standard_noise(lat.K, seed, task, uint32_t(s)));
    return d;
}

SpectralField BrownianDriver::increment(int k) const { return std::sqrt(grid_.dt(k)) * noise_[std::size_t(k) + 1]; }

BrownianDriver BrownianDriver::coarsened(int factor) const {
    BrownianDriver d;
    d.grid_ = grid_.coarsened(factor);
    d.band_ = band_;
    d.seed_ = seed_;
    d.task_ = task_;
    d.noise_.push_back(noise_.front());
    const int m = grid_.intervals();
    for (int k0 = 0; k0 < m; k0 += factor) {
        SpectralField acc(band_);
        double span = 0.0;
        for (int k = k0; k < k0 + factor; ++k) {
            acc.add_scaled(noise_[std::size_t(k) + 1], std::sqrt(grid_.dt(k)));
            span += grid_.dt(k);
        }
        acc *= 1.0 / std::sqrt(span);
        d.noise_.push_back(std::move(acc));
    }
    d.noise_.push_back(noise_.back());
    return d;
}

BrownianDriver BrownianDriver::with_drift(const std::vector<SpectralField>& u) const {
    if (int(u.size()) != grid_.intervals()) throw std::invalid_argument("with_drift: need one drift value per interval");
    BrownianDriver d = *this;
    for (int k = 0; k < grid_.intervals(); ++k)
        d.noise_[std::size_t(k) + 1].add_scaled(u[std::size_t(k)].with_band(band_), std::sqrt(grid_.dt(k)));
    return d;
}

// ---------------------------------------------------------------------------

namespace {

// Expand a function of |n|^2 onto the cube layout, evaluating it once per
// distinct squared norm.
template <class Fn>
std::vector<double> radial_table(int band, Fn&& fn) {
    SpectralField layout(band);
    std::vector<double> out(layout.size());
    std::map<int, double> cache;
    layout.for_each_mode([&](int x, int y, int z, std::size_t i) {
        const int sq = x * x + y * y + z * z;
        auto it = cache.find(sq);
        if (it == cache.end()) it = cache.emplace(sq, fn(std::sqrt(double(sq)))).first;
        out[i] = it->second;
    });
    return out;
}

}  // namespace

SlotAmplitudes::SlotAmplitudes(const TimeGrid& grid, int band, double T) : band_(band), T_(T), grid_(grid) {
    const int m = grid.intervals();
    amp_.reserve(std::size_t(m) + 2);
    amp_.push_back(radial_table(band, [&](double r) { return rho_t(r, T) * rho_t(r, 0.0) / bracket(r); }));
    for (int k = 0; k < m; ++k) {
        const double t0 = grid.t(k), t1 = grid.t(k + 1);
        amp_.push_back(radial_table(band, [&](double r) {
            const double a = rho_t(r, t0), b = rho_t(r, t1);
            return rho_t(r, T) * std::sqrt(std::max(0.0, b * b - a * a)) / bracket(r);
        }));
    }
    const double tm = grid.end();
    amp_.push_back(radial_table(band, [&](double r) {
        const double a = rho_t(r, tm);
        return rho_t(r, T) * std::sqrt(std::max(0.0, 1.0 - a * a)) / bracket(r);
    }));
}

std::vector<double> SlotAmplitudes::J(int k) const {
    std::vector<double> j = amp_[std::size_t(k) + 1];
    const double s = 1.0 / std::sqrt(grid_.dt(k));
    for (auto& v : j) v *= s;
    return j;
}

double SlotAmplitudes::variance(int slot, int x, int y, int z) const {
    const int s = 2 * band_ + 1;
    const double a = amp_[std::size_t(slot)][(std::size_t(x + band_) * s + std::size_t(y + band_)) * s + std::size_t(z + band_)];
    return a * a;
}

GaussianPath::GaussianPath(const BrownianDriver& driver, double T)
    : T_(T), grid_(driver.grid()), band_(driver.band()), amps_(driver.grid(), driver.band(), T) {
    const int m = grid_.intervals();
    nodes_.reserve(std::size_t(m) + 1);
    nodes_.push_back(apply_symbol(driver.head(), amps_.amp(0), band_));
    for (int k = 0; k < m; ++k) {
        SpectralField next = nodes_.back();
        next += apply_symbol(driver.noise(k + 1), amps_.amp(k + 1), band_);
        nodes_.push_back(std::move(next));
    }
    inf_ = nodes_.back() + apply_symbol(driver.tail(), amps_.amp(m + 1), band_);
}

SpectralField GaussianPath::slot_increment(int slot) const {
    const int m = grid_.intervals();
    if (slot == 0) return nodes_.front();
    if (slot == m + 1) return inf_ - nodes_.back();
    return nodes_[std::size_t(slot)] - nodes_[std::size_t(slot) - 1];
}

GaussianPath build_path(const BrownianDriver& driver, double T) { return GaussianPath(driver, T); }

double covariance_oracle(int x, int y, int z, double t, double T) {
    const double r = mode_norm(x, y, z);
    const double v = rho_t(r, t) * rho_t(r, T) / bracket(r);
    return v * v;
}

SpectralField sample_gff(int band, double T, uint64_t seed, uint64_t task) {
    const SpectralField g = standard_noise(band, seed, task, 0xFFFFFFFFu);
    const auto amp = radial_table(band, [&](double r) { return rho_t(r, T) / bracket(r); });
    return apply_symbol(g, amp, band);
}

std::vector<SpectralField> integrate_I(const std::vector<SpectralField>& u, const TimeGrid& grid, double T) {
    const int m = grid.intervals();
    if (int(u.size()) != m) throw std::invalid_argument("integrate_I: need one drift value per interval");
    const int band = u.empty() ? 0 : u.front().band();
    const SlotAmplitudes amps(grid, band, T);
    std::vector<SpectralField> I;
    I.reserve(std::size_t(m) + 1);
    I.emplace_back(band);
    for (int k = 0; k < m; ++k) {
        // J_k^T u_k dt_k = amp_k sqrt(dt_k) u_k.
        const std::vector<double>& a = amps.amp(k + 1);
        const double s = std::sqrt(grid.dt(k));
        SpectralField next = I.back();
        const SpectralField& uk = u[std::size_t(k)];
        for (std::size_t i = 0; i < next.size(); ++i) next.data()[i] += a[i] * s * uk.data()[i];
        I.push_back(std::move(next));
    }
    return I;
}

}  // namespace hartree
