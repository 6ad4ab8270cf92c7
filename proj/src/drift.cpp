#include "hartree/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hartree/parallel.hpp"

namespace hartree {

namespace {

SpectralField times_table(const SpectralField& f, const std::vector<double>& t, double s = 1.0) {
    SpectralField out = f;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s * t[i];
    return out;
}

}  // namespace

DriftModel::DriftModel(const TimeGrid& grid, double T, const Potential& V, int band, DriftOptions opts)
    : grid_(grid),
      T_(T),
      band_(band),
      opts_(opts),
      ladder_(context_ladder(grid, T, V, opts.lambda, opts.n_power, band)),
      amps_(grid, band, T),
      ctx_inf_(build_context(std::numeric_limits<double>::infinity(), T, V, opts.lambda, opts.n_power, band)) {
    if (opts.n_power < 1 || opts.n_power % 2 == 0) throw std::invalid_argument("DriftModel: n_power must be odd");
    if (opts.lambda < 0.0) throw std::invalid_argument("DriftModel: lambda must be nonnegative");
    if (!(opts.cap > 0.0)) throw std::invalid_argument("DriftModel: cap must be positive");
    SpectralField layout(band);
    half_smoothing_.resize(layout.size());
    layout.for_each_mode([&](int x, int y, int z, std::size_t i) {
        half_smoothing_[i] = 1.0 / std::sqrt(bracket(mode_norm(x, y, z)));
    });
    for (int k = 0; k < grid.intervals(); ++k) J_.push_back(amps_.J(k));
}

SpectralField DriftModel::forcing(const SpectralField& field, int k, SpectralField* cubic_part,
                                  SpectralField* hermite_part) const {
    if (field.band() > band_) throw BandError("forcing: field band exceeds the lattice band");
    const SpectralField f = field.with_band(band_);
    const RenormContext& ctx = ladder_[std::size_t(k)];
    const std::vector<double>& J = J_[std::size_t(k)];
    SpectralField cubic(band_), herm(band_);
    if (opts_.lambda != 0.0) cubic = times_table(wick_cubic(f, ctx), J, -opts_.lambda);
    if (opts_.hermite_term) {
        const SpectralField g = times_table(f, half_smoothing_);
        const SpectralField H = hermite_power(g, opts_.n_power, ctx.hermite_var, band_);
        herm = times_table(times_table(H, half_smoothing_), J);
    }
    if (cubic_part) *cubic_part = cubic;
    if (hermite_part) *hermite_part = herm;
    return cubic + herm;
}

DriftTrajectory DriftModel::run(const BrownianDriver& driver, const GaussianPath& path, bool constructive,
                                double cap, SpectralField* g3, SpectralField* gn) const {
    if (driver.band() != band_) throw BandError("drift: driver band differs from the model band");
    if (driver.grid().nodes() != grid_.nodes()) throw std::invalid_argument("drift: driver grid differs from the model grid");
    const int m = grid_.intervals();
    DriftTrajectory tr;
    tr.T = T_;
    tr.seed = driver.seed();
    tr.task = driver.task();
    tr.reference = constructive;
    tr.I.emplace_back(band_);
    tr.cum_l2.push_back(0.0);
    if (g3) *g3 = SpectralField(band_);
    if (gn) *gn = SpectralField(band_);
    for (int k = 0; k < m; ++k) {
        const double dt = grid_.dt(k);
        SpectralField field = path.at(k);
        if (!constructive) field -= tr.I.back();
        SpectralField cp, hp;
        SpectralField u = forcing(field, k, &cp, &hp);
        const double e = pairing(u, u) * dt;
        if (tr.tau_hit || tr.cum_l2.back() + e > cap) {
            if (!tr.tau_hit) tr.tau_hit = k;
            u = SpectralField(band_);
            cp = hp = u;
        }
        const double e_used = pairing(u, u) * dt;
        tr.cum_l2.push_back(tr.cum_l2.back() + e_used);
        tr.energy += e_used;
        tr.stochastic_integral += pairing(u, driver.increment(k));
        const std::vector<double>& a = amps_.amp(k + 1);
        const double s = std::sqrt(dt);
        tr.I.push_back(tr.I.back() + times_table(u, a, s));
        if (g3) *g3 += times_table(cp, a, s);
        if (gn) *gn += times_table(hp, a, s);
        tr.u.push_back(std::move(u));
    }
    // Under the constructive sampler the recorded increments are those of B^u,
    // so the P-increments are Delta B^u + u dt.
    tr.girsanov_log = constructive ? tr.stochastic_integral + 0.5 * tr.energy : tr.stochastic_integral - 0.5 * tr.energy;
    return tr;
}

DriftTrajectory DriftModel::solve(const BrownianDriver& driver) const { return solve(driver, opts_.cap); }

DriftTrajectory DriftModel::solve(const BrownianDriver& driver, double cap) const {
    const GaussianPath path(driver, T_);
    return run(driver, path, false, cap, nullptr, nullptr);
}

ReferenceSample DriftModel::sample_reference(const BrownianDriver& driver) const {
    const GaussianPath Y(driver, T_);
    ReferenceSample s;
    s.traj = run(driver, Y, true, opts_.cap, &s.g3, &s.gn);
    s.Y_inf = Y.infinity();
    s.W_inf = s.Y_inf + s.traj.I.back();
    return s;
}

double DriftModel::renormalized_potential(const SpectralField& f, double c) const {
    if (opts_.lambda == 0.0) return c;
    return 0.25 * opts_.lambda * wick_quartic_energy(f, ctx_inf_) + c;
}

double DriftModel::gibbs_log_weight(const ReferenceSample& s, double c) const {
    if (!s.traj.reference) throw std::invalid_argument("gibbs_log_weight: trajectory is not a reference sample");
    return -renormalized_potential(s.W_inf, c) - s.traj.stochastic_integral - 0.5 * s.traj.energy;
}

double DriftModel::gibbs_log_weight(const ReferenceSample& s, const BrownianDriver& driver, double c) const {
    if (s.traj.seed != driver.seed() || s.traj.task != driver.task())
        throw std::invalid_argument("gibbs_log_weight: sample was drawn from a different driver");
    return gibbs_log_weight(s, c);
}

double girsanov_log_density(const DriftTrajectory& traj) { return traj.girsanov_log; }

double girsanov_log_density(const std::vector<SpectralField>& u, const BrownianDriver& driver) {
    if (int(u.size()) != driver.grid().intervals()) throw std::invalid_argument("girsanov_log_density: need one drift value per interval");
    double s = 0.0;
    for (int k = 0; k < driver.grid().intervals(); ++k) {
        const SpectralField& uk = u[std::size_t(k)];
        s += pairing(uk, driver.increment(k).with_band(uk.band())) - 0.5 * pairing(uk, uk) * driver.grid().dt(k);
    }
    return s;
}

WeightSummary summarize_log_weights(const std::vector<double>& logw) {
    WeightSummary w;
    w.n = logw.size();
    if (logw.empty()) return w;
    const double mx = *std::max_element(logw.begin(), logw.end());
    double s1 = 0.0, s2 = 0.0;
    for (double l : logw) {
        const double e = std::exp(l - mx);
        s1 += e;
        s2 += e * e;
    }
    const double n = double(logw.size());
    const double mean = s1 / n;
    const double var = n > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1)) : 0.0;
    w.log_mean = mx + std::log(mean);
    w.mean = std::exp(w.log_mean);
    w.stderr_ = std::exp(mx) * std::sqrt(var / n);
    w.ess = s1 * s1 / s2;
    return w;
}

LqEstimate self_normalized_moment(const std::vector<double>& logw, double q) {
    LqEstimate r;
    if (logw.empty()) return r;
    const double mx = *std::max_element(logw.begin(), logw.end());
    const double n = double(logw.size());
    double a = 0.0, b = 0.0, s1 = 0.0, s2 = 0.0;
    std::vector<double> w(logw.size()), wq(logw.size());
    for (std::size_t i = 0; i < logw.size(); ++i) {
        w[i] = std::exp(logw[i] - mx);
        wq[i] = std::pow(w[i], q);
        a += wq[i];
        b += w[i];
        s2 += w[i] * w[i];
    }
    s1 = b;
    a /= n;
    b /= n;
    r.value = a / std::pow(b, q);
    double vaa = 0.0, vbb = 0.0, vab = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        vaa += (wq[i] - a) * (wq[i] - a);
        vbb += (w[i] - b) * (w[i] - b);
        vab += (wq[i] - a) * (w[i] - b);
    }
    const double ga = 1.0 / std::pow(b, q), gb = -q * a / std::pow(b, q + 1.0);
    const double var = (ga * ga * vaa + gb * gb * vbb + 2.0 * ga * gb * vab) / std::max(1.0, n - 1.0);
    r.stderr_ = std::sqrt(std::max(0.0, var) / n);
    r.ess = s1 * s1 / s2;
    return r;
}

ReferenceEnsemble reference_ensemble(const DriftModel& model, std::size_t samples, uint64_t seed, int workers) {
    struct Item {
        double logw = 0.0;
        bool hit = false;
    };
    ReferenceEnsemble out;
    out.log_weights.reserve(samples);
    parallel_map_reduce(
        samples, workers,
        [&](std::size_t i) {
            const BrownianDriver d = BrownianDriver::sample(model.grid(), LatticeSpec(model.band()), seed, i);
            const ReferenceSample s = model.sample_reference(d);
            return Item{model.gibbs_log_weight(s, d, 0.0), bool(s.traj.tau_hit)};
        },
        0,
        [&](int&, const Item& it) {
            out.log_weights.push_back(it.logw);
            out.tau_hits += it.hit ? 1 : 0;
        });
    return out;
}

LqEstimate density_lq_probe(const DriftModel& model, double q, std::size_t samples, uint64_t seed, int workers) {
    if (!(q >= 1.0)) throw std::invalid_argument("density_lq_probe: q must be >= 1");
    const ReferenceEnsemble e = reference_ensemble(model, samples, seed, workers);
    LqEstimate r = self_normalized_moment(e.log_weights, q);
    r.tau_hits = e.tau_hits;
    return r;
}

WeightSummary partition_P(const DriftModel& model, std::size_t samples, uint64_t seed, int workers) {
    const std::vector<double> logw = parallel_samples(samples, workers, [&](std::size_t i) {
        return -model.renormalized_potential(sample_gff(model.band(), model.T(), seed, i), 0.0);
    });
    return summarize_log_weights(logw);
}

WeightSummary partition_Q(const DriftModel& model, std::size_t samples, uint64_t seed, int workers) {
    return summarize_log_weights(reference_ensemble(model, samples, seed, workers).log_weights);
}

}  // namespace hartree
