#include "hartree/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hartree {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// prod over runs of equal points of (run length)!
double multiplicity_weight(const ChaosKey& sorted) {
    double w = 1.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        w *= factorial(int(j - i));
        i = j;
    }
    return w;
}

// Every distinct ordering of a sorted key.
template <class Fn>
void for_each_ordering(ChaosKey key, Fn&& fn) {
    std::sort(key.begin(), key.end());
    do fn(key);
    while (std::next_permutation(key.begin(), key.end()));
}

}  // namespace

void ChaosKernel::add(ChaosKey points, cplx value) {
    if (int(points.size()) != order_) throw std::invalid_argument("ChaosKernel: tuple length differs from order");
    std::sort(points.begin(), points.end());
    entries_[points] += value;
}

cplx ChaosKernel::value(ChaosKey points) const {
    std::sort(points.begin(), points.end());
    auto it = entries_.find(points);
    return it == entries_.end() ? cplx(0.0) : it->second;
}

ChaosKernel ChaosKernel::from_ordered(int order, const std::map<ChaosKey, cplx>& ordered) {
    ChaosKernel f(order);
    for (const auto& [key, v] : ordered) {
        if (int(key.size()) != order) throw std::invalid_argument("ChaosKernel: tuple length differs from order");
        for_each_ordering(key, [&](const ChaosKey& perm) {
            auto it = ordered.find(perm);
            const cplx w = it == ordered.end() ? cplx(0.0) : it->second;
            if (std::abs(w - v) > 1e-12 * std::max(1.0, std::abs(v)))
                throw std::invalid_argument("ChaosKernel: kernel is not symmetric");
        });
        ChaosKey s = key;
        std::sort(s.begin(), s.end());
        f.entries_[s] = v;
    }
    return f;
}

ChaosKernel ChaosKernel::symmetrize(int order, const std::map<ChaosKey, cplx>& ordered) {
    ChaosKernel f(order);
    for (const auto& [key, v] : ordered) {
        if (int(key.size()) != order) throw std::invalid_argument("ChaosKernel: tuple length differs from order");
        ChaosKey s = key;
        std::sort(s.begin(), s.end());
        f.entries_[s] += v;
    }
    const double nf = factorial(order);
    for (auto& [key, v] : f.entries_) v *= multiplicity_weight(key) / nf;
    return f;
}

ChaosKernel ChaosKernel::refined(int factor, int coarse_intervals) const {
    ChaosKernel out(order_);
    for (const auto& [key, v] : entries_) {
        // Enumerate the fine slot choice for each argument.
        std::vector<int> choice(key.size(), 0);
        while (true) {
            ChaosKey fine = key;
            for (std::size_t i = 0; i < key.size(); ++i) {
                const int s = key[i].slot;
                if (s == 0) fine[i].slot = 0;
                else if (s == coarse_intervals + 1) fine[i].slot = coarse_intervals * factor + 1;
                else fine[i].slot = (s - 1) * factor + 1 + choice[i];
            }
            std::sort(fine.begin(), fine.end());
            out.entries_[fine] = v;
            std::size_t i = 0;
            for (; i < key.size(); ++i) {
                const int s = key[i].slot;
                if (s == 0 || s == coarse_intervals + 1) continue;
                if (++choice[i] < factor) break;
                choice[i] = 0;
            }
            if (i == key.size()) break;
        }
    }
    return out;
}

ChaosKernel operator*(cplx s, const ChaosKernel& f) {
    ChaosKernel out(f.order());
    for (const auto& [key, v] : f.entries()) out.add(key, s * v);
    return out;
}

ChaosKernel operator+(const ChaosKernel& f, const ChaosKernel& g) {
    if (f.order() != g.order()) throw std::invalid_argument("ChaosKernel: orders differ");
    ChaosKernel out = f;
    for (const auto& [key, v] : g.entries()) out.add(key, v);
    return out;
}

ChaosEvaluator::ChaosEvaluator(const GaussianPath& path) {
    const int slots = path.grid().intervals() + 2;
    inc_.reserve(std::size_t(slots));
    for (int s = 0; s < slots; ++s) inc_.push_back(path.slot_increment(s));
}

cplx ChaosEvaluator::increment(const ChaosPoint& p) const {
    if (p.slot < 0 || p.slot >= int(inc_.size())) throw std::out_of_range("ChaosEvaluator: slot out of range");
    return inc_[std::size_t(p.slot)].coeff(p.x, p.y, p.z);
}

cplx ChaosEvaluator::integral(const ChaosKernel& f) const {
    cplx acc = 0.0;
    for (const auto& [key, v] : f.entries()) {
        bool distinct = true;
        for (std::size_t i = 1; i < key.size(); ++i)
            if (key[i].slot == key[i - 1].slot) distinct = false;
        if (!distinct) continue;
        cplx prod = v;
        for (const auto& p : key) prod *= increment(p);
        acc += prod;
    }
    return factorial(f.order()) * acc;
}

cplx multiple_integral(const ChaosKernel& f, const BrownianDriver& driver, double T) {
    const GaussianPath path(driver, T);
    return ChaosEvaluator(path).integral(f);
}

ChaosKernel contract(const ChaosKernel& f, const ChaosKernel& g, int r, const SlotAmplitudes& amps) {
    const int k = f.order(), l = g.order();
    if (r < 0 || r > std::min(k, l)) throw std::invalid_argument("contract: r out of range");
    // Index the orderings of g by their last r arguments.
    std::map<ChaosKey, std::vector<std::pair<ChaosKey, cplx>>> by_tail;
    for (const auto& [key, v] : g.entries())
        for_each_ordering(key, [&](const ChaosKey& perm) {
            ChaosKey head(perm.begin(), perm.end() - r), tail(perm.end() - r, perm.end());
            by_tail[tail].emplace_back(std::move(head), v);
        });
    std::map<ChaosKey, cplx> ordered;
    for (const auto& [key, v] : f.entries())
        for_each_ordering(key, [&](const ChaosKey& perm) {
            ChaosKey tail;
            double w = 1.0;
            for (auto it = perm.end() - r; it != perm.end(); ++it) {
                tail.push_back(it->negated());
                w *= amps.variance(it->slot, it->x, it->y, it->z);
            }
            if (w == 0.0) return;
            auto hit = by_tail.find(tail);
            if (hit == by_tail.end()) return;
            const ChaosKey head(perm.begin(), perm.end() - r);
            for (const auto& [gh, gv] : hit->second) {
                ChaosKey joined = head;
                joined.insert(joined.end(), gh.begin(), gh.end());
                ordered[joined] += v * gv * w;
            }
        });
    return ChaosKernel::symmetrize(k + l - 2 * r, ordered);
}

cplx product_formula_rhs(const ChaosKernel& f, const ChaosKernel& g, const SlotAmplitudes& amps,
                         const ChaosEvaluator& ev) {
    cplx acc = 0.0;
    const int k = f.order(), l = g.order();
    for (int r = 0; r <= std::min(k, l); ++r)
        acc += factorial(r) * binomial(k, r) * binomial(l, r) * ev.integral(contract(f, g, r, amps));
    return acc;
}

ProductFormulaReport product_formula_check(const ChaosKernel& f, const ChaosKernel& g, const TimeGrid& grid, int band,
                                           double T, uint64_t seed, std::size_t samples) {
    const SlotAmplitudes amps(grid, band, T);
    const int k = f.order(), l = g.order();
    std::vector<std::pair<double, ChaosKernel>> terms;
    for (int r = 0; r <= std::min(k, l); ++r)
        terms.emplace_back(factorial(r) * binomial(k, r) * binomial(l, r), contract(f, g, r, amps));
    ProductFormulaReport rep;
    rep.k = k;
    rep.l = l;
    rep.samples = samples;
    double s1 = 0, s2 = 0, r1 = 0, r2 = 0, d1 = 0, d2 = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const BrownianDriver d = BrownianDriver::sample(grid, LatticeSpec(band), seed, s);
        const GaussianPath path(d, T);
        const ChaosEvaluator ev(path);
        const cplx lhs = ev.integral(f) * ev.integral(g);
        cplx rhs = 0.0;
        for (const auto& [c, h] : terms) rhs += c * ev.integral(h);
        const double dsq = std::norm(lhs - rhs);
        s1 += lhs.real();
        s2 += lhs.real() * lhs.real();
        r1 += rhs.real();
        r2 += rhs.real() * rhs.real();
        d1 += dsq;
        d2 += dsq * dsq;
        const double scale = std::max(std::abs(lhs), std::abs(rhs));
        if (scale > 0.0) rep.max_rel_discrepancy = std::max(rep.max_rel_discrepancy, std::sqrt(dsq) / scale);
    }
    const double n = double(samples);
    auto se = [n](double a, double b) { return n > 1 ? std::sqrt(std::max(0.0, (b / n - (a / n) * (a / n)) / (n - 1))) : 0.0; };
    rep.mean_lhs = s1 / n;
    rep.mean_rhs = r1 / n;
    rep.stderr_lhs = se(s1, s2);
    rep.stderr_rhs = se(r1, r2);
    rep.mean_sq_discrepancy = d1 / n;
    rep.stderr_sq_discrepancy = se(d1, d2);
    return rep;
}

double hypercontractivity_ratio(const std::vector<double>& samples, double p) {
    if (p < 2.0) throw std::invalid_argument("hypercontractivity_ratio: p must be >= 2");
    if (samples.size() < 10000) throw std::invalid_argument("hypercontractivity_ratio: need at least 1e4 samples");
    double m2 = 0.0, mp = 0.0;
    for (double x : samples) {
        m2 += x * x;
        mp += std::pow(std::abs(x), p);
    }
    m2 /= double(samples.size());
    mp /= double(samples.size());
    if (!(m2 > 0.0)) throw std::invalid_argument("hypercontractivity_ratio: zero-variance input");
    return std::pow(mp, 1.0 / p) / std::sqrt(m2);
}

}  // namespace hartree
