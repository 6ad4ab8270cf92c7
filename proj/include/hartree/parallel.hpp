#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace hartree {

// Running mean and variance (Welford), mergeable.
struct Moments {
    double n = 0.0, mean = 0.0, m2 = 0.0;

    void add(double x) {
        n += 1.0;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    void merge(const Moments& o) {
        if (o.n == 0.0) return;
        if (n == 0.0) {
            *this = o;
            return;
        }
        const double tot = n + o.n, d = o.mean - mean;
        mean += d * o.n / tot;
        m2 += o.m2 + d * d * n * o.n / tot;
        n = tot;
    }
    double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
    double stderr_mean() const { return n > 0.0 ? std::sqrt(variance() / n) : 0.0; }
};

class TaskError : public std::runtime_error {
public:
    TaskError(std::size_t task, const std::string& what)
        : std::runtime_error("task " + std::to_string(task) + ": " + what), task_(task) {}
    std::size_t task() const { return task_; }

private:
    std::size_t task_;
};

// Evaluate map(i) for i in [0, n) on `workers` threads (tasks are handed out
// from a shared counter) and fold the results in index order, so the outcome
// does not depend on the worker count. An exception in a task aborts the run
// and is rethrown as TaskError carrying the task index.
template <class R, class Map, class Reduce>
R parallel_map_reduce(std::size_t n, int workers, Map&& map, R init, Reduce&& reduce) {
    using V = std::invoke_result_t<Map&, std::size_t>;
    std::vector<V> results(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mu;
    std::size_t err_task = 0;
    std::string err_what;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                results[i] = map(i);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!failed.exchange(true)) {
                    err_task = i;
                    err_what = e.what();
                }
            }
        }
    };
    const int w = std::max(1, workers);
    if (w == 1 || n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < w; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed) throw TaskError(err_task, err_what);
    R acc = std::move(init);
    for (auto& r : results) reduce(acc, r);
    return acc;
}

// Per-task sample vectors, concatenated in task order.
template <class Map>
std::vector<double> parallel_samples(std::size_t n, int workers, Map&& map) {
    return parallel_map_reduce(
        n, workers, [&](std::size_t i) { return double(map(i)); }, std::vector<double>{},
        [](std::vector<double>& acc, double v) { acc.push_back(v); });
}

}  // namespace hartree
