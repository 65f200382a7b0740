#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

namespace habsim {

/// Dense row-major (path, time) array.
class Grid2D {
public:
    Grid2D() = default;
    Grid2D(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t k) { return data_[i * cols_ + k]; }
    double operator()(std::size_t i, std::size_t k) const { return data_[i * cols_ + k]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const double> flat() const { return data_; }
    std::span<double> flat() { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Summation with a fixed pairwise reduction tree. The result does not
/// depend on how the producing loop was partitioned across threads.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanStdError {
    double mean;
    double std_error;
};

/// Sample mean and standard error of the mean, deterministic reduction.
inline MeanStdError mean_std_error(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = pairwise_sum(v) / n;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - mean;
        sq[i] = d * d;
    }
    if (v.size() < 2) return {mean, 0.0};
    const double var = pairwise_sum(sq) / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

/// Runs f(begin, end) over [0, n) split into contiguous chunks, one per worker.
/// Workers must write to disjoint state only; reductions happen afterwards.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& f) {
    unsigned int hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    std::size_t n_workers = threads > 0 ? static_cast<std::size_t>(threads) : hw;
    if (n_workers > n) n_workers = n == 0 ? 1 : n;
    if (n_workers <= 1) {
        f(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    const std::size_t chunk = (n + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&f, begin, end] { f(begin, end); });
    }
    for (auto& t : pool) t.join();
}

/// Trapezoid weight of grid node k on a uniform grid with n_points nodes.
inline double trapezoid_weight(std::size_t k, std::size_t n_points, double dt) {
    return (k == 0 || k + 1 == n_points) ? 0.5 * dt : dt;
}

}  // namespace habsim
