#include "pllab/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pllab {

double Rng::normal() {
    // Box-Muller. Guard against log(0); next_double() < 1 by construction.
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_below: n must be >= 1");
    const std::uint64_t threshold = (~n + 1) % n;  // (2^64 - n) mod n
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    if (k < 0 || n < 0 || k > n)
        throw std::invalid_argument("sample_without_replacement: need 0 <= k <= n");
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(next_below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        out.push_back(pool[static_cast<std::size_t>(i)]);
    }
    return out;
}

DenseMatrix::DenseMatrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("DenseMatrix: negative dimension");
}

Vec DenseMatrix::matvec(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != cols_)
        throw std::invalid_argument("DenseMatrix::matvec: dimension mismatch");
    Vec y(static_cast<std::size_t>(rows_), 0.0);
    for (int r = 0; r < rows_; ++r) {
        const double* a = data_.data() + static_cast<std::size_t>(r) * cols_;
        double s = 0.0;
        for (int c = 0; c < cols_; ++c) s += a[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = s;
    }
    return y;
}

Vec DenseMatrix::tmatvec(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != rows_)
        throw std::invalid_argument("DenseMatrix::tmatvec: dimension mismatch");
    Vec y(static_cast<std::size_t>(cols_), 0.0);
    for (int r = 0; r < rows_; ++r) {
        const double* a = data_.data() + static_cast<std::size_t>(r) * cols_;
        const double xr = x[static_cast<std::size_t>(r)];
        for (int c = 0; c < cols_; ++c) y[static_cast<std::size_t>(c)] += a[c] * xr;
    }
    return y;
}

void DenseMatrix::add_outer(std::span<const double> u, std::span<const double> v, double scale) {
    if (static_cast<int>(u.size()) != rows_ || static_cast<int>(v.size()) != cols_)
        throw std::invalid_argument("DenseMatrix::add_outer: dimension mismatch");
    for (int r = 0; r < rows_; ++r) {
        double* a = data_.data() + static_cast<std::size_t>(r) * cols_;
        const double ur = scale * u[static_cast<std::size_t>(r)];
        for (int c = 0; c < cols_; ++c) a[c] += ur * v[static_cast<std::size_t>(c)];
    }
}

bool DenseMatrix::all_finite() const { return pllab::all_finite(data_); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double logsumexp(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("logsumexp: empty input");
    if (!all_finite(z)) throw std::invalid_argument("logsumexp: non-finite input");
    const double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double zi : z) s += std::exp(zi - zmax);
    return zmax + std::log(s);
}

Vec softmax(std::span<const double> z) {
    if (z.size() < 2) throw std::invalid_argument("softmax: need at least 2 logits");
    if (!all_finite(z)) throw std::invalid_argument("softmax: non-finite input");
    const double lse = logsumexp(z);
    Vec p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - lse);
    return p;
}

DenseMatrix glorot_init(int fan_in, int fan_out, Rng& rng) {
    if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("glorot_init: fans must be >= 1");
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    DenseMatrix w(fan_out, fan_in);
    for (double& e : w.data()) e = rng.uniform(-limit, limit);
    return w;
}

}  // namespace pllab
