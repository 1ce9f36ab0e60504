#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pllab {

using Vec = std::vector<double>;

/// Deterministic 64-bit generator (SplitMix64). The state advances by a fixed
/// odd constant and the output is a bijective mix of the state, so equal seeds
/// produce bit-identical integer streams on every platform. Float draws are
/// derived from the integer stream by fixed arithmetic and are reproducible
/// under IEEE-754 doubles.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        std::uint64_t x = (state_ += 0x9e3779b97f4a7c15ULL);
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Uniform in [0, 1), 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Standard normal via Box-Muller; two uniform draws per call.
    double normal();

    /// Uniform integer in [0, n). Unbiased (rejection below the wrap-around
    /// threshold), n must be >= 1.
    std::uint64_t next_below(std::uint64_t n);

    /// Fisher-Yates shuffle driven by this generator.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices drawn from [0, n) without replacement (partial
    /// Fisher-Yates); order of the result is the draw order.
    std::vector<int> sample_without_replacement(int n, int k);

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

/// Dense row-major matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(int rows, int cols, double fill = 0.0);

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<const double> row(int r) const { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }

    Vec& data() { return data_; }
    const Vec& data() const { return data_; }

    /// y = A x
    Vec matvec(std::span<const double> x) const;
    /// y = A^T x
    Vec tmatvec(std::span<const double> x) const;
    /// A += scale * u v^T
    void add_outer(std::span<const double> u, std::span<const double> v, double scale = 1.0);

    bool all_finite() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    Vec data_;
};

/// log(sum_i exp(z_i)) computed with a max shift; safe for |z_i| up to ~1e308.
double logsumexp(std::span<const double> z);

/// Numerically stable softmax; output is strictly positive and sums to 1.
/// Throws std::invalid_argument on empty or non-finite input.
Vec softmax(std::span<const double> z);

/// Glorot/Xavier uniform initialization: entries i.i.d. uniform on [-L, L]
/// with L = sqrt(6 / (fan_in + fan_out)). Result has shape fan_out x fan_in
/// (maps fan_in-vectors to fan_out-vectors by matvec).
DenseMatrix glorot_init(int fan_in, int fan_out, Rng& rng);

bool all_finite(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace pllab
