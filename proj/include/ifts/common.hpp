#pragma once

// Shared vocabulary for the ifts library: matrix aliases, the error type,
// seeded random streams, type-7 quantiles and a deterministic parallel loop.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ifts {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr const char* kLibraryVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

enum class ErrorKind { usage, data, numerical };

/// Library-wide exception. The kind maps onto the CLI exit codes
/// (usage = 1, data = 2, numerical = 3).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
    }
    return 3;
}

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent child seed from (seed, stream). Pure function of
/// its inputs, so replicate b always sees the same stream regardless of
/// which thread evaluates it.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n) by rejection; exact and platform independent.
    Index index(Index n) {
        const auto range = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % range;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return static_cast<Index>(x % range);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal by the polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Quantiles

/// Type-7 quantile (linear interpolation between order statistics) of an
/// ascending-sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double prob) {
    require(!sorted.empty(), ErrorKind::data, "quantile of an empty sample");
    const double h = static_cast<double>(sorted.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> sample, double prob) {
    std::sort(sample.begin(), sample.end());
    return quantile_sorted(sample, prob);
}

/// Per-column type-7 quantiles of a replicate matrix (rows are replicates).
/// Returns one row per requested probability.
inline Matrix column_quantiles(const Matrix& replicates, std::span<const double> probs) {
    Matrix out(static_cast<Index>(probs.size()), replicates.cols());
    std::vector<double> column(static_cast<std::size_t>(replicates.rows()));
    for (Index j = 0; j < replicates.cols(); ++j) {
        for (Index b = 0; b < replicates.rows(); ++b) column[static_cast<std::size_t>(b)] = replicates(b, j);
        std::sort(column.begin(), column.end());
        for (std::size_t q = 0; q < probs.size(); ++q)
            out(static_cast<Index>(q), j) = quantile_sorted(column, probs[q]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parallel loop

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, count) across `threads` workers using a static
/// strided partition. Each index is evaluated exactly once; callers write
/// results into slot i so output never depends on scheduling.
inline void parallel_for(Index count, int threads, const std::function<void(Index)>& body) {
    const int workers = static_cast<int>(std::min<Index>(resolve_threads(threads), std::max<Index>(count, 1)));
    if (workers <= 1) {
        for (Index i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (Index i = w; i < count; i += workers) body(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace ifts
