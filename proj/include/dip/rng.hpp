#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace dip {

// SplitMix64 finalizer. Used both to condition raw seeds before they reach
// the engine and to derive independent sub-stream seeds, so the scheme is
// reproducible across platforms.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives a sub-stream seed from a base seed and a list of stream tags
/// (e.g. cell index, trial index). Documented scheme:
///   h = splitmix64(base); for each tag t: h = splitmix64(h ^ splitmix64(t))
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t));
    return h;
}

/// Deterministic random source: std::mt19937_64 (output sequence fixed by
/// the standard) plus hand-rolled Box-Muller so normal draws do not depend
/// on the standard library's unspecified distribution algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0, 1).
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform01_open_low() {
        return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = uniform01_open_low();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    /// +1 or -1 with equal probability.
    double rademacher() { return (eng_() & 1ULL) ? 1.0 : -1.0; }

private:
    std::mt19937_64 eng_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

inline Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

// Entries drawn in row-major order regardless of storage.
inline Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace dip
