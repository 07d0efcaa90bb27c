#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "dip/errors.hpp"
#include "dip/rng.hpp"

namespace dip {

enum class OperatorKind { gaussian, identity, custom };

inline std::string to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::gaussian: return "gaussian";
        case OperatorKind::identity: return "identity";
        case OperatorKind::custom: return "custom";
    }
    return "gaussian";
}

inline OperatorKind operator_kind_from_name(const std::string& s) {
    if (s == "gaussian") return OperatorKind::gaussian;
    if (s == "identity") return OperatorKind::identity;
    if (s == "custom") return OperatorKind::custom;
    throw ConfigError("operator: unsupported kind '" + s + "'");
}

struct SpectralSummary {
    double sigma_A = 0.0;   // smallest nonzero singular value
    double kappa_A = 1.0;   // sigma_max / sigma_A
    double sigma_max = 0.0;
    Eigen::Index rank = 0;
};

/// Singular values below rel_tol * sigma_max with rel_tol = 1e-10 * max(m, n)
/// are treated as zero. Throws DegenerateOperatorError on the zero matrix.
inline SpectralSummary spectral_summary(const Eigen::MatrixXd& A) {
    if (A.size() == 0 || A.norm() == 0.0)
        throw DegenerateOperatorError("spectral_summary: operator has no nonzero singular value");
    // BDCSVD wants rows >= cols; singular values are transpose-invariant.
    const Eigen::MatrixXd tall = A.rows() >= A.cols() ? A : Eigen::MatrixXd(A.transpose());
    Eigen::BDCSVD<Eigen::MatrixXd> svd(tall);
    const Eigen::VectorXd& sv = svd.singularValues();
    SpectralSummary out;
    out.sigma_max = sv(0);
    const double tol = 1e-10 * static_cast<double>(std::max(A.rows(), A.cols())) * out.sigma_max;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) {
            out.sigma_A = sv(i);
            out.rank = i + 1;
        }
    }
    out.kappa_A = out.sigma_max / out.sigma_A;
    return out;
}

/// Linear inverse problem y = A x_bar + eps with y kept inside ran(A):
/// the noise direction is a standard normal vector projected onto ran(A).
struct InverseProblem {
    Eigen::MatrixXd A;      // m x n
    Eigen::VectorXd x_bar;  // n
    Eigen::VectorXd eps;    // m, lies in ran(A)
    Eigen::VectorXd y;      // m, = A x_bar + eps
    Eigen::VectorXd y_bar;  // m, = A x_bar
    double sigma_A = 0.0;
    double kappa_A = 1.0;
    double sigma_max = 0.0;
    Eigen::Index rank = 0;
    OperatorKind kind = OperatorKind::gaussian;
    double noise_level = 0.0;
    std::uint64_t seed = 0;

    Eigen::Index m() const { return A.rows(); }
    Eigen::Index n() const { return A.cols(); }
};

namespace detail {

// eps = noise_level * |y_bar| * unit vector in ran(A); rng supplies the
// pre-projection normal direction.
inline void finish_problem(InverseProblem& p, Rng& rng) {
    p.y_bar = p.A * p.x_bar;
    const SpectralSummary s = spectral_summary(p.A);
    p.sigma_A = s.sigma_A;
    p.kappa_A = s.kappa_A;
    p.sigma_max = s.sigma_max;
    p.rank = s.rank;
    if (p.noise_level > 0.0 && p.y_bar.norm() > 0.0) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(p.A, Eigen::ComputeThinU);
        const Eigen::MatrixXd range_basis = svd.matrixU().leftCols(p.rank);
        Eigen::VectorXd dir;
        double norm = 0.0;
        do {
            const Eigen::VectorXd g = normal_vector(rng, p.m());
            dir = range_basis * (range_basis.transpose() * g);
            norm = dir.norm();
        } while (norm == 0.0);
        p.eps = (p.noise_level * p.y_bar.norm() / norm) * dir;
    } else {
        p.eps = Eigen::VectorXd::Zero(p.m());
    }
    p.y = p.y_bar + p.eps;
}

}  // namespace detail

/// Random instance. gaussian: A and x_bar iid N(0,1); identity: A = I_{m x n}
/// with x_bar iid N(0,1). Draw order is A (row-major), x_bar, noise direction.
inline InverseProblem make_problem(Eigen::Index m, Eigen::Index n, double noise_level,
                                   std::uint64_t seed, OperatorKind kind = OperatorKind::gaussian) {
    if (m < 1) throw ConfigError("make_problem: m must be >= 1");
    if (n < 1) throw ConfigError("make_problem: n must be >= 1");
    if (noise_level < 0.0) throw ConfigError("make_problem: noise_level must be >= 0");
    if (kind == OperatorKind::custom)
        throw ConfigError("make_problem: custom operators go through make_custom_problem");
    InverseProblem p;
    p.kind = kind;
    p.noise_level = noise_level;
    p.seed = seed;
    Rng rng(seed);
    if (kind == OperatorKind::gaussian) {
        p.A = normal_matrix(rng, m, n);
    } else {
        p.A = Eigen::MatrixXd::Identity(m, n);
    }
    p.x_bar = normal_vector(rng, n);
    detail::finish_problem(p, rng);
    return p;
}

/// Instance around a user-supplied operator; x_bar is drawn iid N(0,1).
inline InverseProblem make_custom_problem(Eigen::MatrixXd A, double noise_level,
                                          std::uint64_t seed) {
    if (A.rows() < 1 || A.cols() < 1)
        throw ConfigError("make_custom_problem: matrix must be nonempty");
    if (noise_level < 0.0) throw ConfigError("make_custom_problem: noise_level must be >= 0");
    InverseProblem p;
    p.kind = OperatorKind::custom;
    p.noise_level = noise_level;
    p.seed = seed;
    p.A = std::move(A);
    Rng rng(seed);
    p.x_bar = normal_vector(rng, p.n());
    detail::finish_problem(p, rng);
    return p;
}

}  // namespace dip
