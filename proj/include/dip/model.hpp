#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "dip/activation.hpp"
#include "dip/errors.hpp"
#include "dip/rng.hpp"

namespace dip {

/// Distribution of the fixed second-layer entries. Both have iid columns
/// with identity covariance and bounded entries: rademacher gives D = 1,
/// uniform is uniform on [-sqrt(3), sqrt(3)] with D = sqrt(3).
enum class VDist { rademacher, uniform };

inline std::string to_string(VDist v) {
    return v == VDist::rademacher ? "rademacher" : "uniform";
}

inline VDist v_dist_from_name(const std::string& s) {
    if (s == "rademacher") return VDist::rademacher;
    if (s == "uniform") return VDist::uniform;
    throw ConfigError("v_dist: unsupported distribution '" + s + "'");
}

/// Two-layer generator g(u, W) = V phi(W u) / sqrt(k) with fixed input u
/// and fixed second layer V; only W trains.
struct DipNetwork {
    Eigen::VectorXd u;   // d, unit norm
    Eigen::MatrixXd W;   // k x d, trainable
    Eigen::MatrixXd V;   // n x k, fixed
    ActivationSpec activation;
    double D = 1.0;      // entrywise bound on V
    std::uint64_t seed = 0;
    VDist v_dist = VDist::rademacher;

    Eigen::Index k() const { return W.rows(); }
    Eigen::Index d() const { return W.cols(); }
    Eigen::Index n() const { return V.rows(); }
};

/// Fresh network: u uniform on the sphere, W iid N(0,1), V per v_dist.
/// Deterministic given seed; draw order is u, then W rows, then V rows.
inline DipNetwork init_network(Eigen::Index k, Eigen::Index d, Eigen::Index n,
                               ActivationSpec activation, std::uint64_t seed,
                               VDist v_dist = VDist::rademacher) {
    if (k < 1) throw ConfigError("init_network: k must be >= 1");
    if (d < 1) throw ConfigError("init_network: d must be >= 1");
    if (n < 1) throw ConfigError("init_network: n must be >= 1");
    DipNetwork net;
    net.activation = std::move(activation);
    net.seed = seed;
    net.v_dist = v_dist;
    Rng rng(seed);
    do {
        net.u = normal_vector(rng, d);
    } while (net.u.norm() == 0.0);
    net.u /= net.u.norm();
    net.W = normal_matrix(rng, k, d);
    net.V.resize(n, k);
    if (v_dist == VDist::rademacher) {
        net.D = 1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < k; ++j) net.V(i, j) = rng.rademacher();
    } else {
        net.D = std::sqrt(3.0);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < k; ++j)
                net.V(i, j) = (2.0 * rng.uniform01() - 1.0) * std::sqrt(3.0);
    }
    return net;
}

inline Eigen::VectorXd preactivation(const DipNetwork& net) { return net.W * net.u; }

inline Eigen::VectorXd apply_fn(const ScalarFn& f, const Eigen::VectorXd& x) {
    Eigen::VectorXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = f(x(i));
    return y;
}

/// g(u, W) = V phi(W u) / sqrt(k).
inline Eigen::VectorXd forward(const DipNetwork& net) {
    return net.V * apply_fn(net.activation.value, preactivation(net)) /
           std::sqrt(static_cast<double>(net.k()));
}

/// Full Jacobian of the forward map with respect to W, as an n x (k*d)
/// matrix. W is flattened row-major by neuron: column i*d + j holds the
/// derivative in W(i, j). Block i equals phi'(W^i u) V_i u^T / sqrt(k).
/// Intended for small nets; analysis at scale goes through jacobian_gram.
inline Eigen::MatrixXd jacobian(const DipNetwork& net) {
    const Eigen::Index k = net.k(), d = net.d(), n = net.n();
    const double sk = std::sqrt(static_cast<double>(k));
    const Eigen::VectorXd s = apply_fn(net.activation.d1, preactivation(net));
    Eigen::MatrixXd jac(n, k * d);
    for (Eigen::Index i = 0; i < k; ++i)
        jac.middleCols(i * d, d) = (s(i) / sk) * net.V.col(i) * net.u.transpose();
    return jac;
}

namespace detail {

// H = (u2 / k) sum_i s_i^2 V_i V_i^T, computed as scaled V diag(s^2) V^T.
inline Eigen::MatrixXd gram_from_slopes(const Eigen::MatrixXd& V, const Eigen::VectorXd& s,
                                        double u_squared_norm) {
    const double scale = u_squared_norm / static_cast<double>(V.cols());
    Eigen::MatrixXd scaled = V.array().rowwise() * s.array().square().transpose();
    return scale * (scaled * V.transpose());
}

inline double min_eigenvalue(const Eigen::MatrixXd& sym, const char* who) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError(std::string(who) + ": eigensolver failed on a " +
                             std::to_string(sym.rows()) + "x" + std::to_string(sym.cols()) +
                             " Gram matrix");
    return es.eigenvalues()(0);
}

inline double max_eigenvalue(const Eigen::MatrixXd& sym, const char* who) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError(std::string(who) + ": eigensolver failed on a " +
                             std::to_string(sym.rows()) + "x" + std::to_string(sym.cols()) +
                             " Gram matrix");
    return es.eigenvalues()(sym.rows() - 1);
}

}  // namespace detail

/// Jacobian Gram matrix H = J J^T = (|u|^2 / k) sum_i phi'(W^i u)^2 V_i V_i^T.
inline Eigen::MatrixXd jacobian_gram(const DipNetwork& net) {
    const Eigen::VectorXd s = apply_fn(net.activation.d1, preactivation(net));
    return detail::gram_from_slopes(net.V, s, net.u.squaredNorm());
}

/// sigma_min(J) = sqrt(lambda_min(H)), through the n x n Gram eigenproblem
/// so J itself is never materialized.
inline double sigma_min_jacobian(const DipNetwork& net) {
    const double lmin = detail::min_eigenvalue(jacobian_gram(net), "sigma_min_jacobian");
    return std::sqrt(std::max(lmin, 0.0));
}

/// Spectral norm of J(W) - J(W_other) for the same (u, V), via the n x n
/// Gram of the difference: the blocks are colinear rank-one matrices, so
/// (dJ)(dJ)^T = (|u|^2 / k) sum_i (ds_i)^2 V_i V_i^T.
inline double jacobian_diff_opnorm(const DipNetwork& net, const Eigen::MatrixXd& W_other) {
    if (W_other.rows() != net.k() || W_other.cols() != net.d())
        throw ConfigError("jacobian_diff_opnorm: W_other has mismatched dimensions");
    const Eigen::VectorXd s1 = apply_fn(net.activation.d1, preactivation(net));
    const Eigen::VectorXd s2 = apply_fn(net.activation.d1, W_other * net.u);
    const Eigen::MatrixXd gram =
        detail::gram_from_slopes(net.V, s1 - s2, net.u.squaredNorm());
    return std::sqrt(std::max(detail::max_eigenvalue(gram, "jacobian_diff_opnorm"), 0.0));
}

}  // namespace dip
