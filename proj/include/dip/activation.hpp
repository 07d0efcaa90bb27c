#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "dip/errors.hpp"

namespace dip {

using ScalarFn = std::function<double(double)>;

/// A smooth activation together with the constants the convergence theory
/// needs: B bounds |phi'| and |phi''| uniformly, C_phi = sqrt(E[phi(g)^2])
/// and C_phi_prime = sqrt(E[phi'(g)^2]) for g ~ N(0,1).
struct ActivationSpec {
    std::string name;
    ScalarFn value;
    ScalarFn d1;
    ScalarFn d2;
    double B = 0.0;
    double C_phi = 0.0;
    double C_phi_prime = 0.0;
};

namespace detail {

// Nodes/weights of N-point Gauss-Hermite quadrature (weight exp(-x^2)),
// via Golub-Welsch on the Jacobi matrix of the Hermite recurrence.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = std::sqrt(i / 2.0);
        jac(i, i - 1) = b;
        jac(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    if (es.info() != Eigen::Success)
        throw NumericalError("gauss_hermite: eigensolver failed for n = " + std::to_string(n));
    Eigen::VectorXd nodes = es.eigenvalues();
    Eigen::VectorXd weights(n);
    const double mu0 = std::sqrt(M_PI);  // integral of exp(-x^2)
    for (int i = 0; i < n; ++i) {
        const double v = es.eigenvectors()(0, i);
        weights(i) = mu0 * v * v;
    }
    return {std::move(nodes), std::move(weights)};
}

inline double gh_second_moment(const ScalarFn& f, int n) {
    auto [x, w] = gauss_hermite(n);
    double acc = 0.0;
    const double s = std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
        const double fx = f(s * x(i));
        if (!std::isfinite(fx))
            throw EvaluationError("gaussian_moment: non-finite value at quadrature node x = " +
                                  std::to_string(s * x(i)));
        acc += w(i) * fx * fx;
    }
    return acc / std::sqrt(M_PI);  // E[f(g)^2], g ~ N(0,1)
}

}  // namespace detail

/// sqrt(E[f(g)^2]) for g ~ N(0,1) by Gauss-Hermite quadrature. The node
/// count is doubled until the result moves by less than 1e-10.
inline double gaussian_moment(const ScalarFn& f, int nodes = 200) {
    if (nodes < 2) throw ConfigError("gaussian_moment: nodes must be >= 2");
    double prev = std::sqrt(detail::gh_second_moment(f, nodes));
    for (int n = 2 * nodes; n <= 16 * nodes; n *= 2) {
        const double cur = std::sqrt(detail::gh_second_moment(f, n));
        if (std::abs(cur - prev) < 1e-10) return cur;
        prev = cur;
    }
    throw NumericalError("gaussian_moment: quadrature did not converge; "
                         "integrand may grow faster than polynomially");
}

namespace detail {

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double sigmoid_d1(double x) {
    const double s = stable_sigmoid(x);
    return s * (1.0 - s);
}

inline double softplus(double x) {
    return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

}  // namespace detail

/// Uniform bound on |phi'| and |phi''| for a supported activation name.
/// Analytic values: sigmoid sup|phi'| = 1/4 at 0 dominates sup|phi''|;
/// tanh sup|phi'| = 1 dominates sup|phi''| ~ 0.770; softplus phi' = sigmoid.
inline double derivative_bound(const std::string& name) {
    if (name == "sigmoid") return 0.25;
    if (name == "tanh") return 1.0;
    if (name == "softplus") return 1.0;
    if (name == "linear") return 1.0;
    throw ConfigError("derivative_bound: unsupported activation '" + name + "'");
}

inline double derivative_bound(const ActivationSpec& spec) { return derivative_bound(spec.name); }

inline const std::vector<std::string>& supported_activations() {
    static const std::vector<std::string> names{"sigmoid", "tanh", "softplus", "linear"};
    return names;
}

/// Builds a supported activation by name. Moment constants come from
/// quadrature except for linear, where they are exact.
inline ActivationSpec make_activation(const std::string& name, int quad_nodes = 200) {
    ActivationSpec spec;
    spec.name = name;
    if (name == "sigmoid") {
        spec.value = detail::stable_sigmoid;
        spec.d1 = detail::sigmoid_d1;
        spec.d2 = [](double x) {
            const double s = detail::stable_sigmoid(x);
            return s * (1.0 - s) * (1.0 - 2.0 * s);
        };
    } else if (name == "tanh") {
        spec.value = [](double x) { return std::tanh(x); };
        spec.d1 = [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        };
        spec.d2 = [](double x) {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
        };
    } else if (name == "softplus") {
        spec.value = detail::softplus;
        spec.d1 = detail::stable_sigmoid;
        spec.d2 = detail::sigmoid_d1;
    } else if (name == "linear") {
        spec.value = [](double x) { return x; };
        spec.d1 = [](double) { return 1.0; };
        spec.d2 = [](double) { return 0.0; };
    } else {
        throw ConfigError("make_activation: unsupported activation '" + name + "'");
    }
    spec.B = derivative_bound(name);
    if (name == "linear") {
        spec.C_phi = 1.0;
        spec.C_phi_prime = 1.0;
    } else {
        spec.C_phi = gaussian_moment(spec.value, quad_nodes);
        spec.C_phi_prime = gaussian_moment(spec.d1, quad_nodes);
    }
    return spec;
}

}  // namespace dip
