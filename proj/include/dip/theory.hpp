#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dip/errors.hpp"
#include "dip/model.hpp"
#include "dip/problem.hpp"
#include "dip/rng.hpp"
#include "dip/thread_pool.hpp"

namespace dip {

/// Every quantity entering the convergence condition and the decay rate,
/// evaluated at initialization.
struct TheoryReport {
    double sigma_A = 0.0;
    double kappa_A = 1.0;
    double sigma_min_J0 = 0.0;       // sigma_min(J) at the initial weights
    double lip_J_bound = 0.0;        // analytic bound B D sqrt(n/k)
    double init_residual = 0.0;      // |y - A g(u, W0)|
    double R = 0.0;                  // sigma_min_J0 / (2 lip)
    double R_prime = 0.0;            // 2 init_residual / (sigma_A sigma_min_J0)
    bool condition_eq5 = false;      // init_residual / sigma_A < sigma_min_J0^2 / (4 lip)
    double rate = 0.0;               // sigma_A^2 sigma_min_J0^2 / (4 m)
    long long chernoff_k = 1;        // width certifying sigma_min_J0 >= C_phi_prime / 2

    // provenance for serialized reports
    Eigen::Index m = 0, n = 0, k = 0, d = 0;
    std::string activation;
    double D = 1.0;
    double chernoff_target = 0.5;
    std::string note;  // nonempty when the report is degenerate
};

/// Analytic Jacobian Lipschitz bound B D sqrt(n/k).
inline double lip_jacobian_bound(const DipNetwork& net) {
    return net.activation.B * net.D *
           std::sqrt(static_cast<double>(net.n()) / static_cast<double>(net.k()));
}

/// Smallest width k making the matrix-Chernoff tail
/// n exp(-k C_phi_prime^2 / (8 B^2 D^2 n)) fall below target_failure, i.e.
/// k = ceil(8 B^2 D^2 n log(n / target_failure) / C_phi_prime^2).
inline long long chernoff_required_k(Eigen::Index n, const ActivationSpec& act, double D,
                                     double target_failure) {
    if (n < 1) throw ConfigError("chernoff_required_k: n must be >= 1");
    if (!(target_failure > 0.0 && target_failure < 1.0))
        throw ConfigError("chernoff_required_k: target_failure must lie in (0, 1)");
    const double b2d2 = act.B * act.B * D * D;
    const double c2 = act.C_phi_prime * act.C_phi_prime;
    const double raw =
        8.0 * b2d2 * static_cast<double>(n) * std::log(static_cast<double>(n) / target_failure) / c2;
    return std::max<long long>(1, static_cast<long long>(std::ceil(raw)));
}

/// Width scaling k = ceil(C1 kappa^2 n (sqrt(n)(sqrt(log d) + 1) + sqrt(m))^2).
/// C1 is a calibration constant; the default in the CLI comes from the
/// phase-grid boundary fit.
inline long long theorem2_width(Eigen::Index n, Eigen::Index m, Eigen::Index d, double kappa_A,
                                double C1) {
    if (n < 1 || m < 1 || d < 1) throw ConfigError("theorem2_width: dimensions must be >= 1");
    if (kappa_A < 1.0) throw ConfigError("theorem2_width: kappa_A must be >= 1");
    if (C1 <= 0.0) throw ConfigError("theorem2_width: C1 must be > 0");
    const double sn = std::sqrt(static_cast<double>(n));
    const double sm = std::sqrt(static_cast<double>(m));
    const double ld = std::sqrt(std::log(static_cast<double>(d)));
    const double inner = sn * (ld + 1.0) + sm;
    return static_cast<long long>(
        std::ceil(C1 * kappa_A * kappa_A * static_cast<double>(n) * inner * inner));
}

namespace detail {

// Core arithmetic shared by build_report and the unit tests that exercise
// the formulas on hand-picked values.
inline TheoryReport assemble_report(double sigma_A, double kappa_A, double sigma_min_J0,
                                    double lip, double init_residual, Eigen::Index m) {
    TheoryReport r;
    r.sigma_A = sigma_A;
    r.kappa_A = kappa_A;
    r.sigma_min_J0 = sigma_min_J0;
    r.lip_J_bound = lip;
    r.init_residual = init_residual;
    r.m = m;
    r.R = sigma_min_J0 / (2.0 * lip);
    if (sigma_min_J0 > 0.0) {
        r.R_prime = 2.0 * init_residual / (sigma_A * sigma_min_J0);
    } else {
        r.R_prime = init_residual == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.note = "degenerate: sigma_min(J0) = 0, condition_eq5 forced false";
    }
    r.condition_eq5 =
        init_residual / sigma_A < sigma_min_J0 * sigma_min_J0 / (4.0 * lip);
    r.rate = sigma_A * sigma_A * sigma_min_J0 * sigma_min_J0 / (4.0 * static_cast<double>(m));
    return r;
}

}  // namespace detail

/// Evaluates the convergence condition and all associated radii and rates
/// for a freshly initialized network on a given problem.
inline TheoryReport build_report(const DipNetwork& net, const InverseProblem& prob) {
    const double smin = sigma_min_jacobian(net);
    const double lip = lip_jacobian_bound(net);
    const double init_residual = (prob.A * forward(net) - prob.y).norm();
    TheoryReport r = detail::assemble_report(prob.sigma_A, prob.kappa_A, smin, lip,
                                             init_residual, prob.m());
    r.n = net.n();
    r.k = net.k();
    r.d = net.d();
    r.activation = net.activation.name;
    r.D = net.D;
    r.chernoff_target = net.n() >= 2 ? 1.0 / static_cast<double>(net.n()) : 0.5;
    r.chernoff_k = chernoff_required_k(net.n(), net.activation, net.D, r.chernoff_target);
    return r;
}

struct SigmaMinProbe {
    int trials = 0;
    double threshold = 0.0;   // C_phi_prime / 2
    double fraction = 0.0;    // share of trials with sigma_min >= threshold
    double min = 0.0, median = 0.0, max = 0.0;
    std::vector<double> values;
};

/// Draws fresh networks and summarizes the distribution of sigma_min(J0)
/// against the Chernoff threshold C_phi_prime / 2.
inline SigmaMinProbe probe_sigma_min_concentration(Eigen::Index k, Eigen::Index d, Eigen::Index n,
                                                   const ActivationSpec& act, int trials,
                                                   std::uint64_t seed,
                                                   VDist v_dist = VDist::rademacher,
                                                   ThreadPool* pool = nullptr) {
    if (trials < 1) throw ConfigError("probe_sigma_min_concentration: trials must be >= 1");
    SigmaMinProbe probe;
    probe.trials = trials;
    probe.threshold = act.C_phi_prime / 2.0;
    probe.values.assign(trials, 0.0);
    auto body = [&](long i) {
        const DipNetwork net =
            init_network(k, d, n, act, derive_seed(seed, {static_cast<std::uint64_t>(i)}), v_dist);
        probe.values[i] = sigma_min_jacobian(net);
    };
    if (pool)
        pool->parallel_index(trials, body);
    else
        for (int i = 0; i < trials; ++i) body(i);
    std::vector<double> sorted = probe.values;
    std::sort(sorted.begin(), sorted.end());
    probe.min = sorted.front();
    probe.max = sorted.back();
    probe.median = sorted[sorted.size() / 2];
    int hits = 0;
    for (double v : probe.values) hits += v >= probe.threshold;
    probe.fraction = static_cast<double>(hits) / trials;
    return probe;
}

struct InitErrorProbe {
    int trials = 0;
    double fraction_within = 0.0;  // share of trials with residual <= bound
    std::vector<double> observed;  // |y(0) - y| per trial
    std::vector<double> bounds;    // per-trial bound
    // x0 in the bound is interpreted as the ground truth x_bar.
    std::string note = "x0 interpreted as ground truth x_bar";
};

/// Checks the initial-error bound
///   |y(0) - y| <= |A| (C sqrt(n log d) + sqrt(n) |x_bar|_inf + sqrt(m) |eps|_inf)
/// with C = C_phi + sqrt(2) B D, per-trial with that trial's A, x_bar, eps.
inline InitErrorProbe probe_init_error(Eigen::Index k, Eigen::Index d, Eigen::Index n,
                                       Eigen::Index m, const ActivationSpec& act,
                                       const std::function<InverseProblem(std::uint64_t)>& make_prob,
                                       int trials, std::uint64_t seed,
                                       VDist v_dist = VDist::rademacher,
                                       ThreadPool* pool = nullptr) {
    if (trials < 1) throw ConfigError("probe_init_error: trials must be >= 1");
    InitErrorProbe probe;
    probe.trials = trials;
    probe.observed.assign(trials, 0.0);
    probe.bounds.assign(trials, 0.0);
    auto body = [&](long i) {
        const std::uint64_t tseed = derive_seed(seed, {static_cast<std::uint64_t>(i)});
        const InverseProblem prob = make_prob(derive_seed(tseed, {1}));
        if (prob.n() != n || prob.m() != m)
            throw ConfigError("probe_init_error: generator produced a problem of size " +
                              std::to_string(prob.m()) + "x" + std::to_string(prob.n()) +
                              ", expected " + std::to_string(m) + "x" + std::to_string(n));
        const DipNetwork net = init_network(k, d, n, act, derive_seed(tseed, {2}), v_dist);
        const double Cnet = act.C_phi + std::sqrt(2.0) * act.B * net.D;
        probe.observed[i] = (prob.A * forward(net) - prob.y).norm();
        probe.bounds[i] =
            prob.sigma_max *
            (Cnet * std::sqrt(static_cast<double>(n) * std::log(static_cast<double>(d))) +
             std::sqrt(static_cast<double>(n)) * prob.x_bar.lpNorm<Eigen::Infinity>() +
             std::sqrt(static_cast<double>(m)) * prob.eps.lpNorm<Eigen::Infinity>());
    };
    if (pool)
        pool->parallel_index(trials, body);
    else
        for (int i = 0; i < trials; ++i) body(i);
    int hits = 0;
    for (int i = 0; i < trials; ++i) hits += probe.observed[i] <= probe.bounds[i];
    probe.fraction_within = static_cast<double>(hits) / trials;
    return probe;
}

struct LipschitzProbe {
    int pairs = 0;
    double bound = 0.0;      // B D sqrt(n/k)
    double max_ratio = 0.0;  // max |J(W) - J(W~)| / |W - W~|_F over sampled pairs
};

/// Samples random weight pairs and compares the empirical Jacobian
/// Lipschitz ratio against the analytic bound.
inline LipschitzProbe probe_jacobian_lipschitz(Eigen::Index k, Eigen::Index d, Eigen::Index n,
                                               const ActivationSpec& act, int pairs,
                                               std::uint64_t seed,
                                               VDist v_dist = VDist::rademacher,
                                               ThreadPool* pool = nullptr) {
    if (pairs < 1) throw ConfigError("probe_jacobian_lipschitz: pairs must be >= 1");
    LipschitzProbe probe;
    probe.pairs = pairs;
    std::vector<double> ratios(pairs, 0.0);
    auto body = [&](long i) {
        const std::uint64_t pseed = derive_seed(seed, {static_cast<std::uint64_t>(i)});
        DipNetwork net = init_network(k, d, n, act, derive_seed(pseed, {1}), v_dist);
        Rng rng(derive_seed(pseed, {2}));
        const Eigen::MatrixXd W_other = normal_matrix(rng, k, d);
        const double dist = (net.W - W_other).norm();
        if (dist > 0.0) ratios[i] = jacobian_diff_opnorm(net, W_other) / dist;
    };
    if (pool)
        pool->parallel_index(pairs, body);
    else
        for (int i = 0; i < pairs; ++i) body(i);
    probe.bound = act.B * (v_dist == VDist::rademacher ? 1.0 : std::sqrt(3.0)) *
                  std::sqrt(static_cast<double>(n) / static_cast<double>(k));
    probe.max_ratio = *std::max_element(ratios.begin(), ratios.end());
    return probe;
}

}  // namespace dip
