#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dip/errors.hpp"
#include "dip/model.hpp"
#include "dip/problem.hpp"
#include "dip/theory.hpp"

namespace dip {

struct FlowConfig {
    double step_size = 1.0;       // Euler step; continuous time t = step * step_size
    long max_steps = 25000;
    double loss_threshold = 1e-7;
    long record_every = 100;
    bool track_sigma_min = false;  // records sigma_min(J) at sampled steps (costly)

    void validate() const {
        if (!(step_size > 0.0)) throw ConfigError("flow.step_size: must be > 0");
        if (max_steps < 1) throw ConfigError("flow.max_steps: must be >= 1");
        if (!(loss_threshold > 0.0)) throw ConfigError("flow.loss_threshold: must be > 0");
        if (record_every < 1) throw ConfigError("flow.record_every: must be >= 1");
    }
};

enum class FlowOutcome { converged, step_cap, diverged };

inline std::string to_string(FlowOutcome o) {
    switch (o) {
        case FlowOutcome::converged: return "converged";
        case FlowOutcome::step_cap: return "step_cap";
        case FlowOutcome::diverged: return "diverged";
    }
    return "step_cap";
}

struct TrajectorySample {
    long step = 0;
    double time = 0.0;
    double loss = 0.0;
    double residual_y = 0.0;     // |y(t) - y|
    double residual_ybar = 0.0;  // |y(t) - y_bar|
    double param_drift = 0.0;    // |W(t) - W(0)|_F
    std::optional<double> sigma_min_J;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    FlowOutcome outcome = FlowOutcome::step_cap;
    long steps_taken = 0;
    double final_loss = 0.0;
};

/// L(W) = |A g(u, W) - y|^2 / (2 m).
inline double loss(const DipNetwork& net, const InverseProblem& prob) {
    if (net.n() != prob.n())
        throw ConfigError("loss: network output size does not match problem n");
    return (prob.A * forward(net) - prob.y).squaredNorm() / (2.0 * static_cast<double>(prob.m()));
}

/// Gradient of the loss in W, without materializing the Jacobian:
/// row i is phi'(W^i u) (V_i . A^T r) u^T / (m sqrt(k)) with r = A g - y.
inline Eigen::MatrixXd loss_gradient(const DipNetwork& net, const InverseProblem& prob) {
    if (net.n() != prob.n())
        throw ConfigError("loss_gradient: network output size does not match problem n");
    const double sk = std::sqrt(static_cast<double>(net.k()));
    const Eigen::VectorXd s = apply_fn(net.activation.d1, preactivation(net));
    const Eigen::VectorXd r = prob.A * forward(net) - prob.y;
    const Eigen::VectorXd scaled =
        s.cwiseProduct(net.V.transpose() * (prob.A.transpose() * r)) /
        (static_cast<double>(prob.m()) * sk);
    return scaled * net.u.transpose();
}

/// Explicit-Euler gradient descent on the loss, mutating net.W in place.
/// Stops on loss <= loss_threshold (converged), after max_steps (step_cap),
/// or on a non-finite loss (diverged; recorded, not thrown). Samples are
/// taken at step 0, every record_every steps, and at the final step.
inline Trajectory run_flow(DipNetwork& net, const InverseProblem& prob, const FlowConfig& cfg) {
    cfg.validate();
    if (net.n() != prob.n())
        throw ConfigError("run_flow: network output size does not match problem n");
    const Eigen::Index k = net.k(), m = prob.m();
    const double sk = std::sqrt(static_cast<double>(k));
    const double eta = cfg.step_size;
    const double u2 = net.u.squaredNorm();
    const Eigen::MatrixXd W0 = net.W;

    Trajectory traj;
    Eigen::VectorXd h = net.W * net.u;
    Eigen::VectorXd phi(k), slope(k), fwd(net.n()), r(m), gvec(k);

    auto record = [&](long step, double loss_val, const Eigen::VectorXd& resid) {
        TrajectorySample s;
        s.step = step;
        s.time = static_cast<double>(step) * eta;
        s.loss = loss_val;
        s.residual_y = resid.norm();
        s.residual_ybar = (resid + prob.eps).norm();
        s.param_drift = (net.W - W0).norm();
        if (cfg.track_sigma_min && std::isfinite(loss_val)) {
            for (Eigen::Index i = 0; i < k; ++i) slope(i) = net.activation.d1(h(i));
            const double lmin =
                detail::min_eigenvalue(detail::gram_from_slopes(net.V, slope, u2), "run_flow");
            s.sigma_min_J = std::sqrt(std::max(lmin, 0.0));
        }
        traj.samples.push_back(std::move(s));
    };

    for (long step = 0;; ++step) {
        const bool on_stride = step % cfg.record_every == 0;
        if (on_stride) h = net.W * net.u;  // refresh the incremental preactivation
        for (Eigen::Index i = 0; i < k; ++i) phi(i) = net.activation.value(h(i));
        fwd.noalias() = net.V * phi;
        fwd /= sk;
        r.noalias() = prob.A * fwd;
        r -= prob.y;
        const double loss_val = r.squaredNorm() / (2.0 * static_cast<double>(m));
        traj.steps_taken = step;
        traj.final_loss = loss_val;

        const bool diverged = !std::isfinite(loss_val);
        const bool converged = !diverged && loss_val <= cfg.loss_threshold;
        const bool capped = step >= cfg.max_steps;
        if (on_stride || diverged || converged || capped) record(step, loss_val, r);
        if (diverged) {
            traj.outcome = FlowOutcome::diverged;
            return traj;
        }
        if (converged) {
            traj.outcome = FlowOutcome::converged;
            return traj;
        }
        if (capped) {
            traj.outcome = FlowOutcome::step_cap;
            return traj;
        }

        for (Eigen::Index i = 0; i < k; ++i) slope(i) = net.activation.d1(h(i));
        gvec = slope.cwiseProduct(net.V.transpose() * (prob.A.transpose() * r)) /
               (static_cast<double>(m) * sk);
        net.W.noalias() -= eta * gvec * net.u.transpose();
        h.noalias() -= (eta * u2) * gvec;  // exact update of W u under a rank-one step
    }
}

/// Early-stopping horizon from the decay rate:
///   t* = 4 m log(init_residual / noise_norm) / (sigma_A^2 sigma_min_J0^2)
/// expressed as log(init_residual / noise_norm) / rate. Returns 0 when the
/// initial residual is already at or below the noise level, and nullopt
/// when noise_norm = 0 or the rate is degenerate (no finite horizon; run
/// to the loss threshold instead).
inline std::optional<double> early_stopping_time(const TheoryReport& report, double init_residual,
                                                 double noise_norm) {
    if (noise_norm < 0.0) throw ConfigError("early_stopping_time: noise_norm must be >= 0");
    if (init_residual < 0.0) throw ConfigError("early_stopping_time: init_residual must be >= 0");
    if (noise_norm == 0.0) return std::nullopt;
    if (init_residual <= noise_norm) return 0.0;
    if (!(report.rate > 0.0)) return std::nullopt;
    return std::log(init_residual / noise_norm) / report.rate;
}

}  // namespace dip
