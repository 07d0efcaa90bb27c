#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dip/errors.hpp"
#include "dip/flow.hpp"
#include "dip/model.hpp"
#include "dip/problem.hpp"
#include "dip/theory.hpp"
#include "dip/thread_pool.hpp"

namespace dip {

struct AxisSpec {
    std::string name;           // one of k, n, m, d
    std::vector<long> values;
};

/// A two-axis multi-trial experiment: axis1 x axis2 cells, each running
/// trials_per_cell independent (problem, network, flow) triples.
struct GridSpec {
    AxisSpec axis1;
    AxisSpec axis2;
    std::map<std::string, long> fixed_dims;  // the two dimensions not on an axis
    std::string activation = "sigmoid";
    VDist v_dist = VDist::rademacher;
    OperatorKind operator_kind = OperatorKind::gaussian;
    double noise_level = 0.0;
    int trials_per_cell = 10;
    FlowConfig flow;
    std::uint64_t master_seed = 0;
    long long budget = 200000;  // max cells * trials accepted without refusal

    long cells() const {
        return static_cast<long>(axis1.values.size() * axis2.values.size());
    }

    void validate() const {
        static const std::set<std::string> dims{"k", "n", "m", "d"};
        if (!dims.count(axis1.name)) throw ConfigError("grid.axis1.name: must be one of k, n, m, d");
        if (!dims.count(axis2.name)) throw ConfigError("grid.axis2.name: must be one of k, n, m, d");
        if (axis1.name == axis2.name) throw ConfigError("grid.axis2.name: axes must differ");
        if (axis1.values.empty()) throw ConfigError("grid.axis1.values: must be nonempty");
        if (axis2.values.empty()) throw ConfigError("grid.axis2.values: must be nonempty");
        std::set<std::string> seen{axis1.name, axis2.name};
        for (const auto& [key, value] : fixed_dims) {
            if (!dims.count(key)) throw ConfigError("grid.fixed." + key + ": unknown dimension");
            if (seen.count(key)) throw ConfigError("grid.fixed." + key + ": already set by an axis");
            if (value < 1) throw ConfigError("grid.fixed." + key + ": must be >= 1");
            seen.insert(key);
        }
        if (seen.size() != 4)
            throw ConfigError("grid: axes plus fixed must cover k, n, m, d exactly");
        for (long v : axis1.values)
            if (v < 1) throw ConfigError("grid.axis1.values: must be >= 1");
        for (long v : axis2.values)
            if (v < 1) throw ConfigError("grid.axis2.values: must be >= 1");
        if (trials_per_cell < 1) throw ConfigError("grid.trials_per_cell: must be >= 1");
        if (noise_level < 0.0) throw ConfigError("grid.noise_level: must be >= 0");
        flow.validate();
    }

    /// Dimensions for the cell at (i1, i2).
    std::map<std::string, long> cell_dims(long i1, long i2) const {
        std::map<std::string, long> out = fixed_dims;
        out[axis1.name] = axis1.values[i1];
        out[axis2.name] = axis2.values[i2];
        return out;
    }
};

struct CellStats {
    long success_count = 0;
    long trials = 0;
    // mean over converged trials; NaN when none converged
    double mean_steps_to_converge = std::numeric_limits<double>::quiet_NaN();
    double mean_final_loss = 0.0;

    double success_freq() const {
        return trials == 0 ? 0.0 : static_cast<double>(success_count) / trials;
    }
};

struct GridResult {
    GridSpec spec;
    std::vector<CellStats> cells;                  // row-major: index = i1 * axis2.size + i2
    std::vector<std::vector<std::uint64_t>> cell_seeds;  // per-cell trial seeds (provenance)
    std::vector<char> cell_done;

    long cell_index(long i1, long i2) const {
        return i1 * static_cast<long>(spec.axis2.values.size()) + i2;
    }
    bool complete() const {
        for (char c : cell_done)
            if (!c) return false;
        return !cell_done.empty();
    }
};

/// Seed for trial t of cell c under a master seed. The derivation chain is
/// fixed so grids are reproducible regardless of scheduling:
///   trial   = derive_seed(master, {1, c, t})
///   problem = derive_seed(trial, {2}),  network = derive_seed(trial, {3})
inline std::uint64_t grid_trial_seed(std::uint64_t master_seed, long cell, int trial) {
    return derive_seed(master_seed,
                       {1, static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(trial)});
}

struct GridRunOptions {
    const GridResult* resume_from = nullptr;
    std::function<void(long cell, const CellStats&)> progress;  // called as cells finish
    std::atomic<bool>* cancel = nullptr;  // checked between trials; leaves a partial result
};

namespace detail {

struct TrialRecord {
    bool converged = false;
    long steps = 0;
    double final_loss = 0.0;
    bool done = false;
};

}  // namespace detail

/// Runs the grid. Cells and trials execute in parallel; per-trial seeds are
/// derived from the master seed, so the result is independent of both the
/// pool width and scheduling order. Refuses to start when cells * trials
/// exceeds the budget.
inline GridResult run_grid(const GridSpec& spec, const ThreadPool& pool,
                           const GridRunOptions& options = {}) {
    spec.validate();
    const long cells = spec.cells();
    const long long work =
        static_cast<long long>(cells) * static_cast<long long>(spec.trials_per_cell);
    if (spec.budget > 0 && work > spec.budget)
        throw BudgetError("run_grid: estimated work " + std::to_string(work) +
                              " trial-runs (" + std::to_string(cells) + " cells x " +
                              std::to_string(spec.trials_per_cell) +
                              " trials) exceeds budget " + std::to_string(spec.budget),
                          work, spec.budget);

    GridResult result;
    result.spec = spec;
    result.cells.assign(cells, CellStats{});
    result.cell_seeds.assign(cells, {});
    result.cell_done.assign(cells, 0);
    for (long c = 0; c < cells; ++c) {
        result.cell_seeds[c].resize(spec.trials_per_cell);
        for (int t = 0; t < spec.trials_per_cell; ++t)
            result.cell_seeds[c][t] = grid_trial_seed(spec.master_seed, c, t);
    }

    // Tasks for cells not already present in the resume source.
    std::vector<long> pending;
    for (long c = 0; c < cells; ++c) {
        if (options.resume_from && c < static_cast<long>(options.resume_from->cell_done.size()) &&
            options.resume_from->cell_done[c]) {
            result.cells[c] = options.resume_from->cells[c];
            result.cell_done[c] = 1;
        } else {
            pending.push_back(c);
        }
    }

    const int tpc = spec.trials_per_cell;
    std::vector<detail::TrialRecord> records(pending.size() * tpc);
    const ActivationSpec act = make_activation(spec.activation);

    pool.parallel_index(static_cast<long>(records.size()), [&](long idx) {
        if (options.cancel && options.cancel->load(std::memory_order_relaxed)) return;
        const long cell = pending[idx / tpc];
        const int trial = static_cast<int>(idx % tpc);
        const auto dims = spec.cell_dims(cell / static_cast<long>(spec.axis2.values.size()),
                                         cell % static_cast<long>(spec.axis2.values.size()));
        const std::uint64_t tseed = grid_trial_seed(spec.master_seed, cell, trial);
        const InverseProblem prob =
            make_problem(dims.at("m"), dims.at("n"), spec.noise_level, derive_seed(tseed, {2}),
                         spec.operator_kind);
        DipNetwork net = init_network(dims.at("k"), dims.at("d"), dims.at("n"), act,
                                      derive_seed(tseed, {3}), spec.v_dist);
        const Trajectory traj = run_flow(net, prob, spec.flow);
        detail::TrialRecord& rec = records[idx];
        rec.converged = traj.outcome == FlowOutcome::converged;
        rec.steps = traj.steps_taken;
        rec.final_loss = traj.final_loss;
        rec.done = true;
    });

    // Fold per-cell stats in fixed trial order.
    for (std::size_t p = 0; p < pending.size(); ++p) {
        const long c = pending[p];
        bool all_done = true;
        CellStats stats;
        stats.trials = tpc;
        double loss_sum = 0.0, steps_sum = 0.0;
        for (int t = 0; t < tpc; ++t) {
            const detail::TrialRecord& rec = records[p * tpc + t];
            if (!rec.done) {
                all_done = false;
                break;
            }
            loss_sum += rec.final_loss;
            if (rec.converged) {
                ++stats.success_count;
                steps_sum += static_cast<double>(rec.steps);
            }
        }
        if (!all_done) continue;  // cancelled mid-cell; stays pending for resume
        stats.mean_final_loss = loss_sum / tpc;
        if (stats.success_count > 0)
            stats.mean_steps_to_converge = steps_sum / static_cast<double>(stats.success_count);
        result.cells[c] = stats;
        result.cell_done[c] = 1;
        if (options.progress) options.progress(c, stats);
    }
    return result;
}

struct DecayFit {
    double rate_hat = 0.0;
    double r_squared = 0.0;
};

/// Least-squares slope of log residual_y against time over the samples
/// before the residual hits the numerical floor: 10x machine epsilon,
/// scaled by the initial residual when that exceeds one so a flatlined
/// roundoff tail never enters the fit. Requires at least 10 samples above
/// the floor.
inline DecayFit fit_decay_rate(const Trajectory& traj) {
    double floor = 10.0 * std::numeric_limits<double>::epsilon();
    if (!traj.samples.empty()) floor *= std::max(1.0, traj.samples.front().residual_y);
    std::vector<double> ts, ys;
    for (const TrajectorySample& s : traj.samples) {
        if (!(s.residual_y > floor)) break;
        ts.push_back(s.time);
        ys.push_back(std::log(s.residual_y));
    }
    if (ts.size() < 10)
        throw InsufficientDataError("fit_decay_rate: need >= 10 samples above the residual floor, have " +
                                    std::to_string(ts.size()));
    const std::size_t n = ts.size();
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tm += ts[i];
        ym += ys[i];
    }
    tm /= n;
    ym /= n;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        stt += (ts[i] - tm) * (ts[i] - tm);
        sty += (ts[i] - tm) * (ys[i] - ym);
        syy += (ys[i] - ym) * (ys[i] - ym);
    }
    if (stt == 0.0) throw InsufficientDataError("fit_decay_rate: all samples share one time point");
    const double slope = sty / stt;
    DecayFit fit;
    fit.rate_hat = -slope;
    fit.r_squared = syy == 0.0 ? 1.0 : (sty * sty) / (stt * syy);
    return fit;
}

struct EarlyStopParams {
    Eigen::Index k = 0, d = 0, n = 0, m = 0;
    std::string activation = "sigmoid";
    VDist v_dist = VDist::rademacher;
    OperatorKind operator_kind = OperatorKind::gaussian;
    double noise_level = 0.0;   // must be > 0
    double step_size = 0.25;    // Euler step for integrating to t*
    long step_cap = 10000000;   // bound on steps-to-horizon per trial
};

struct EarlyStopTrial {
    bool condition_eq5 = false;
    double t_star = 0.0;
    long steps = 0;
    double residual_ybar = 0.0;  // |y(t*) - y_bar|
    double noise_norm = 0.0;
    bool within_bound = false;   // residual_ybar <= 2 |eps|
};

struct EarlyStopSummary {
    int trials = 0;
    int included = 0;   // trials with condition_eq5 true
    int excluded = 0;   // convergence condition unmet at init; counted separately
    long success_included = 0;
    long success_all = 0;
    // fraction of included trials meeting the bound; NaN when none qualify
    double fraction = std::numeric_limits<double>::quiet_NaN();
    double fraction_all = 0.0;
    std::vector<EarlyStopTrial> details;
};

/// Runs the flow to the early-stopping time t* per trial and evaluates the
/// prediction error |y(t*) - y_bar| against 2 |eps|. Trials violating the
/// convergence condition are excluded from the headline fraction but still
/// executed and reported.
inline EarlyStopSummary early_stopping_experiment(const EarlyStopParams& params, int trials,
                                                  std::uint64_t seed,
                                                  ThreadPool* pool = nullptr) {
    if (!(params.noise_level > 0.0))
        throw ConfigError("early_stopping_experiment: noise_level must be > 0");
    if (trials < 1) throw ConfigError("early_stopping_experiment: trials must be >= 1");
    const ActivationSpec act = make_activation(params.activation);
    EarlyStopSummary summary;
    summary.trials = trials;
    summary.details.assign(trials, EarlyStopTrial{});

    auto body = [&](long i) {
        const std::uint64_t tseed = derive_seed(seed, {static_cast<std::uint64_t>(i)});
        const InverseProblem prob = make_problem(params.m, params.n, params.noise_level,
                                                 derive_seed(tseed, {2}), params.operator_kind);
        DipNetwork net = init_network(params.k, params.d, params.n, act, derive_seed(tseed, {3}),
                                      params.v_dist);
        const TheoryReport report = build_report(net, prob);
        EarlyStopTrial& trial = summary.details[i];
        trial.condition_eq5 = report.condition_eq5;
        trial.noise_norm = prob.eps.norm();
        const std::optional<double> t_star =
            early_stopping_time(report, report.init_residual, trial.noise_norm);
        trial.t_star = t_star.value_or(std::numeric_limits<double>::infinity());
        if (!t_star) {  // degenerate rate: no finite horizon, evaluate at init
            trial.residual_ybar = (prob.A * forward(net) - prob.y_bar).norm();
            trial.within_bound = trial.residual_ybar <= 2.0 * trial.noise_norm;
            return;
        }
        const double raw_steps = std::ceil(*t_star / params.step_size);
        trial.steps = raw_steps > static_cast<double>(params.step_cap)
                          ? params.step_cap
                          : static_cast<long>(raw_steps);
        if (trial.steps > 0) {
            FlowConfig cfg;
            cfg.step_size = params.step_size;
            cfg.max_steps = trial.steps;
            cfg.loss_threshold = std::numeric_limits<double>::denorm_min();  // run to t*
            cfg.record_every = trial.steps;
            run_flow(net, prob, cfg);
        }
        trial.residual_ybar = (prob.A * forward(net) - prob.y_bar).norm();
        trial.within_bound = trial.residual_ybar <= 2.0 * trial.noise_norm;
    };
    if (pool)
        pool->parallel_index(trials, body);
    else
        for (int i = 0; i < trials; ++i) body(i);

    for (const EarlyStopTrial& t : summary.details) {
        if (t.condition_eq5) {
            ++summary.included;
            summary.success_included += t.within_bound;
        } else {
            ++summary.excluded;
        }
        summary.success_all += t.within_bound;
    }
    if (summary.included > 0)
        summary.fraction = static_cast<double>(summary.success_included) / summary.included;
    summary.fraction_all = static_cast<double>(summary.success_all) / trials;
    return summary;
}

}  // namespace dip
