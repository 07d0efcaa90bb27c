// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Criteria 5 and 8 print additional [INFO] lines covering
// the same machinery in a regime where the convergence condition holds at
// initialization (see README, "Acceptance suite").

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "dip/dip.hpp"

namespace fs = std::filesystem;
using dip::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_threads = dip::ThreadPool::default_threads();

std::vector<std::string> g_info;

void info(const std::string& line) { g_info.push_back(line); }

// shared state between criteria 5/6 and 8
struct EnvelopeRun {
    dip::TheoryReport report;
    dip::Trajectory traj;
    double fit_rate = 0.0;
    bool envelope_ok = true;
    bool ball_sigma_ok = true;
    bool ball_drift_ok = true;
};

std::vector<EnvelopeRun> run_envelope_batch(Eigen::Index k, Eigen::Index d, Eigen::Index n,
                                            Eigen::Index m, long max_steps, long record_every,
                                            std::uint64_t seed_base) {
    std::vector<EnvelopeRun> runs(10);
    dip::ThreadPool pool(g_threads);
    const auto act = dip::make_activation("sigmoid");
    pool.parallel_index(10, [&](long i) {
        const std::uint64_t ts = dip::derive_seed(seed_base, {static_cast<std::uint64_t>(i)});
        const auto prob = dip::make_problem(m, n, 0.0, dip::derive_seed(ts, {2}));
        auto net = dip::init_network(k, d, n, act, dip::derive_seed(ts, {3}));
        EnvelopeRun& run = runs[i];
        run.report = dip::build_report(net, prob);

        dip::FlowConfig cfg;
        cfg.step_size = 0.05;
        cfg.max_steps = max_steps;
        cfg.loss_threshold = 1e-300;
        cfg.record_every = record_every;
        cfg.track_sigma_min = true;
        run.traj = dip::run_flow(net, prob, cfg);

        const double r0 = run.report.init_residual;
        for (const auto& s : run.traj.samples) {
            if (s.residual_y > 1.05 * r0 * std::exp(-run.report.rate * s.time) + 1e-12)
                run.envelope_ok = false;
            if (!s.sigma_min_J || *s.sigma_min_J < run.report.sigma_min_J0 / 2.0)
                run.ball_sigma_ok = false;
            if (s.param_drift > run.report.R_prime) run.ball_drift_ok = false;
        }
        run.fit_rate = dip::fit_decay_rate(run.traj).rate_hat;
    });
    return runs;
}

std::vector<EnvelopeRun>& pinned_envelope_runs() {
    static std::vector<EnvelopeRun> runs =
        run_envelope_batch(5000, 100, 10, 5, 10000, 250, 41001);
    return runs;
}

Outcome criterion_jacobian_fd() {
    double worst = 0.0;
    int count = 0;
    for (const std::string& name : dip::supported_activations()) {
        const auto act = dip::make_activation(name);
        for (std::uint64_t s = 0; s < 20; ++s) {
            dip::Rng dims(dip::derive_seed(s, {8001}));
            const auto k = 1 + static_cast<Eigen::Index>(dims.next_u64() % 5);
            const auto d = 1 + static_cast<Eigen::Index>(dims.next_u64() % 6);
            const auto n = 1 + static_cast<Eigen::Index>(dims.next_u64() % 4);
            auto net = dip::init_network(k, d, n, act, dip::derive_seed(s, {8002}));
            const Eigen::MatrixXd analytic = dip::jacobian(net);
            Eigen::MatrixXd fd(n, k * d);
            const double h = 1e-5;
            auto work = net;
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = 0; j < d; ++j) {
                    work.W = net.W;
                    work.W(i, j) += h;
                    const Eigen::VectorXd up = dip::forward(work);
                    work.W(i, j) = net.W(i, j) - h;
                    fd.col(i * d + j) = (up - dip::forward(work)) / (2.0 * h);
                }
            worst = std::max(worst, (analytic - fd).norm() / fd.norm());
            ++count;
        }
    }
    std::ostringstream detail;
    detail << count << " nets, worst relative Frobenius error " << worst << " (need < 1e-6)";
    return {worst < 1e-6, detail.str()};
}

Outcome criterion_gram_identity() {
    double worst = 0.0;
    for (const std::string& name : dip::supported_activations()) {
        const auto act = dip::make_activation(name);
        for (std::uint64_t s = 0; s < 20; ++s) {
            dip::Rng dims(dip::derive_seed(s, {8001}));
            const auto k = 1 + static_cast<Eigen::Index>(dims.next_u64() % 5);
            const auto d = 1 + static_cast<Eigen::Index>(dims.next_u64() % 6);
            const auto n = 1 + static_cast<Eigen::Index>(dims.next_u64() % 4);
            const auto net = dip::init_network(k, d, n, act, dip::derive_seed(s, {8002}));
            const Eigen::MatrixXd gram = dip::jacobian_gram(net);
            const Eigen::MatrixXd jjt = dip::jacobian(net) * dip::jacobian(net).transpose();
            worst = std::max(worst, (gram - jjt).norm() / gram.norm());
        }
    }
    std::ostringstream detail;
    detail << "worst relative error " << worst << " (need < 1e-10)";
    return {worst < 1e-10, detail.str()};
}

Outcome criterion_sigma_min_probe() {
    const auto act = dip::make_activation("sigmoid");
    const long long k = dip::chernoff_required_k(20, act, 1.0, 0.05);
    dip::ThreadPool pool(g_threads);
    const auto probe = dip::probe_sigma_min_concentration(k, 10, 20, act, 200, 6101,
                                                          dip::VDist::rademacher, &pool);
    std::ostringstream detail;
    detail << "k = " << k << ", sigma_min >= C_phi'/2 in " << probe.fraction * 200 << "/200 inits"
           << " (need >= 190), min sigma_min = " << probe.min;
    return {probe.fraction >= 0.95, detail.str()};
}

Outcome criterion_lipschitz_probe() {
    dip::ThreadPool pool(g_threads);
    const auto probe = dip::probe_jacobian_lipschitz(200, 50, 10, dip::make_activation("sigmoid"),
                                                     100, 6301, dip::VDist::rademacher, &pool);
    std::ostringstream detail;
    detail << "max ratio " << probe.max_ratio << " vs bound " << probe.bound << " over 100 pairs";
    return {probe.max_ratio <= probe.bound, detail.str()};
}

Outcome criterion_envelope() {
    const auto& runs = pinned_envelope_runs();
    int cond_ok = 0, env_ok = 0, fit_ok = 0;
    for (const auto& run : runs) {
        cond_ok += run.report.condition_eq5;
        env_ok += run.envelope_ok;
        fit_ok += run.fit_rate >= 0.95 * run.report.rate;
    }
    std::ostringstream detail;
    detail << "condition_eq5 " << cond_ok << "/10, envelope " << env_ok << "/10, fit>=0.95*rate "
           << fit_ok << "/10";
    if (cond_ok < 10) {
        const auto& r = runs[0].report;
        detail << " | condition unattainable here: residual/sigma_A = "
               << r.init_residual / r.sigma_A << " vs sigma_min^2/(4 Lip) = "
               << r.sigma_min_J0 * r.sigma_min_J0 / (4.0 * r.lip_J_bound)
               << " at k=5000, n=10, m=5";
    }
    return {cond_ok == 10 && env_ok == 10 && fit_ok == 10, detail.str()};
}

Outcome criterion_trajectory_ball() {
    const auto& runs = pinned_envelope_runs();
    int sigma_ok = 0, drift_ok = 0;
    for (const auto& run : runs) {
        sigma_ok += run.ball_sigma_ok;
        drift_ok += run.ball_drift_ok;
    }
    std::ostringstream detail;
    detail << "sigma_min(J(t)) >= sigma_min(J0)/2 in " << sigma_ok
           << "/10 runs, |W(t)-W(0)|_F <= R' in " << drift_ok << "/10 runs";
    return {sigma_ok == 10 && drift_ok == 10, detail.str()};
}

Outcome criterion_phase_grids() {
    dip::ThreadPool pool(g_threads);

    dip::GridSpec fig1;
    fig1.axis1 = {"k", {900}};
    fig1.axis2 = {"n", {60}};
    fig1.fixed_dims = {{"m", 10}, {"d", 500}};
    fig1.trials_per_cell = 10;
    fig1.flow.step_size = 1.0;
    fig1.flow.max_steps = 25000;
    fig1.flow.loss_threshold = 1e-7;
    fig1.flow.record_every = 5000;
    fig1.master_seed = 70101;
    const auto res1 = dip::run_grid(fig1, pool);
    const double f_n60 = res1.cells[0].success_freq();

    dip::GridSpec fig2 = fig1;
    fig2.axis2 = {"m", {10, 50}};
    fig2.fixed_dims = {{"n", 60}, {"d", 500}};
    fig2.master_seed = 70102;
    const auto res2 = dip::run_grid(fig2, pool);
    const double f_m10 = res2.cells[0].success_freq();
    const double f_m50 = res2.cells[1].success_freq();

    std::ostringstream detail;
    detail << "(k=900,n=60,m=10): " << f_n60 << " (need >= 0.9); (k=900,m=10,n=60): " << f_m10
           << " (need >= 0.9); (k=900,m=50,n=60): " << f_m50 << " (need <= 0.2)";
    return {f_n60 >= 0.9 && f_m10 >= 0.9 && f_m50 <= 0.2, detail.str()};
}

Outcome criterion_early_stopping() {
    dip::ThreadPool pool(g_threads);
    dip::EarlyStopParams params;
    params.k = 5000;
    params.d = 100;
    params.n = 10;
    params.m = 5;
    params.noise_level = 0.1;  // |eps| = 0.1 |y_bar| by construction
    params.step_size = 0.25;
    const auto summary = dip::early_stopping_experiment(params, 10, 81001, &pool);
    std::ostringstream detail;
    detail << summary.included << "/10 trials satisfy the condition; fraction within 2|eps| "
           << "among them: " << summary.fraction << "; across all trials: " << summary.fraction_all;
    const bool pass = summary.included > 0 && summary.fraction >= 0.9;
    return {pass, detail.str()};
}

Outcome criterion_cli_determinism() {
    const fs::path tmp = fs::temp_directory_path() /
                         ("dip_acc_" + std::to_string(::getpid()));
    fs::create_directories(tmp);
    const json cfg{{"grid",
                    {{"axis1", {{"name", "k"}, {"values", {4, 8}}}},
                     {"axis2", {{"name", "n"}, {"values", {2, 3}}}},
                     {"fixed", {{"m", 2}, {"d", 3}}},
                     {"trials_per_cell", 3},
                     {"flow", {{"step_size", 1.0}, {"max_steps", 40}, {"loss_threshold", 1e-4},
                               {"record_every", 20}, {"track_sigma_min", false}}},
                     {"master_seed", 4242},
                     {"budget", 1000}}}};
    const fs::path cfg_path = tmp / "grid.json";
    {
        std::ofstream out(cfg_path);
        out << cfg.dump(2) << "\n";
    }
    auto run_phase = [&](int threads, const std::string& dir) {
        const std::string cmd = std::string(DIPFLOW_BIN) + " phase --config " + cfg_path.string() +
                                " --out " + (tmp / dir).string() + " --threads " +
                                std::to_string(threads) + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    const int s1 = run_phase(1, "t1");
    const int s8 = run_phase(8, "t8");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string a = slurp(tmp / "t1" / "grid_result.json");
    const std::string b = slurp(tmp / "t8" / "grid_result.json");
    fs::remove_all(tmp);
    std::ostringstream detail;
    detail << "grid_result.json bytes: " << a.size() << " vs " << b.size()
           << (a == b ? " (identical)" : " (DIFFER)");
    const bool ok = WIFEXITED(s1) && WEXITSTATUS(s1) == 0 && WIFEXITED(s8) &&
                    WEXITSTATUS(s8) == 0 && !a.empty() && a == b;
    return {ok, detail.str()};
}

void supplementary_condition_regime() {
    // same checks in an attainable regime: m=1, n=4, k=20000, d=100
    const auto runs = run_envelope_batch(20000, 100, 4, 1, 4000, 100, 52001);
    int cond_ok = 0, env_ok = 0, fit_ok = 0, sig_ok = 0, drift_ok = 0;
    for (const auto& run : runs) {
        cond_ok += run.report.condition_eq5;
        env_ok += run.envelope_ok;
        fit_ok += run.fit_rate >= 0.95 * run.report.rate;
        sig_ok += run.ball_sigma_ok;
        drift_ok += run.ball_drift_ok;
    }
    std::ostringstream line;
    line << "condition-true regime (k=20000,n=4,m=1,d=100): condition " << cond_ok
         << "/10, envelope " << env_ok << "/10, fit " << fit_ok << "/10, sigma-half " << sig_ok
         << "/10, drift<=R' " << drift_ok << "/10";
    info(line.str());

    dip::ThreadPool pool(g_threads);
    dip::EarlyStopParams params;
    params.k = 20000;
    params.d = 100;
    params.n = 4;
    params.m = 1;
    params.noise_level = 0.1;
    params.step_size = 0.25;
    const auto summary = dip::early_stopping_experiment(params, 10, 52002, &pool);
    std::ostringstream line2;
    line2 << "early stopping there: " << summary.included << "/10 condition-satisfying, fraction "
          << summary.fraction << " within 2|eps| (all trials: " << summary.fraction_all << ")";
    info(line2.str());
}

}  // namespace

int main() {
    struct Criterion {
        std::string name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"01 jacobian vs finite differences", criterion_jacobian_fd},
        {"02 gram identity H = J J^T", criterion_gram_identity},
        {"03 sigma_min concentration (k from the Chernoff tail)", criterion_sigma_min_probe},
        {"04 jacobian Lipschitz bound", criterion_lipschitz_probe},
        {"05 exponential decay envelope", criterion_envelope},
        {"06 trajectory stays in the certified ball", criterion_trajectory_ball},
        {"07 phase-transition cells", criterion_phase_grids},
        {"08 early stopping at the noise horizon", criterion_early_stopping},
        {"09 grid determinism across thread counts", criterion_cli_determinism},
    };

    int failed = 0;
    for (const auto& criterion : criteria) {
        const auto start = Clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count() /
            1000.0;
        std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << criterion.name << " (" << secs
                  << "s): " << outcome.detail << std::endl;
        failed += !outcome.pass;
    }
    try {
        supplementary_condition_regime();
    } catch (const std::exception& e) {
        info(std::string("supplementary checks failed to run: ") + e.what());
    }
    for (const auto& line : g_info) std::cout << "[INFO] " << line << std::endl;
    std::cout << (failed == 0 ? "ALL CRITERIA PASSED" : std::to_string(failed) + " CRITERIA FAILED")
              << std::endl;
    return failed;
}
