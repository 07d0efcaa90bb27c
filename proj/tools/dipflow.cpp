// dipflow: command-line front end for the dip library.
//
// Subcommands:
//   solve   - one (problem, network, flow) run; trajectory CSV, report JSON,
//             decay SVG. Exit 0 converged, 2 step cap, 3 diverged.
//   theory  - convergence report for a fresh initialization, JSON to stdout.
//   phase   - multi-trial success-frequency grid; JSON + CSV + heatmap SVG.
//   verify  - concentration/Lipschitz/initial-error probes, pass/fail per probe.
//
// Exit codes: 0 success, 1 bad config, 2 step cap, 3 diverged, 4 budget
// refused, 5 verify probe failed, 130 interrupted.

#include <atomic>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dip/dip.hpp"

namespace fs = std::filesystem;
using dip::json;

namespace {

std::atomic<bool> g_cancel{false};

void handle_sigint(int) { g_cancel.store(true); }

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    bool resume = false;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw dip::ConfigError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line for the diagnostic
        std::size_t line = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw dip::ConfigError("config: parse error at line " + std::to_string(line) + ": " +
                               e.what());
    }
}

const json& require_section(const json& cfg, const std::string& name) {
    if (!cfg.contains(name))
        throw dip::ConfigError("config: missing section '" + name + "'");
    return cfg.at(name);
}

long require_dim(const json& section, const std::string& section_name, const std::string& field) {
    if (!section.contains(field))
        throw dip::ConfigError(section_name + "." + field + ": missing");
    long v;
    try {
        v = section.at(field).get<long>();
    } catch (const json::exception&) {
        throw dip::ConfigError(section_name + "." + field + ": must be an integer");
    }
    if (v < 1) throw dip::ConfigError(section_name + "." + field + ": must be >= 1");
    return v;
}

std::uint64_t effective_seed(const CommonOptions& opt, const json& cfg) {
    if (opt.seed) return *opt.seed;
    return cfg.value("seed", std::uint64_t{0});
}

int effective_threads(const CommonOptions& opt, const json& cfg) {
    if (opt.threads) return std::max(1, *opt.threads);
    if (cfg.contains("threads")) return std::max(1, cfg.at("threads").get<int>());
    return dip::ThreadPool::default_threads();
}

fs::path effective_out(const CommonOptions& opt, const json& cfg) {
    fs::path dir = opt.out_dir ? fs::path(*opt.out_dir)
                               : fs::path(cfg.value("out", std::string("out")));
    fs::create_directories(dir);
    return dir;
}

dip::InverseProblem problem_from_config(const json& cfg, std::uint64_t seed) {
    const json& p = require_section(cfg, "problem");
    const double noise = p.value("noise_level", 0.0);
    if (noise < 0.0) throw dip::ConfigError("problem.noise_level: must be >= 0");
    const dip::OperatorKind kind =
        dip::operator_kind_from_name(p.value("operator", std::string("gaussian")));
    if (kind == dip::OperatorKind::custom) {
        if (!p.contains("matrix_path"))
            throw dip::ConfigError("problem.matrix_path: required for the custom operator");
        return dip::make_custom_problem(dip::load_matrix(p.at("matrix_path").get<std::string>()),
                                        noise, seed);
    }
    return dip::make_problem(require_dim(p, "problem", "m"), require_dim(p, "problem", "n"),
                             noise, seed, kind);
}

dip::DipNetwork network_from_config(const json& cfg, Eigen::Index n, std::uint64_t seed) {
    const json& net = require_section(cfg, "network");
    const dip::ActivationSpec act =
        dip::make_activation(net.value("activation", std::string("sigmoid")));
    const dip::VDist vd = dip::v_dist_from_name(net.value("v_dist", std::string("rademacher")));
    return dip::init_network(require_dim(net, "network", "k"), require_dim(net, "network", "d"),
                             n, act, seed, vd);
}

dip::FlowConfig flow_from_config(const json& cfg) {
    dip::FlowConfig flow;
    if (cfg.contains("flow")) flow = dip::flow_config_from_json(cfg.at("flow"));
    flow.validate();
    return flow;
}

json effective_config(const json& cfg, std::uint64_t seed) {
    json echo = cfg;
    echo["seed"] = seed;
    echo.erase("threads");
    return echo;
}

int cmd_solve(const CommonOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const std::uint64_t seed = effective_seed(opt, cfg);
    const fs::path out_dir = effective_out(opt, cfg);

    const dip::InverseProblem prob = problem_from_config(cfg, dip::derive_seed(seed, {2}));
    dip::DipNetwork net = network_from_config(cfg, prob.n(), dip::derive_seed(seed, {3}));
    const dip::FlowConfig flow = flow_from_config(cfg);
    const dip::TheoryReport report = dip::build_report(net, prob);
    const dip::Trajectory traj = dip::run_flow(net, prob, flow);

    const std::string provenance = effective_config(cfg, seed).dump();
    {
        std::ofstream csv(out_dir / "trajectory.csv");
        dip::write_trajectory_csv(csv, traj, provenance);
    }
    {
        json rep = dip::theory_report_to_json(report);
        rep["config"] = effective_config(cfg, seed);
        rep["outcome"] = dip::to_string(traj.outcome);
        rep["steps_taken"] = traj.steps_taken;
        rep["final_loss"] = traj.final_loss;
        std::ofstream js(out_dir / "theory_report.json");
        js << rep.dump(2) << "\n";
    }
    {
        std::ofstream svg(out_dir / "decay_curve.svg");
        dip::write_decay_svg(svg, traj, report.condition_eq5 ? report.rate : 0.0, provenance);
    }
    std::cout << "outcome=" << dip::to_string(traj.outcome) << " steps=" << traj.steps_taken
              << " final_loss=" << dip::format_double(traj.final_loss) << " artifacts="
              << out_dir.string() << "\n";
    switch (traj.outcome) {
        case dip::FlowOutcome::converged: return 0;
        case dip::FlowOutcome::step_cap: return 2;
        case dip::FlowOutcome::diverged: return 3;
    }
    return 0;
}

int cmd_theory(const CommonOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const std::uint64_t seed = effective_seed(opt, cfg);

    const dip::InverseProblem prob = problem_from_config(cfg, dip::derive_seed(seed, {2}));
    const dip::DipNetwork net = network_from_config(cfg, prob.n(), dip::derive_seed(seed, {3}));
    const dip::TheoryReport report = dip::build_report(net, prob);

    const json tcfg = cfg.value("theory", json::object());
    const double target = tcfg.value("target_failure", report.chernoff_target);
    // default C1 fitted on the measured k-boundary of the (m=10, d=500)
    // success-frequency grid; see README
    const double C1 = tcfg.value("C1", 5.6e-4);
    json out = dip::theory_report_to_json(report);
    out["chernoff_required_k"] = json{
        {"target_failure", target},
        {"k", dip::chernoff_required_k(net.n(), net.activation, net.D, target)}};
    out["theorem2_width"] = json{
        {"C1", C1},
        {"k", dip::theorem2_width(net.n(), prob.m(), net.d(), prob.kappa_A, C1)}};
    out["config"] = effective_config(cfg, seed);
    std::cout << out.dump(2) << "\n";
    if (opt.out_dir) {
        std::ofstream js(effective_out(opt, cfg) / "theory_report.json");
        js << out.dump(2) << "\n";
    }
    return 0;
}

int cmd_phase(const CommonOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const fs::path out_dir = effective_out(opt, cfg);
    dip::GridSpec spec = dip::grid_spec_from_json(require_section(cfg, "grid"));
    if (opt.seed) spec.master_seed = *opt.seed;
    spec.validate();

    dip::GridResult previous;
    dip::GridRunOptions run_options;
    const fs::path result_path = out_dir / "grid_result.json";
    if (opt.resume && fs::exists(result_path)) {
        std::ifstream in(result_path);
        previous = dip::grid_result_from_json(json::parse(in));
        if (dip::grid_spec_to_json(previous.spec) != dip::grid_spec_to_json(spec))
            throw dip::ConfigError("--resume: existing grid_result.json was produced by a "
                                   "different grid spec");
        run_options.resume_from = &previous;
    }
    run_options.cancel = &g_cancel;
    run_options.progress = [&](long cell, const dip::CellStats& stats) {
        std::cout << "cell " << cell << "/" << spec.cells() << " done: success "
                  << stats.success_count << "/" << stats.trials << "\n";
    };

    const dip::ThreadPool pool(effective_threads(opt, cfg));
    std::signal(SIGINT, handle_sigint);
    dip::GridResult result;
    try {
        result = dip::run_grid(spec, pool, run_options);
    } catch (const dip::BudgetError& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return 4;
    }

    {
        std::ofstream js(result_path);
        js << dip::grid_result_to_json(result).dump(2) << "\n";
    }
    {
        std::ofstream csv(out_dir / "grid_result.csv");
        dip::write_grid_csv(csv, result);
    }
    {
        std::ofstream svg(out_dir / "heatmap.svg");
        dip::write_heatmap_svg(svg, result, dip::grid_spec_to_json(spec).dump());
    }
    if (!result.complete()) {
        std::cout << "interrupted: partial result written to " << result_path.string()
                  << " (rerun with --resume to finish)\n";
        return 130;
    }
    std::cout << "grid complete: " << spec.cells() << " cells, artifacts in " << out_dir.string()
              << "\n";
    return 0;
}

int cmd_verify(const CommonOptions& opt) {
    const json cfg = load_config(opt.config_path);
    const std::uint64_t seed = effective_seed(opt, cfg);
    const fs::path out_dir = effective_out(opt, cfg);
    const json vcfg = cfg.value("verify", json::object());

    const long n = vcfg.value("n", 20L);
    const long d = vcfg.value("d", 50L);
    const long m = vcfg.value("m", 10L);
    const int trials = vcfg.value("trials", 100);
    const int pairs = vcfg.value("pairs", 100);
    const double target = vcfg.value("target_failure", 0.05);
    const double noise = vcfg.value("noise_level", 0.0);
    const dip::ActivationSpec act =
        dip::make_activation(vcfg.value("activation", std::string("sigmoid")));
    const dip::VDist vd = dip::v_dist_from_name(vcfg.value("v_dist", std::string("rademacher")));
    const double D = vd == dip::VDist::rademacher ? 1.0 : std::sqrt(3.0);

    dip::ThreadPool pool(effective_threads(opt, cfg));
    json summary;
    bool all_pass = true;
    auto report_line = [&](const std::string& name, bool pass, const std::string& detail) {
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
        summary[name] = json{{"pass", pass}, {"detail", detail}};
        all_pass = all_pass && pass;
    };

    {
        const long k = vcfg.value("k", dip::chernoff_required_k(n, act, D, target));
        const auto probe = dip::probe_sigma_min_concentration(k, d, n, act, trials,
                                                              dip::derive_seed(seed, {11}), vd,
                                                              &pool);
        const double want = 1.0 - 2.0 * target;
        std::ostringstream detail;
        detail << "sigma_min(J0) >= C_phi'/2 in " << probe.fraction * 100 << "% of " << trials
               << " inits at k=" << k << " (need >= " << want * 100 << "%)";
        report_line("sigma_min_concentration", probe.fraction >= want, detail.str());
    }
    {
        const long k = vcfg.value("k", 200L);
        const auto probe =
            dip::probe_jacobian_lipschitz(k, d, n, act, pairs, dip::derive_seed(seed, {12}), vd,
                                          &pool);
        std::ostringstream detail;
        detail << "max empirical ratio " << probe.max_ratio << " vs bound " << probe.bound
               << " over " << pairs << " pairs";
        report_line("jacobian_lipschitz", probe.max_ratio <= probe.bound, detail.str());
    }
    {
        const long k = vcfg.value("k", 200L);
        auto make_prob = [&](std::uint64_t s) {
            return dip::make_problem(m, n, noise, s, dip::OperatorKind::gaussian);
        };
        const auto probe = dip::probe_init_error(k, d, n, m, act, make_prob, trials,
                                                 dip::derive_seed(seed, {13}), vd, &pool);
        const double want = std::max(0.9, 1.0 - 2.0 / static_cast<double>(d));
        std::ostringstream detail;
        detail << "initial error within bound in " << probe.fraction_within * 100 << "% of "
               << trials << " trials (need >= " << want * 100 << "%)";
        report_line("initial_error", probe.fraction_within >= want, detail.str());
    }

    summary["config"] = effective_config(cfg, seed);
    std::ofstream js(out_dir / "verify_summary.json");
    js << summary.dump(2) << "\n";
    return all_pass ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep inverse prior gradient-flow toolbox"};
    app.require_subcommand(1);

    CommonOptions opt;

    auto add_common = [&](CLI::App* sub, bool with_resume = false) {
        sub->add_option("--config", opt.config_path, "JSON config file")->required();
        sub->add_option("--seed", opt.seed, "override the config seed");
        sub->add_option("--threads", opt.threads, "worker pool width");
        sub->add_option("--out", opt.out_dir, "output directory");
        if (with_resume) sub->add_flag("--resume", opt.resume, "complete a partial grid");
    };

    CLI::App* solve = app.add_subcommand("solve", "run one gradient-descent flow");
    CLI::App* theory = app.add_subcommand("theory", "print the convergence report");
    CLI::App* phase = app.add_subcommand("phase", "run a success-frequency grid");
    CLI::App* verify = app.add_subcommand("verify", "run the concentration probes");
    add_common(solve);
    add_common(theory);
    add_common(phase, true);
    add_common(verify);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(opt);
        if (theory->parsed()) return cmd_theory(opt);
        if (phase->parsed()) return cmd_phase(opt);
        if (verify->parsed()) return cmd_verify(opt);
    } catch (const dip::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const dip::BudgetError& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return 4;
    } catch (const dip::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
