#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dip/errors.hpp"
#include "dip/experiment.hpp"
#include "dip/flow.hpp"
#include "dip/model.hpp"
#include "dip/problem.hpp"
#include "dip/theory.hpp"

namespace dip {

using json = nlohmann::json;

/// Shortest round-trip decimal rendering (for CSV and SVG output).
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// dense matrix file: 8-byte header (uint32 rows, uint32 cols, little endian)
// followed by rows*cols float64 values in row-major order
// ---------------------------------------------------------------------------

inline void save_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("save_matrix: cannot open '" + path + "' for writing");
    const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    if (!out) throw ConfigError("save_matrix: write to '" + path + "' failed");
}

inline Eigen::MatrixXd load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("load_matrix: cannot open '" + path + "'");
    std::uint32_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 4);
    if (!in || rows == 0 || cols == 0)
        throw ConfigError("load_matrix: '" + path + "' has an invalid dimension header");
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j) {
            double v;
            in.read(reinterpret_cast<char*>(&v), 8);
            if (!in) throw ConfigError("load_matrix: '" + path + "' is truncated");
            m(i, j) = v;
        }
    return m;
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    const std::size_t rows = j.size();
    if (rows == 0) throw ConfigError("matrix_from_json: empty matrix");
    const std::size_t cols = j.at(0).size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j.at(i).size() != cols) throw ConfigError("matrix_from_json: ragged rows");
        for (std::size_t jj = 0; jj < cols; ++jj) m(i, jj) = j.at(i).at(jj).get<double>();
    }
    return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

// ---------------------------------------------------------------------------
// network snapshot
// ---------------------------------------------------------------------------

/// Snapshot with dimensions, seed and activation name; raw matrices are
/// included when with_matrices is set (otherwise the network is re-derived
/// from the seed on load).
inline json network_to_json(const DipNetwork& net, bool with_matrices = false) {
    json j{{"k", net.k()},
           {"d", net.d()},
           {"n", net.n()},
           {"activation", net.activation.name},
           {"v_dist", to_string(net.v_dist)},
           {"seed", net.seed},
           {"D", net.D}};
    if (with_matrices) {
        j["u"] = vector_to_json(net.u);
        j["W"] = matrix_to_json(net.W);
        j["V"] = matrix_to_json(net.V);
    }
    return j;
}

inline DipNetwork network_from_json(const json& j) {
    const ActivationSpec act = make_activation(j.at("activation").get<std::string>());
    const VDist vd = v_dist_from_name(j.at("v_dist").get<std::string>());
    if (j.contains("W")) {
        DipNetwork net;
        net.activation = act;
        net.seed = j.at("seed").get<std::uint64_t>();
        net.v_dist = vd;
        net.u = vector_from_json(j.at("u"));
        net.W = matrix_from_json(j.at("W"));
        net.V = matrix_from_json(j.at("V"));
        net.D = j.at("D").get<double>();
        if (net.W.cols() != net.u.size() || net.V.cols() != net.W.rows())
            throw ConfigError("network_from_json: snapshot matrices have mismatched dimensions");
        return net;
    }
    return init_network(j.at("k").get<Eigen::Index>(), j.at("d").get<Eigen::Index>(),
                        j.at("n").get<Eigen::Index>(), act, j.at("seed").get<std::uint64_t>(), vd);
}

// ---------------------------------------------------------------------------
// problem snapshot
// ---------------------------------------------------------------------------

inline json problem_to_json(const InverseProblem& p, bool with_matrices = false) {
    json j{{"m", p.m()},
           {"n", p.n()},
           {"operator", to_string(p.kind)},
           {"noise_level", p.noise_level},
           {"seed", p.seed}};
    if (with_matrices) {
        j["A"] = matrix_to_json(p.A);
        j["x_bar"] = vector_to_json(p.x_bar);
        j["eps"] = vector_to_json(p.eps);
    }
    return j;
}

inline InverseProblem problem_from_json(const json& j) {
    const OperatorKind kind = operator_kind_from_name(j.at("operator").get<std::string>());
    if (j.contains("A")) {
        InverseProblem p;
        p.kind = kind;
        p.noise_level = j.at("noise_level").get<double>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.A = matrix_from_json(j.at("A"));
        p.x_bar = vector_from_json(j.at("x_bar"));
        p.eps = vector_from_json(j.at("eps"));
        p.y_bar = p.A * p.x_bar;
        p.y = p.y_bar + p.eps;
        const SpectralSummary s = spectral_summary(p.A);
        p.sigma_A = s.sigma_A;
        p.kappa_A = s.kappa_A;
        p.sigma_max = s.sigma_max;
        p.rank = s.rank;
        return p;
    }
    if (kind == OperatorKind::custom)
        throw ConfigError("problem_from_json: custom problems need embedded matrices");
    return make_problem(j.at("m").get<Eigen::Index>(), j.at("n").get<Eigen::Index>(),
                        j.at("noise_level").get<double>(), j.at("seed").get<std::uint64_t>(), kind);
}

// ---------------------------------------------------------------------------
// theory report
// ---------------------------------------------------------------------------

inline json theory_report_to_json(const TheoryReport& r) {
    json meta{{"m", r.m},           {"n", r.n},
              {"k", r.k},           {"d", r.d},
              {"activation", r.activation},
              {"D", r.D},
              {"chernoff_target_failure", r.chernoff_target},
              {"x0_interpretation", "ground truth x_bar"}};
    if (!r.note.empty()) meta["note"] = r.note;
    return json{{"sigma_A", r.sigma_A},
                {"kappa_A", r.kappa_A},
                {"sigma_min_J0", r.sigma_min_J0},
                {"lip_J_bound", r.lip_J_bound},
                {"init_residual", r.init_residual},
                {"R", r.R},
                {"R_prime", r.R_prime},
                {"condition_eq5", r.condition_eq5},
                {"rate", r.rate},
                {"chernoff_k", r.chernoff_k},
                {"metadata", std::move(meta)}};
}

inline TheoryReport theory_report_from_json(const json& j) {
    TheoryReport r;
    r.sigma_A = j.at("sigma_A").get<double>();
    r.kappa_A = j.at("kappa_A").get<double>();
    r.sigma_min_J0 = j.at("sigma_min_J0").get<double>();
    r.lip_J_bound = j.at("lip_J_bound").get<double>();
    r.init_residual = j.at("init_residual").get<double>();
    r.R = j.at("R").get<double>();
    r.R_prime = j.at("R_prime").is_null() ? std::numeric_limits<double>::infinity()
                                          : j.at("R_prime").get<double>();
    r.condition_eq5 = j.at("condition_eq5").get<bool>();
    r.rate = j.at("rate").get<double>();
    r.chernoff_k = j.at("chernoff_k").get<long long>();
    if (j.contains("metadata")) {
        const json& meta = j.at("metadata");
        r.m = meta.value("m", 0);
        r.n = meta.value("n", 0);
        r.k = meta.value("k", 0);
        r.d = meta.value("d", 0);
        r.activation = meta.value("activation", "");
        r.D = meta.value("D", 1.0);
        r.chernoff_target = meta.value("chernoff_target_failure", 0.5);
        r.note = meta.value("note", "");
    }
    return r;
}

// ---------------------------------------------------------------------------
// trajectory CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTrajectoryCsvHeader =
    "step,time,loss,residual_y,residual_ybar,param_drift,sigma_min_J";

/// CSV with one row per recorded sample. provenance, when nonempty, is
/// embedded as a leading '#' comment line.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                                 const std::string& provenance = "") {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << kTrajectoryCsvHeader << "\n";
    for (const TrajectorySample& s : traj.samples) {
        out << s.step << ',' << format_double(s.time) << ',' << format_double(s.loss) << ','
            << format_double(s.residual_y) << ',' << format_double(s.residual_ybar) << ','
            << format_double(s.param_drift) << ',';
        if (s.sigma_min_J) out << format_double(*s.sigma_min_J);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// grid spec / result
// ---------------------------------------------------------------------------

inline json flow_config_to_json(const FlowConfig& f) {
    return json{{"step_size", f.step_size},
                {"max_steps", f.max_steps},
                {"loss_threshold", f.loss_threshold},
                {"record_every", f.record_every},
                {"track_sigma_min", f.track_sigma_min}};
}

inline FlowConfig flow_config_from_json(const json& j) {
    FlowConfig f;
    f.step_size = j.value("step_size", f.step_size);
    f.max_steps = j.value("max_steps", f.max_steps);
    f.loss_threshold = j.value("loss_threshold", f.loss_threshold);
    f.record_every = j.value("record_every", f.record_every);
    f.track_sigma_min = j.value("track_sigma_min", f.track_sigma_min);
    return f;
}

inline json grid_spec_to_json(const GridSpec& g) {
    return json{{"axis1", {{"name", g.axis1.name}, {"values", g.axis1.values}}},
                {"axis2", {{"name", g.axis2.name}, {"values", g.axis2.values}}},
                {"fixed", g.fixed_dims},
                {"activation", g.activation},
                {"v_dist", to_string(g.v_dist)},
                {"operator", to_string(g.operator_kind)},
                {"noise_level", g.noise_level},
                {"trials_per_cell", g.trials_per_cell},
                {"flow", flow_config_to_json(g.flow)},
                {"master_seed", g.master_seed},
                {"budget", g.budget}};
}

inline GridSpec grid_spec_from_json(const json& j) {
    GridSpec g;
    g.axis1.name = j.at("axis1").at("name").get<std::string>();
    g.axis1.values = j.at("axis1").at("values").get<std::vector<long>>();
    g.axis2.name = j.at("axis2").at("name").get<std::string>();
    g.axis2.values = j.at("axis2").at("values").get<std::vector<long>>();
    g.fixed_dims = j.at("fixed").get<std::map<std::string, long>>();
    g.activation = j.value("activation", g.activation);
    if (j.contains("v_dist")) g.v_dist = v_dist_from_name(j.at("v_dist").get<std::string>());
    if (j.contains("operator"))
        g.operator_kind = operator_kind_from_name(j.at("operator").get<std::string>());
    g.noise_level = j.value("noise_level", 0.0);
    g.trials_per_cell = j.value("trials_per_cell", g.trials_per_cell);
    if (j.contains("flow")) g.flow = flow_config_from_json(j.at("flow"));
    g.master_seed = j.value("master_seed", std::uint64_t{0});
    g.budget = j.value("budget", g.budget);
    return g;
}

inline json grid_result_to_json(const GridResult& r) {
    json cells = json::array();
    const long n2 = static_cast<long>(r.spec.axis2.values.size());
    for (long c = 0; c < static_cast<long>(r.cells.size()); ++c) {
        const CellStats& s = r.cells[c];
        json cell{{"axis1", r.spec.axis1.values[c / n2]},
                  {"axis2", r.spec.axis2.values[c % n2]},
                  {"done", static_cast<bool>(r.cell_done[c])},
                  {"success_count", s.success_count},
                  {"trials", s.trials},
                  {"success_freq", s.success_freq()},
                  {"mean_final_loss", s.mean_final_loss},
                  {"seeds", r.cell_seeds[c]}};
        if (std::isnan(s.mean_steps_to_converge))
            cell["mean_steps_to_converge"] = nullptr;
        else
            cell["mean_steps_to_converge"] = s.mean_steps_to_converge;
        cells.push_back(std::move(cell));
    }
    return json{{"spec", grid_spec_to_json(r.spec)},
                {"cells", std::move(cells)},
                {"complete", r.complete()}};
}

inline GridResult grid_result_from_json(const json& j) {
    GridResult r;
    r.spec = grid_spec_from_json(j.at("spec"));
    const long cells = r.spec.cells();
    r.cells.assign(cells, CellStats{});
    r.cell_seeds.assign(cells, {});
    r.cell_done.assign(cells, 0);
    const json& arr = j.at("cells");
    if (static_cast<long>(arr.size()) != cells)
        throw ConfigError("grid_result_from_json: cell count does not match the grid dimensions");
    for (long c = 0; c < cells; ++c) {
        const json& cell = arr.at(c);
        CellStats s;
        s.success_count = cell.at("success_count").get<long>();
        s.trials = cell.at("trials").get<long>();
        s.mean_final_loss = cell.at("mean_final_loss").get<double>();
        if (!cell.at("mean_steps_to_converge").is_null())
            s.mean_steps_to_converge = cell.at("mean_steps_to_converge").get<double>();
        r.cells[c] = s;
        r.cell_done[c] = cell.at("done").get<bool>() ? 1 : 0;
        r.cell_seeds[c] = cell.at("seeds").get<std::vector<std::uint64_t>>();
    }
    return r;
}

inline constexpr const char* kGridCsvHeader = "axis1,axis2,success_freq,trials,mean_steps";

inline void write_grid_csv(std::ostream& out, const GridResult& r) {
    out << "# axis1=" << r.spec.axis1.name << " axis2=" << r.spec.axis2.name
        << " spec=" << grid_spec_to_json(r.spec).dump() << "\n";
    out << kGridCsvHeader << "\n";
    const long n2 = static_cast<long>(r.spec.axis2.values.size());
    for (long c = 0; c < static_cast<long>(r.cells.size()); ++c) {
        const CellStats& s = r.cells[c];
        out << r.spec.axis1.values[c / n2] << ',' << r.spec.axis2.values[c % n2] << ','
            << format_double(s.success_freq()) << ',' << s.trials << ',';
        if (!std::isnan(s.mean_steps_to_converge))
            out << format_double(s.mean_steps_to_converge);
        out << "\n";
    }
}

}  // namespace dip
