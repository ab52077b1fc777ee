#include "orbitgraph/pipeline.hpp"

#include <filesystem>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "orbitgraph/errors.hpp"
#include "orbitgraph/graph.hpp"
#include "orbitgraph/log.hpp"

namespace orbitgraph {

namespace fs = std::filesystem;

namespace {

std::string path_in(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

DeskArm run_arm(const RunConfig& base, const DatasetFile& dataset, bool physics,
                const std::string& out_dir) {
    RunConfig cfg = base;
    cfg.loss.physics_enabled = physics;
    DeskArm arm;
    arm.label = physics ? "physics" : "no-physics";
    const std::string dir = path_in(out_dir, arm.label);

    log_info("reproduce-desk: training " + arm.label + " arm");
    const TrainArtifacts trained = train_run(cfg, dataset, dir, arm.label);
    arm.first_val_loss = trained.fit.reports.front().val_loss;
    arm.best_epoch = trained.fit.best_epoch;
    arm.best_val_loss = trained.fit.reports.at(arm.best_epoch).val_loss;

    const Checkpoint ckpt = load_checkpoint(trained.checkpoint_path);
    arm.evaluation = evaluate_run(ckpt, dataset, dir);
    if (!dataset.split.test.empty()) {
        predict_run(ckpt, dataset, dataset.split.test.front().index, path_in(dir, "predict"));
    }
    return arm;
}

nlohmann::json arm_json(const DeskArm& arm) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : arm.evaluation.metrics.rows) {
        rows.push_back({{"satellite", r.satellite}, {"axis", axis_name(r.axis)}, {"rmse_km", r.rmse}});
    }
    return {{"label", arm.label},
            {"first_val_loss", arm.first_val_loss},
            {"best_val_loss", arm.best_val_loss},
            {"best_epoch", arm.best_epoch},
            {"axis_rmse", rows},
            {"horizon_curve", arm.evaluation.curve.rmse},
            {"tail_slope", arm.evaluation.curve.tail_slope()}};
}

} // namespace

std::string GenerateSummary::to_string() const {
    std::ostringstream os;
    os << "trajectories: " << trajectories << " (train " << train << ", validation " << validation
       << ", test " << test << ")\n";
    os << "agents histogram:";
    for (const auto& [agents, count] : agent_histogram) os << ' ' << agents << ':' << count;
    os << "\nmean step-0 edge density: " << std::fixed << std::setprecision(4)
       << mean_initial_density << '\n';
    return os.str();
}

DatasetFile generate_dataset(const RunConfig& cfg) {
    cfg.scenario.validate();
    DatasetFile out;
    out.config = cfg.scenario;
    out.split = split_dataset(generate_trajectories(cfg.scenario), SplitRatios{}, cfg.split_seed);
    return out;
}

GenerateSummary summarize_dataset(const DatasetFile& dataset) {
    GenerateSummary s;
    s.train = dataset.split.train.size();
    s.validation = dataset.split.validation.size();
    s.test = dataset.split.test.size();
    s.trajectories = dataset.split.total();
    double density = 0.0;
    for (const auto* part : {&dataset.split.train, &dataset.split.validation, &dataset.split.test}) {
        for (const auto& t : *part) {
            ++s.agent_histogram[t.agent_count()];
            density += edge_density(t.adjacency.front());
        }
    }
    if (s.trajectories > 0) s.mean_initial_density = density / static_cast<double>(s.trajectories);
    return s;
}

TrainArtifacts train_run(const RunConfig& cfg, const DatasetFile& dataset,
                         const std::string& out_dir, const std::string& label) {
    check_compatible(cfg.model, dataset);
    TrainArtifacts out;
    out.fit = fit(dataset.split, cfg.train, cfg.model, cfg.loss, {out_dir, label});
    out.checkpoint_path = path_in(out_dir, "checkpoint_best.json");
    out.log_path = path_in(out_dir, "train_log.csv");
    write_text_file(path_in(out_dir, "config.json"), to_json(cfg).dump(2) + "\n");
    return out;
}

void check_compatible(const ModelConfig& model, const DatasetFile& dataset) {
    if (model.layer_dims.empty() || model.layer_dims.front() != kFeatureWidth) {
        throw ConfigError("model.layer_dims", "first entry must equal the feature width " +
                                                  std::to_string(kFeatureWidth));
    }
    if (model.state_dim_out != kStateDim) {
        throw ConfigError("model.state_dim_out", "must be " + std::to_string(kStateDim));
    }
    const std::size_t needed = model.history + model.horizon;
    for (const auto* part : {&dataset.split.train, &dataset.split.validation, &dataset.split.test}) {
        for (const auto& t : *part) {
            if (t.step_count() < needed) {
                throw ConfigError("model.horizon", "history + horizon = " + std::to_string(needed) +
                                                       " exceeds trajectory " +
                                                       std::to_string(t.index) + " length " +
                                                       std::to_string(t.step_count()));
            }
        }
    }
}

EvaluateArtifacts evaluate_run(const Checkpoint& ckpt, const DatasetFile& dataset,
                               const std::string& out_dir, bool autoregressive) {
    check_compatible(ckpt.model.config, dataset);
    if (dataset.split.test.empty()) {
        throw ConfigError("dataset", "test split is empty");
    }
    const EvaluationResult r = evaluate(dataset.split.test, ckpt.model, {autoregressive});
    EvaluateArtifacts out{{ckpt.label, r.axis_rmse}, r.curve};
    write_text_file(path_in(out_dir, "metrics.csv"), metrics_csv(out.metrics));
    write_text_file(path_in(out_dir, "curve.csv"), curve_csv(out.curve));
    return out;
}

const ScenarioTrajectory& find_trajectory(const DatasetFile& dataset, std::size_t index) {
    for (const auto* part : {&dataset.split.train, &dataset.split.validation, &dataset.split.test}) {
        for (const auto& t : *part) {
            if (t.index == index) return t;
        }
    }
    throw ConfigError("--trajectory", "no trajectory with index " + std::to_string(index) +
                                          " (dataset holds " +
                                          std::to_string(dataset.split.total()) + ")");
}

std::vector<std::string> predict_run(const Checkpoint& ckpt, const DatasetFile& dataset,
                                     std::size_t trajectory_index, const std::string& out_dir) {
    check_compatible(ckpt.model.config, dataset);
    const ScenarioTrajectory& traj = find_trajectory(dataset, trajectory_index);
    const EvaluationResult r = evaluate_serial(std::span(&traj, 1), ckpt.model);
    const auto& windows = r.trajectories.front().windows;

    std::ostringstream csv;
    csv << "window_start,agent,step";
    for (const char* c : {"x", "y", "z", "vx", "vy", "vz"}) csv << ",pred_" << c;
    for (const char* c : {"x", "y", "z", "vx", "vy", "vz"}) csv << ",truth_" << c;
    csv << '\n' << std::setprecision(17);
    for (const auto& w : windows) {
        for (std::size_t i = 0; i < w.prediction.agents(); ++i) {
            for (std::size_t k = 0; k < w.prediction.horizon; ++k) {
                csv << w.start << ',' << i + 1 << ',' << w.target_step + k;
                for (std::size_t c = 0; c < kStateDim; ++c) {
                    csv << ',' << w.prediction.values(i, k * kStateDim + c);
                }
                for (std::size_t c = 0; c < kStateDim; ++c) {
                    csv << ',' << w.target(i, k * kStateDim + c);
                }
                csv << '\n';
            }
        }
    }
    auto written = emit_plots(traj, windows, out_dir);
    write_text_file(path_in(out_dir, "predictions.csv"), csv.str());
    written.push_back(path_in(out_dir, "predictions.csv"));
    return written;
}

ComparisonTable plot_runs(const std::string& run_a, const std::string& run_b,
                          const std::string& out_dir) {
    const RunMetrics a = parse_metrics_csv(read_text_file(path_in(run_a, "metrics.csv")));
    const RunMetrics b = parse_metrics_csv(read_text_file(path_in(run_b, "metrics.csv")));
    ComparisonTable table = comparison_table(a, b);
    write_text_file(path_in(out_dir, "comparison.txt"), table.text);
    write_text_file(path_in(out_dir, "comparison.csv"), table.csv);

    const HorizonCurve ca = parse_curve_csv(read_text_file(path_in(run_a, "curve.csv")));
    const HorizonCurve cb = parse_curve_csv(read_text_file(path_in(run_b, "curve.csv")));
    std::ostringstream csv;
    csv << "step," << a.label << ',' << b.label << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k < std::min(ca.rmse.size(), cb.rmse.size()); ++k) {
        csv << k + 1 << ',' << ca.rmse[k] << ',' << cb.rmse[k] << '\n';
    }
    write_text_file(path_in(out_dir, "horizon_comparison.csv"), csv.str());
    return table;
}

std::string DeskReport::summary_json() const {
    const nlohmann::json doc{{"physics", arm_json(physics)}, {"no_physics", arm_json(no_physics)}};
    return doc.dump(2) + "\n";
}

RunConfig desk_config(const DeskOptions& options) {
    RunConfig cfg;
    cfg.scenario.trajectory_count = 20;
    cfg.scenario.agents_min = 3;
    cfg.scenario.agents_max = 3;
    cfg.scenario.seed = options.data_seed;
    if (options.train_seed) {
        cfg.train.seed = *options.train_seed;
        cfg.train.model_seed = *options.train_seed;
    }
    if (options.epochs) cfg.train.epochs = *options.epochs;
    cfg.paths.output = options.out_dir;
    return cfg;
}

DeskReport reproduce_desk(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const DatasetFile dataset = generate_dataset(cfg);
    save_dataset(dataset, path_in(out_dir, "dataset.json"));

    DeskReport report;
    report.physics = run_arm(cfg, dataset, true, out_dir);
    report.no_physics = run_arm(cfg, dataset, false, out_dir);
    report.table = plot_runs(path_in(out_dir, "physics"), path_in(out_dir, "no-physics"), out_dir);
    write_text_file(path_in(out_dir, "summary.json"), report.summary_json());
    return report;
}

} // namespace orbitgraph
