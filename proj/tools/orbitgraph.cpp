// orbitgraph command-line entry point.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <omp.h>

#include <CLI11.hpp>

#include "orbitgraph/errors.hpp"
#include "orbitgraph/log.hpp"
#include "orbitgraph/pipeline.hpp"

namespace og = orbitgraph;
namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& seed_help, const std::string& out_help) {
    cmd->add_option("--config", c.config, "RunConfig JSON; flags override its fields");
    cmd->add_option("--seed", c.seed, seed_help);
    cmd->add_option("--jobs", c.jobs, "worker threads for generation and evaluation")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, out_help);
}

og::RunConfig base_config(const Common& c) {
    og::RunConfig cfg;
    if (!c.config.empty()) {
        if (!fs::exists(c.config)) throw og::ConfigError("--config", "file not found: " + c.config);
        cfg = og::load_run_config(c.config);
    }
    return cfg;
}

og::DatasetFile open_dataset(const std::string& path) {
    if (!fs::exists(path)) throw og::ConfigError("--dataset", "file not found: " + path);
    return og::load_dataset(path);
}

og::Checkpoint open_checkpoint(const std::string& path) {
    if (!fs::exists(path)) throw og::ConfigError("--checkpoint", "file not found: " + path);
    return og::load_checkpoint(path);
}

// A --config model section, when given, must describe the checkpoint.
void check_model_matches(const Common& c, const og::Checkpoint& ckpt) {
    if (c.config.empty()) return;
    const og::ModelConfig want = base_config(c).model;
    const og::ModelConfig& have = ckpt.model.config;
    if (want.layer_dims != have.layer_dims) {
        throw og::ConfigError("model.layer_dims", "config does not match the checkpoint");
    }
    if (want.history != have.history) {
        throw og::ConfigError("model.history", "config does not match the checkpoint");
    }
    if (want.horizon != have.horizon) {
        throw og::ConfigError("model.horizon", "config does not match the checkpoint");
    }
    if (want.state_dim_out != have.state_dim_out) {
        throw og::ConfigError("model.state_dim_out", "config does not match the checkpoint");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-informed EvolveGCN forecasting of satellite relative motion"};
    app.require_subcommand(1);

    // generate
    Common gen;
    std::optional<std::size_t> gen_count;
    std::vector<int> gen_agents;
    bool gen_planar = false;
    auto* generate = app.add_subcommand("generate", "sample CW constellations and write a dataset");
    add_common(generate, gen, "scenario seed", "dataset path (default paths.dataset)");
    generate->add_option("--trajectories", gen_count, "number of trajectories");
    generate->add_option("--agents", gen_agents, "agent count range MIN MAX")->expected(2);
    generate->add_flag("--planar", gen_planar, "zero cross-track position and velocity");

    // train
    Common tr;
    std::string tr_dataset;
    std::string tr_physics = "on";
    std::optional<std::size_t> tr_epochs;
    std::string tr_label;
    auto* train = app.add_subcommand("train", "fit a model and write checkpoints");
    add_common(train, tr, "training seed (shuffle, AR selection, initialization)",
               "output directory (default paths.output)");
    train->add_option("--dataset", tr_dataset, "dataset path (default paths.dataset)");
    train->add_option("--physics", tr_physics, "physics loss arm")
        ->check(CLI::IsMember({"on", "off"}));
    train->add_option("--epochs", tr_epochs, "number of epochs");
    train->add_option("--label", tr_label, "run label (default physics / no-physics)");

    // evaluate
    Common ev;
    std::string ev_checkpoint;
    std::string ev_dataset;
    bool ev_ar = false;
    auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    add_common(evaluate, ev, "unused", "output directory (default paths.output)");
    evaluate->add_option("--checkpoint", ev_checkpoint, "checkpoint path")->required();
    evaluate->add_option("--dataset", ev_dataset, "dataset path (default paths.dataset)");
    evaluate->add_flag("--autoregressive", ev_ar, "feed predictions back into later windows");

    // predict
    Common pr;
    std::string pr_checkpoint;
    std::string pr_dataset;
    std::size_t pr_index = 0;
    auto* predict = app.add_subcommand("predict", "prediction CSVs and plots for one trajectory");
    add_common(predict, pr, "unused", "output directory (default paths.output)");
    predict->add_option("--checkpoint", pr_checkpoint, "checkpoint path")->required();
    predict->add_option("--dataset", pr_dataset, "dataset path (default paths.dataset)");
    predict->add_option("--trajectory", pr_index, "trajectory index")->required();

    // plot
    Common pl;
    std::vector<std::string> pl_runs;
    auto* plot = app.add_subcommand("plot", "merge two evaluated runs into a comparison table");
    add_common(plot, pl, "unused", "output directory (default .)");
    plot->add_option("runs", pl_runs, "two run directories holding metrics.csv and curve.csv")
        ->expected(2)
        ->required();

    // reproduce-desk
    Common desk;
    std::optional<std::uint64_t> desk_train_seed;
    std::optional<std::size_t> desk_epochs;
    auto* reproduce = app.add_subcommand(
        "reproduce-desk", "20-trajectory, 3-agent pipeline: both loss arms, comparison table");
    add_common(reproduce, desk, "dataset seed", "output directory (default desk)");
    reproduce->add_option("--train-seed", desk_train_seed, "training and initialization seed");
    reproduce->add_option("--epochs", desk_epochs, "number of epochs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (generate->parsed()) {
            omp_set_num_threads(gen.jobs);
            og::RunConfig cfg = base_config(gen);
            if (gen.seed) cfg.scenario.seed = *gen.seed;
            if (gen_count) cfg.scenario.trajectory_count = *gen_count;
            if (!gen_agents.empty()) {
                cfg.scenario.agents_min = gen_agents[0];
                cfg.scenario.agents_max = gen_agents[1];
            }
            if (gen_planar) cfg.scenario.planar = true;
            const std::string out = gen.out.empty() ? cfg.paths.dataset : gen.out;
            const og::DatasetFile dataset = og::generate_dataset(cfg);
            og::save_dataset(dataset, out);
            std::cout << og::summarize_dataset(dataset).to_string() << "wrote " << out << '\n';
        } else if (train->parsed()) {
            omp_set_num_threads(tr.jobs);
            og::RunConfig cfg = base_config(tr);
            if (tr.seed) {
                cfg.train.seed = *tr.seed;
                cfg.train.model_seed = *tr.seed;
            }
            if (tr_epochs) cfg.train.epochs = *tr_epochs;
            cfg.loss.physics_enabled = tr_physics == "on";
            cfg.validate();
            const std::string out = tr.out.empty() ? cfg.paths.output : tr.out;
            const og::DatasetFile dataset =
                open_dataset(tr_dataset.empty() ? cfg.paths.dataset : tr_dataset);
            const std::string label =
                !tr_label.empty() ? tr_label : (cfg.loss.physics_enabled ? "physics" : "no-physics");
            const auto result = og::train_run(cfg, dataset, out, label);
            const auto& best = result.fit.reports.at(result.fit.best_epoch);
            std::cout << "best epoch " << best.epoch << " val_loss " << best.val_loss << '\n'
                      << "wrote " << result.checkpoint_path << " and " << result.log_path << '\n';
        } else if (evaluate->parsed()) {
            omp_set_num_threads(ev.jobs);
            const og::RunConfig cfg = base_config(ev);
            const og::Checkpoint ckpt = open_checkpoint(ev_checkpoint);
            check_model_matches(ev, ckpt);
            const og::DatasetFile dataset =
                open_dataset(ev_dataset.empty() ? cfg.paths.dataset : ev_dataset);
            const std::string out = ev.out.empty() ? cfg.paths.output : ev.out;
            const auto result = og::evaluate_run(ckpt, dataset, out, ev_ar);
            std::cout << og::metrics_csv(result.metrics) << og::curve_csv(result.curve);
        } else if (predict->parsed()) {
            omp_set_num_threads(pr.jobs);
            const og::RunConfig cfg = base_config(pr);
            const og::Checkpoint ckpt = open_checkpoint(pr_checkpoint);
            check_model_matches(pr, ckpt);
            const og::DatasetFile dataset =
                open_dataset(pr_dataset.empty() ? cfg.paths.dataset : pr_dataset);
            const std::string out = pr.out.empty() ? cfg.paths.output : pr.out;
            for (const auto& path : og::predict_run(ckpt, dataset, pr_index, out)) {
                std::cout << "wrote " << path << '\n';
            }
        } else if (plot->parsed()) {
            for (const auto& dir : pl_runs) {
                if (!fs::exists(fs::path(dir) / "metrics.csv")) {
                    throw og::ConfigError("runs", "no metrics.csv in " + dir);
                }
            }
            const auto table = og::plot_runs(pl_runs[0], pl_runs[1], pl.out.empty() ? "." : pl.out);
            std::cout << table.text;
        } else if (reproduce->parsed()) {
            omp_set_num_threads(desk.jobs);
            og::DeskOptions opts;
            if (desk.seed) opts.data_seed = *desk.seed;
            opts.train_seed = desk_train_seed;
            opts.epochs = desk_epochs;
            if (!desk.out.empty()) opts.out_dir = desk.out;
            og::RunConfig cfg = og::desk_config(opts);
            if (!desk.config.empty()) {
                // File values apply first, then the desk flags.
                cfg = base_config(desk);
                const og::RunConfig flags = og::desk_config(opts);
                if (desk.seed) cfg.scenario.seed = flags.scenario.seed;
                if (desk_train_seed) {
                    cfg.train.seed = flags.train.seed;
                    cfg.train.model_seed = flags.train.model_seed;
                }
                if (desk_epochs) cfg.train.epochs = flags.train.epochs;
            }
            const std::string out = opts.out_dir;
            const auto report = og::reproduce_desk(cfg, out);
            std::cout << report.table.text << "wrote " << out << '\n';
        }
    } catch (const og::ConfigError& e) {
        std::cerr << "orbitgraph: config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "orbitgraph: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
