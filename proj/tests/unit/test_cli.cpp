#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "orbitgraph/checkpoint.hpp"
#include "orbitgraph/evaluation.hpp"
#include "orbitgraph/pipeline.hpp"

using namespace orbitgraph;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "orbitgraph_cli_test";

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run cli(const std::string& args) {
    const fs::path out = kRoot / "stdout.txt";
    const fs::path err = kRoot / "stderr.txt";
    fs::create_directories(kRoot);
    const std::string cmd = std::string(ORBITGRAPH_CLI) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out.string());
    r.err = read_text_file(err.string());
    return r;
}

std::string p(const std::string& name) { return (kRoot / name).string(); }

// Small model and schedule so training takes a second or two.
void write_small_config(const std::string& path, std::size_t horizon = 6) {
    RunConfig cfg;
    cfg.model.layer_dims = {kFeatureWidth, 6, 6};
    cfg.model.horizon = horizon;
    cfg.scenario.step_count = 30;
    write_text_file(path, to_json(cfg).dump(2));
}

// Drops the trailing seconds column of every log line.
std::string without_seconds(const std::string& log) {
    std::istringstream in(log);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
    return out;
}

std::size_t line_count(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

struct Fixture {
    Fixture() {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
    }
};

// Generated once and shared by the later cases.
void ensure_small_dataset() {
    if (fs::exists(p("small.json"))) return;
    write_small_config(p("small_cfg.json"));
    const auto r = cli("generate --config " + p("small_cfg.json") +
                       " --trajectories 8 --agents 3 3 --seed 4 --out " + p("small.json"));
    REQUIRE(r.code == 0);
}

void ensure_trained() {
    ensure_small_dataset();
    if (fs::exists(p("run_on/checkpoint_best.json"))) return;
    const std::string base = "train --config " + p("small_cfg.json") + " --dataset " +
                             p("small.json") + " --epochs 3 --seed 9";
    REQUIRE(cli(base + " --physics on --out " + p("run_on")).code == 0);
    REQUIRE(cli(base + " --physics off --out " + p("run_off")).code == 0);
}

const Fixture fixture;

} // namespace

TEST_CASE("generate with defaults honours counts and density") {
    const auto r = cli("generate --out " + p("default.json"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("trajectories: 100") != std::string::npos);
    CHECK(r.out.find("mean step-0 edge density") != std::string::npos);
    const DatasetFile d = load_dataset(p("default.json"));
    CHECK(d.split.total() == 100);
    CHECK(d.split.train.size() == 70);
    CHECK(d.split.validation.size() == 20);
    CHECK(d.split.test.size() == 10);
    const auto summary = summarize_dataset(d);
    for (const auto& [agents, count] : summary.agent_histogram) {
        CHECK(agents >= 3);
        CHECK(agents <= 8);
    }
    CHECK(summary.mean_initial_density >= 0.6);
    fs::remove(p("default.json"));
}

TEST_CASE("generate flag overrides") {
    const auto r = cli("generate --trajectories 20 --agents 3 3 --seed 2 --jobs 1 --out " + p("g20.json"));
    REQUIRE(r.code == 0);
    const DatasetFile d = load_dataset(p("g20.json"));
    CHECK(d.split.total() == 20);
    CHECK(d.config.seed == 2);
    const auto hist = summarize_dataset(d).agent_histogram;
    REQUIRE(hist.size() == 1);
    CHECK(hist.begin()->first == 3);
    CHECK(hist.begin()->second == 20);

    // Same seed, same bytes.
    REQUIRE(cli("generate --trajectories 20 --agents 3 3 --seed 2 --out " + p("g20b.json")).code == 0);
    CHECK(read_text_file(p("g20.json")) == read_text_file(p("g20b.json")));
}

TEST_CASE("invalid configs exit 2 naming the field") {
    write_text_file(p("bad_type.json"), R"({"scenario": {"agents_min": "three"}})");
    auto r = cli("generate --config " + p("bad_type.json") + " --out " + p("x.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("scenario.agents_min") != std::string::npos);

    write_text_file(p("bad_range.json"), R"({"scenario": {"agents_min": 5, "agents_max": 4}})");
    r = cli("generate --config " + p("bad_range.json") + " --out " + p("x.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("agents_max") != std::string::npos);

    write_text_file(p("unknown.json"), R"({"train": {"epochz": 3}})");
    r = cli("train --config " + p("unknown.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("train.epochz") != std::string::npos);

    CHECK(cli("generate --config " + p("absent.json")).code == 2);
    CHECK(cli("generate --agents 3").code == 2);
    CHECK(cli("train --physics maybe").code == 2);
    CHECK(cli("bogus").code == 2);
    CHECK(cli("").code == 2);
    CHECK(!fs::exists(p("x.json")));
}

TEST_CASE("train without a dataset exits 2") {
    const auto r = cli("train --dataset " + p("missing.json") + " --out " + p("nowhere"));
    CHECK(r.code == 2);
    CHECK(r.err.find("--dataset") != std::string::npos);
}

TEST_CASE("train log has one row per epoch and reruns identically") {
    ensure_trained();
    const std::string log = read_text_file(p("run_on/train_log.csv"));
    CHECK(line_count(log) == 3 + 1);
    CHECK(log.rfind("epoch,train_loss,val_loss,lambda_phys,ar_ratio,seconds\n", 0) == 0);

    const auto r = cli("train --config " + p("small_cfg.json") + " --dataset " + p("small.json") +
                       " --epochs 3 --seed 9 --physics on --out " + p("run_on_again"));
    REQUIRE(r.code == 0);
    CHECK(without_seconds(read_text_file(p("run_on_again/train_log.csv"))) == without_seconds(log));
    CHECK(read_text_file(p("run_on_again/checkpoint_best.json")) ==
          read_text_file(p("run_on/checkpoint_best.json")));
}

TEST_CASE("physics off and on differ only through the loss arm") {
    ensure_trained();
    const Checkpoint on = load_checkpoint(p("run_on/checkpoint_best.json"));
    const Checkpoint off = load_checkpoint(p("run_off/checkpoint_best.json"));
    CHECK(on.label == "physics");
    CHECK(off.label == "no-physics");
    CHECK(on.model.config == off.model.config);
    CHECK(on.model.standardizer == off.model.standardizer);
    CHECK_FALSE(on.model.params == off.model.params);

    // The no-physics log pins lambda to zero.
    std::istringstream in(read_text_file(p("run_off/train_log.csv")));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto c3 = line.find(',', line.find(',', line.find(',') + 1) + 1);
        CHECK(std::stod(line.substr(c3 + 1)) == 0.0);
    }
}

TEST_CASE("evaluate writes metrics and rejects mismatched configs") {
    ensure_trained();
    auto r = cli("evaluate --checkpoint " + p("run_on/checkpoint_best.json") + " --dataset " +
                 p("small.json") + " --out " + p("eval_on"));
    REQUIRE(r.code == 0);
    const RunMetrics m = parse_metrics_csv(read_text_file(p("eval_on/metrics.csv")));
    CHECK(m.label == "physics");
    CHECK(m.rows.size() == 9);
    for (const auto& row : m.rows) CHECK(row.rmse >= 0.0);
    CHECK(parse_curve_csv(read_text_file(p("eval_on/curve.csv"))).rmse.size() == 6);
    CHECK(r.out.find("satellite,axis,rmse_km,run_label") != std::string::npos);

    write_small_config(p("h5.json"), 5);
    r = cli("evaluate --config " + p("h5.json") + " --checkpoint " + p("run_on/checkpoint_best.json") +
            " --dataset " + p("small.json") + " --out " + p("eval_bad"));
    CHECK(r.code == 2);
    CHECK(r.err.find("model.horizon") != std::string::npos);

    // A dataset too short for the checkpoint's history + horizon.
    r = cli("generate --trajectories 3 --agents 3 3 --out " + p("short.json"));
    REQUIRE(r.code == 0);
    RunConfig long_horizon;
    long_horizon.model.layer_dims = {kFeatureWidth, 4, 4};
    long_horizon.model.horizon = 120;
    Checkpoint ckpt;
    ckpt.model.config = long_horizon.model;
    ckpt.model.params = init_params(ckpt.model.config, 1);
    ckpt.model.standardizer = Standardizer::identity();
    ckpt.label = "x";
    save_checkpoint(ckpt, p("long.json"));
    r = cli("evaluate --checkpoint " + p("long.json") + " --dataset " + p("short.json") + " --out " +
            p("eval_bad"));
    CHECK(r.code == 2);
    CHECK(r.err.find("model.horizon") != std::string::npos);

    CHECK(cli("evaluate --checkpoint " + p("none.json") + " --dataset " + p("small.json")).code == 2);
}

TEST_CASE("predict emits the figure set and rejects unknown trajectories") {
    ensure_trained();
    const DatasetFile d = load_dataset(p("small.json"));
    const std::size_t index = d.split.test.front().index;
    const std::string base = "predict --checkpoint " + p("run_on/checkpoint_best.json") +
                             " --dataset " + p("small.json") + " --trajectory " + std::to_string(index);
    REQUIRE(cli(base + " --out " + p("pred_a")).code == 0);
    REQUIRE(cli(base + " --out " + p("pred_b")).code == 0);
    std::size_t svgs = 0;
    for (const auto& e : fs::directory_iterator(p("pred_a"))) {
        svgs += e.path().extension() == ".svg";
        CHECK(read_text_file(e.path().string()) ==
              read_text_file((fs::path(p("pred_b")) / e.path().filename()).string()));
    }
    CHECK(svgs == 4);

    const auto r = cli("predict --checkpoint " + p("run_on/checkpoint_best.json") + " --dataset " +
                       p("small.json") + " --trajectory 999 --out " + p("pred_c"));
    CHECK(r.code == 2);
    CHECK(r.err.find("--trajectory") != std::string::npos);
}

TEST_CASE("plot of identical runs gives identical columns") {
    ensure_trained();
    const std::string eval = "evaluate --checkpoint " + p("run_off/checkpoint_best.json") +
                             " --dataset " + p("small.json") + " --out ";
    REQUIRE(cli(eval + p("same_a")).code == 0);
    REQUIRE(cli(eval + p("same_b")).code == 0);
    CHECK(read_text_file(p("same_a/metrics.csv")) == read_text_file(p("same_b/metrics.csv")));
    REQUIRE(cli("plot " + p("same_a") + " " + p("same_b") + " --out " + p("plot_same")).code == 0);
    std::istringstream in(read_text_file(p("plot_same/comparison.csv")));
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        const auto c1 = line.find(',', line.find(',') + 1);
        const auto c2 = line.find(',', c1 + 1);
        CHECK(line.substr(c1 + 1, c2 - c1 - 1) == line.substr(c2 + 1));
        ++rows;
    }
    CHECK(rows == 9);

    // Physics against no-physics; rerunning gives the same bytes.
    REQUIRE(cli("evaluate --checkpoint " + p("run_on/checkpoint_best.json") + " --dataset " +
                p("small.json") + " --out " + p("cmp_on")).code == 0);
    REQUIRE(cli("plot " + p("cmp_on") + " " + p("same_a") + " --out " + p("plot_1")).code == 0);
    REQUIRE(cli("plot " + p("cmp_on") + " " + p("same_a") + " --out " + p("plot_2")).code == 0);
    CHECK(read_text_file(p("plot_1/comparison.txt")) == read_text_file(p("plot_2/comparison.txt")));
    CHECK(read_text_file(p("plot_1/comparison.txt")).find("Sat 3") != std::string::npos);

    CHECK(cli("plot " + p("cmp_on") + " " + p("nothing_here")).code == 2);
}

TEST_CASE("ORBITGRAPH_LOG controls verbosity") {
    ensure_small_dataset();
    const std::string cmd = "train --config " + p("small_cfg.json") + " --dataset " + p("small.json") +
                            " --epochs 1 --out " + p("log_run");
    const auto quiet = cli(cmd);
    REQUIRE(quiet.code == 0);
    setenv("ORBITGRAPH_LOG", "debug", 1);
    const auto loud = cli(cmd);
    unsetenv("ORBITGRAPH_LOG");
    REQUIRE(loud.code == 0);
    CHECK(loud.err.size() > quiet.err.size());
}
