#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "orbitgraph/checkpoint.hpp"
#include "orbitgraph/errors.hpp"
#include "orbitgraph/run_config.hpp"
#include "orbitgraph/scenario.hpp"

namespace orbitgraph {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(std::string(what) + ": cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text, const char* what) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(std::string(what) + ": cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error(std::string(what) + ": write failed for " + path);
}

json parse_document(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t end = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n');
        throw ParseError(std::string(what) + ": parse error at line " + std::to_string(line) +
                         ", byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

void check_version(const json& doc, int expected, const char* what) {
    if (!doc.is_object() || !doc.contains("schema_version")) {
        throw ParseError(std::string(what) + ": missing schema_version");
    }
    const json& v = doc.at("schema_version");
    if (!v.is_number_integer() || v.get<int>() != expected) {
        throw VersionError(std::string(what) + ": unsupported schema_version " + v.dump() +
                           " (expected " + std::to_string(expected) + ")");
    }
}

// Reads j[key] into out if present, with a field-qualified error on type mismatch.
// nlohmann converts -1 to a huge unsigned and 1.5 to 1 without complaint.
template <typename T>
bool exact_type(const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v.is_boolean();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
        return v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
        return v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
        return v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
        return v.is_string();
    } else {
        if (!v.is_array()) return false;
        return std::all_of(v.begin(), v.end(),
                           [](const json& e) { return exact_type<typename T::value_type>(e); });
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& prefix) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!exact_type<T>(v)) throw ConfigError(prefix + key, "wrong type: " + v.dump());
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (v.is_number_unsigned() &&
            v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) {
            throw ConfigError(prefix + key, "out of range: " + v.dump());
        }
    }
    out = v.get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& prefix) {
    if (!j.is_object()) {
        throw ConfigError(prefix.empty() ? "config" : prefix.substr(0, prefix.size() - 1),
                          "expected an object");
    }
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) throw ConfigError(prefix + key, "unknown field");
    }
}

json matrix_values(const Matrix& m) { return json(m.storage()); }

Matrix matrix_from(const json& shape, const json& values) {
    const auto rows = shape.at(0).get<std::size_t>();
    const auto cols = shape.at(1).get<std::size_t>();
    return Matrix(rows, cols, values.get<std::vector<double>>());
}

json row_json(const Matrix& row) { return json(row.storage()); }

Matrix row_from(const json& j, std::size_t width) {
    auto v = j.get<std::vector<double>>();
    if (v.size() != width) throw ParseError("checkpoint: standardizer row has wrong width");
    return Matrix(1, width, std::move(v));
}

json trajectory_json(const ScenarioTrajectory& t, const char* split) {
    json states = json::array();
    for (const auto& step : t.states) {
        json agents = json::array();
        for (const auto& s : step) agents.push_back(s.to_array());
        states.push_back(std::move(agents));
    }
    json adjacency = json::array();
    for (const auto& a : t.adjacency) {
        std::vector<int> flat;
        flat.reserve(a.size());
        for (double v : a.values()) flat.push_back(v != 0.0 ? 1 : 0);
        adjacency.push_back(std::move(flat));
    }
    return json{{"index", t.index},
                {"split", split},
                {"chief", {{"a", t.chief.a}, {"mu", t.chief.mu}, {"n", t.chief.n}}},
                {"dt", t.dt},
                {"sensing_range", t.sensing_range},
                {"states", std::move(states)},
                {"adjacency", std::move(adjacency)}};
}

ScenarioTrajectory trajectory_from(const json& j) {
    ScenarioTrajectory t;
    t.index = j.at("index").get<std::size_t>();
    const json& chief = j.at("chief");
    t.chief = {chief.at("a").get<double>(), chief.at("mu").get<double>(),
               chief.at("n").get<double>()};
    t.dt = j.at("dt").get<double>();
    t.sensing_range = j.value("sensing_range", 0.0);
    for (const auto& step : j.at("states")) {
        std::vector<RelativeState> agents;
        for (const auto& s : step) {
            agents.push_back(RelativeState::from_array(s.get<std::array<double, 6>>()));
        }
        t.states.push_back(std::move(agents));
    }
    const std::size_t n = t.agent_count();
    for (const auto& step : t.states) {
        if (step.size() != n) throw ParseError("dataset: agent count changes within trajectory");
    }
    for (const auto& flat : j.at("adjacency")) {
        const auto v = flat.get<std::vector<int>>();
        if (v.size() != n * n) throw ParseError("dataset: adjacency size does not match agents");
        Matrix a(n, n);
        for (std::size_t k = 0; k < v.size(); ++k) a[k] = v[k] != 0 ? 1.0 : 0.0;
        t.adjacency.push_back(std::move(a));
    }
    if (t.adjacency.size() != t.states.size()) {
        throw ParseError("dataset: adjacency and state step counts differ");
    }
    return t;
}

} // namespace

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

json to_json(const ScenarioConfig& c) {
    return json{{"chief_radius_min", c.chief_radius_min},
                {"chief_radius_max", c.chief_radius_max},
                {"agents_min", c.agents_min},
                {"agents_max", c.agents_max},
                {"dt", c.dt},
                {"step_count", c.step_count},
                {"target_edge_density", c.target_edge_density},
                {"relative_position_radius", c.relative_position_radius},
                {"velocity_noise_sigma", c.velocity_noise_sigma},
                {"seed", c.seed},
                {"planar", c.planar},
                {"mu", c.mu},
                {"trajectory_count", c.trajectory_count}};
}

json to_json(const ModelConfig& c) {
    return json{{"layer_dims", c.layer_dims},
                {"history", c.history},
                {"horizon", c.horizon},
                {"state_dim_out", c.state_dim_out}};
}

json to_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"epsilon", c.epsilon},
                {"ar_ratio_max", c.ar_ratio_max},
                {"ar_weight", c.ar_weight},
                {"grad_clip", c.grad_clip},
                {"seed", c.seed},
                {"model_seed", c.model_seed},
                {"checkpoint_every", c.checkpoint_every},
                {"ar_rebuild_graph", c.ar_rebuild_graph}};
}

json to_json(const LossConfig& c) {
    return json{{"lambda_p", c.lambda_p},
                {"lambda_v", c.lambda_v},
                {"lambda_phys_start", c.lambda_phys_start},
                {"lambda_phys_max", c.lambda_phys_max},
                {"physics_enabled", c.physics_enabled}};
}

json to_json(const RunConfig& c) {
    return json{{"scenario", to_json(c.scenario)},
                {"model", to_json(c.model)},
                {"train", to_json(c.train)},
                {"loss", to_json(c.loss)},
                {"split_seed", c.split_seed},
                {"paths",
                 {{"dataset", c.paths.dataset},
                  {"checkpoint", c.paths.checkpoint},
                  {"output", c.paths.output}}}};
}

void update_from_json(ScenarioConfig& c, const json& j, const std::string& prefix) {
    reject_unknown(j,
                   {"chief_radius_min", "chief_radius_max", "agents_min", "agents_max", "dt",
                    "step_count", "target_edge_density", "relative_position_radius",
                    "velocity_noise_sigma", "seed", "planar", "mu", "trajectory_count"},
                   prefix);
    read_field(j, "chief_radius_min", c.chief_radius_min, prefix);
    read_field(j, "chief_radius_max", c.chief_radius_max, prefix);
    read_field(j, "agents_min", c.agents_min, prefix);
    read_field(j, "agents_max", c.agents_max, prefix);
    read_field(j, "dt", c.dt, prefix);
    read_field(j, "step_count", c.step_count, prefix);
    read_field(j, "target_edge_density", c.target_edge_density, prefix);
    read_field(j, "relative_position_radius", c.relative_position_radius, prefix);
    read_field(j, "velocity_noise_sigma", c.velocity_noise_sigma, prefix);
    read_field(j, "seed", c.seed, prefix);
    read_field(j, "planar", c.planar, prefix);
    read_field(j, "mu", c.mu, prefix);
    read_field(j, "trajectory_count", c.trajectory_count, prefix);
}

void update_from_json(ModelConfig& c, const json& j, const std::string& prefix) {
    reject_unknown(j, {"layer_dims", "history", "horizon", "state_dim_out"}, prefix);
    read_field(j, "layer_dims", c.layer_dims, prefix);
    read_field(j, "history", c.history, prefix);
    read_field(j, "horizon", c.horizon, prefix);
    read_field(j, "state_dim_out", c.state_dim_out, prefix);
}

void update_from_json(TrainConfig& c, const json& j, const std::string& prefix) {
    reject_unknown(j,
                   {"epochs", "learning_rate", "beta1", "beta2", "epsilon", "ar_ratio_max",
                    "ar_weight", "grad_clip", "seed", "model_seed", "checkpoint_every",
                    "ar_rebuild_graph"},
                   prefix);
    read_field(j, "epochs", c.epochs, prefix);
    read_field(j, "learning_rate", c.learning_rate, prefix);
    read_field(j, "beta1", c.beta1, prefix);
    read_field(j, "beta2", c.beta2, prefix);
    read_field(j, "epsilon", c.epsilon, prefix);
    read_field(j, "ar_ratio_max", c.ar_ratio_max, prefix);
    read_field(j, "ar_weight", c.ar_weight, prefix);
    read_field(j, "grad_clip", c.grad_clip, prefix);
    read_field(j, "seed", c.seed, prefix);
    read_field(j, "model_seed", c.model_seed, prefix);
    read_field(j, "checkpoint_every", c.checkpoint_every, prefix);
    read_field(j, "ar_rebuild_graph", c.ar_rebuild_graph, prefix);
}

void update_from_json(LossConfig& c, const json& j, const std::string& prefix) {
    reject_unknown(j,
                   {"lambda_p", "lambda_v", "lambda_phys_start", "lambda_phys_max",
                    "physics_enabled"},
                   prefix);
    read_field(j, "lambda_p", c.lambda_p, prefix);
    read_field(j, "lambda_v", c.lambda_v, prefix);
    read_field(j, "lambda_phys_start", c.lambda_phys_start, prefix);
    read_field(j, "lambda_phys_max", c.lambda_phys_max, prefix);
    read_field(j, "physics_enabled", c.physics_enabled, prefix);
}

void update_from_json(RunConfig& c, const json& j) {
    reject_unknown(j, {"scenario", "model", "train", "loss", "paths", "split_seed"}, "");
    if (j.contains("scenario")) update_from_json(c.scenario, j.at("scenario"), "scenario.");
    if (j.contains("model")) update_from_json(c.model, j.at("model"), "model.");
    if (j.contains("train")) update_from_json(c.train, j.at("train"), "train.");
    if (j.contains("loss")) update_from_json(c.loss, j.at("loss"), "loss.");
    read_field(j, "split_seed", c.split_seed, "");
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        reject_unknown(p, {"dataset", "checkpoint", "output"}, "paths.");
        read_field(p, "dataset", c.paths.dataset, "paths.");
        read_field(p, "checkpoint", c.paths.checkpoint, "paths.");
        read_field(p, "output", c.paths.output, "paths.");
    }
}

void RunConfig::validate() const {
    auto qualify = [](const char* prefix, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(prefix) + e.field(),
                              std::string(e.what()).substr(e.field().size() + 2));
        }
    };
    qualify("scenario.", [&] { scenario.validate(); });
    qualify("model.", [&] { model.validate(); });
    qualify("train.", [&] { train.validate(); });
    qualify("loss.", [&] { loss.validate(); });
    if (static_cast<std::size_t>(scenario.step_count) < model.history + model.horizon) {
        throw ConfigError("scenario.step_count", "shorter than model history + horizon");
    }
}

RunConfig load_run_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path, "config");
    } catch (const std::runtime_error& e) {
        throw ConfigError("--config", e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config", "parse error at byte " + std::to_string(e.byte));
    }
    RunConfig cfg;
    update_from_json(cfg, j);
    return cfg;
}

// ---------------------------------------------------------------------------
// Dataset file
// ---------------------------------------------------------------------------

std::string dataset_to_string(const DatasetFile& dataset) {
    json trajectories = json::array();
    for (const auto& t : dataset.split.train) trajectories.push_back(trajectory_json(t, "train"));
    for (const auto& t : dataset.split.validation) {
        trajectories.push_back(trajectory_json(t, "validation"));
    }
    for (const auto& t : dataset.split.test) trajectories.push_back(trajectory_json(t, "test"));
    const json doc{{"schema_version", kDatasetSchemaVersion},
                   {"config", to_json(dataset.config)},
                   {"trajectories", std::move(trajectories)}};
    return doc.dump() + "\n";
}

void save_dataset(const DatasetFile& dataset, const std::string& path) {
    write_file(path, dataset_to_string(dataset), "save_dataset");
}

DatasetFile dataset_from_string(const std::string& text) {
    const json doc = parse_document(text, "dataset");
    check_version(doc, kDatasetSchemaVersion, "dataset");
    try {
        DatasetFile out;
        update_from_json(out.config, doc.at("config"), "config.");
        for (const auto& tj : doc.at("trajectories")) {
            const auto split = tj.at("split").get<std::string>();
            ScenarioTrajectory t = trajectory_from(tj);
            if (split == "train") {
                out.split.train.push_back(std::move(t));
            } else if (split == "validation") {
                out.split.validation.push_back(std::move(t));
            } else if (split == "test") {
                out.split.test.push_back(std::move(t));
            } else {
                throw ParseError("dataset: unknown split '" + split + "'");
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw ParseError(std::string("dataset: malformed content: ") + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(std::string("dataset: invalid config: ") + e.what());
    }
}

DatasetFile load_dataset(const std::string& path) {
    return dataset_from_string(read_file(path, "load_dataset"));
}

// ---------------------------------------------------------------------------
// Checkpoint file
// ---------------------------------------------------------------------------

std::string checkpoint_to_string(const Checkpoint& ckpt) {
    const auto& model = ckpt.model;
    json params = json::array();
    const auto names = model.params.names();
    const auto tensors = model.params.tensors();
    for (std::size_t i = 0; i < names.size(); ++i) {
        params.push_back({{"name", names[i]},
                          {"shape", {tensors[i]->rows(), tensors[i]->cols()}},
                          {"values", matrix_values(*tensors[i])}});
    }
    const auto& st = model.standardizer;
    const json doc{{"schema_version", kCheckpointSchemaVersion},
                   {"label", ckpt.label},
                   {"epoch", ckpt.epoch},
                   {"model_config", to_json(model.config)},
                   {"standardizer",
                    {{"feature_mean", row_json(st.feature_mean)},
                     {"feature_scale", row_json(st.feature_scale)},
                     {"state_mean", row_json(st.state_mean)},
                     {"state_scale", row_json(st.state_scale)}}},
                   {"parameters", std::move(params)}};
    return doc.dump() + "\n";
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    write_file(path, checkpoint_to_string(ckpt), "save_checkpoint");
}

Checkpoint checkpoint_from_string(const std::string& text) {
    const json doc = parse_document(text, "checkpoint");
    check_version(doc, kCheckpointSchemaVersion, "checkpoint");
    try {
        Checkpoint ckpt;
        ckpt.label = doc.value("label", std::string{});
        ckpt.epoch = doc.value("epoch", std::size_t{0});
        update_from_json(ckpt.model.config, doc.at("model_config"), "model_config.");
        ckpt.model.config.validate();

        const json& st = doc.at("standardizer");
        ckpt.model.standardizer = {row_from(st.at("feature_mean"), kFeatureWidth),
                                   row_from(st.at("feature_scale"), kFeatureWidth),
                                   row_from(st.at("state_mean"), kStateDim),
                                   row_from(st.at("state_scale"), kStateDim)};

        // Allocate with the right shapes, then fill by name.
        ckpt.model.params = init_params(ckpt.model.config, 0);
        const auto names = ckpt.model.params.names();
        auto tensors = ckpt.model.params.tensors();
        const json& params = doc.at("parameters");
        if (params.size() != names.size()) {
            throw ParseError("checkpoint: expected " + std::to_string(names.size()) +
                             " parameter tensors, found " + std::to_string(params.size()));
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            const json& p = params.at(i);
            if (p.at("name").get<std::string>() != names[i]) {
                throw ParseError("checkpoint: parameter " + std::to_string(i) + " is '" +
                                 p.at("name").get<std::string>() + "', expected '" + names[i] + "'");
            }
            Matrix m = matrix_from(p.at("shape"), p.at("values"));
            if (!m.same_shape(*tensors[i])) {
                throw ParseError("checkpoint: " + names[i] + " has shape " + m.shape_string() +
                                 ", model_config implies " + tensors[i]->shape_string());
            }
            *tensors[i] = std::move(m);
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: malformed content: ") + e.what());
    } catch (const DimensionError& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(std::string("checkpoint: invalid model_config: ") + e.what());
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    return checkpoint_from_string(read_file(path, "load_checkpoint"));
}

} // namespace orbitgraph
