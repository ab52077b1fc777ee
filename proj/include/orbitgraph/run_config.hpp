#pragma once

#include <string>

#include <json.hpp>

#include "orbitgraph/egcn.hpp"
#include "orbitgraph/physics_loss.hpp"
#include "orbitgraph/scenario.hpp"
#include "orbitgraph/training.hpp"

namespace orbitgraph {

struct RunPaths {
    std::string dataset = "dataset.json";
    std::string checkpoint = "checkpoint_best.json";
    std::string output = "out";

    friend bool operator==(const RunPaths&, const RunPaths&) = default;
};

/// Everything a run needs; reproducible from this plus its seeds.
struct RunConfig {
    ScenarioConfig scenario;
    ModelConfig model;
    TrainConfig train;
    LossConfig loss;
    RunPaths paths;
    std::uint64_t split_seed = 7;

    void validate() const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json to_json(const ScenarioConfig& cfg);
nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const LossConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

// Missing keys keep their defaults; unknown keys and wrong types throw
// ConfigError naming the field (e.g. "train.epochs").
void update_from_json(ScenarioConfig& cfg, const nlohmann::json& j, const std::string& prefix = "");
void update_from_json(ModelConfig& cfg, const nlohmann::json& j, const std::string& prefix = "");
void update_from_json(TrainConfig& cfg, const nlohmann::json& j, const std::string& prefix = "");
void update_from_json(LossConfig& cfg, const nlohmann::json& j, const std::string& prefix = "");
void update_from_json(RunConfig& cfg, const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);

} // namespace orbitgraph
