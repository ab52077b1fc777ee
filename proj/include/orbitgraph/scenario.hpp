#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orbitgraph/cw.hpp"
#include "orbitgraph/graph.hpp"
#include "orbitgraph/matrix.hpp"

namespace orbitgraph {

inline constexpr int kMinTrajectorySteps = 14;  // history + horizon

struct ScenarioConfig {
    double chief_radius_min = 6880.0;   // km
    double chief_radius_max = 7800.0;   // km
    int agents_min = 3;
    int agents_max = 8;
    double dt = 60.0;                   // s
    int step_count = 120;
    double target_edge_density = 0.6;
    double relative_position_radius = 5.0;   // km
    double velocity_noise_sigma = 1e-3;      // km/s
    std::uint64_t seed = 1;
    bool planar = false;
    double mu = kEarthMu;
    int trajectory_count = 100;

    // Throws ConfigError naming the first invalid field.
    void validate() const;

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct ScenarioTrajectory {
    std::size_t index = 0;
    ChiefOrbit chief;
    double dt = 0.0;
    double sensing_range = 0.0;
    std::vector<std::vector<RelativeState>> states;  // [step][agent]
    std::vector<Matrix> adjacency;                   // [step]

    std::size_t step_count() const { return states.size(); }
    std::size_t agent_count() const { return states.empty() ? 0 : states.front().size(); }
    std::vector<Vec3> positions_at(std::size_t step) const;

    friend bool operator==(const ScenarioTrajectory&, const ScenarioTrajectory&) = default;
};

struct DatasetSplit {
    std::vector<ScenarioTrajectory> train;
    std::vector<ScenarioTrajectory> validation;
    std::vector<ScenarioTrajectory> test;

    std::size_t total() const { return train.size() + validation.size() + test.size(); }
    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct SplitRatios {
    double train = 0.7;
    double validation = 0.2;
    double test = 0.1;
};

// Deterministic in (cfg.seed, index).
ScenarioTrajectory sample_scenario(const ScenarioConfig& cfg, std::size_t index);

// cfg.trajectory_count scenarios, one OpenMP task per index.
std::vector<ScenarioTrajectory> generate_trajectories(const ScenarioConfig& cfg);
// Reference loop for generate_trajectories.
std::vector<ScenarioTrajectory> generate_trajectories_serial(const ScenarioConfig& cfg);

/**
 * Seeded shuffle then partition. Validation and test sizes are rounded to
 * nearest, train takes the remainder. Fewer than 3 trajectories all go to
 * train (with a warning).
 */
DatasetSplit split_dataset(std::vector<ScenarioTrajectory> trajectories, const SplitRatios& ratios,
                           std::uint64_t seed);

struct DatasetFile {
    ScenarioConfig config;
    DatasetSplit split;

    friend bool operator==(const DatasetFile&, const DatasetFile&) = default;
};

inline constexpr int kDatasetSchemaVersion = 1;

void save_dataset(const DatasetFile& dataset, const std::string& path);
std::string dataset_to_string(const DatasetFile& dataset);
// Throws ParseError (with byte/line context) or VersionError.
DatasetFile load_dataset(const std::string& path);
DatasetFile dataset_from_string(const std::string& text);

} // namespace orbitgraph
