#include "orbitgraph/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "orbitgraph/errors.hpp"
#include "orbitgraph/log.hpp"

namespace orbitgraph {
namespace {

std::mt19937_64 scenario_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x6f726269u};
    return std::mt19937_64(seq);
}

Vec3 sample_ball(std::mt19937_64& rng, double radius, bool planar) {
    std::uniform_real_distribution<double> u(-radius, radius);
    for (;;) {
        Vec3 p{u(rng), u(rng), planar ? 0.0 : u(rng)};
        if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= radius * radius) return p;
    }
}

} // namespace

void ScenarioConfig::validate() const {
    if (!(chief_radius_min > 0.0)) throw ConfigError("chief_radius_min", "must be positive");
    if (!(chief_radius_max >= chief_radius_min)) {
        throw ConfigError("chief_radius_max", "must be >= chief_radius_min");
    }
    if (agents_min < 1) throw ConfigError("agents_min", "must be at least 1");
    if (agents_max < agents_min) throw ConfigError("agents_max", "must be >= agents_min");
    if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");
    if (step_count < kMinTrajectorySteps) {
        throw ConfigError("step_count", "must be at least " + std::to_string(kMinTrajectorySteps));
    }
    if (!(target_edge_density > 0.0 && target_edge_density <= 1.0)) {
        throw ConfigError("target_edge_density", "must lie in (0, 1]");
    }
    if (!(relative_position_radius > 0.0)) {
        throw ConfigError("relative_position_radius", "must be positive");
    }
    if (!(velocity_noise_sigma >= 0.0)) {
        throw ConfigError("velocity_noise_sigma", "must be non-negative");
    }
    if (!(mu > 0.0)) throw ConfigError("mu", "must be positive");
    if (trajectory_count < 1) throw ConfigError("trajectory_count", "must be at least 1");
}

std::vector<Vec3> ScenarioTrajectory::positions_at(std::size_t step) const {
    std::vector<Vec3> p;
    p.reserve(states.at(step).size());
    for (const auto& s : states[step]) p.push_back(s.position());
    return p;
}

ScenarioTrajectory sample_scenario(const ScenarioConfig& cfg, std::size_t index) {
    cfg.validate();
    auto rng = scenario_rng(cfg.seed, index);

    std::uniform_real_distribution<double> radius_dist(cfg.chief_radius_min, cfg.chief_radius_max);
    const double radius =
        cfg.chief_radius_min == cfg.chief_radius_max ? cfg.chief_radius_min : radius_dist(rng);
    std::uniform_int_distribution<int> agent_dist(cfg.agents_min, cfg.agents_max);
    const auto agents = static_cast<std::size_t>(agent_dist(rng));

    ScenarioTrajectory traj;
    traj.index = index;
    traj.chief = ChiefOrbit::circular(radius, cfg.mu);
    traj.dt = cfg.dt;
    const double n = traj.chief.n;

    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<RelativeState> initial(agents);
    for (auto& s : initial) {
        const Vec3 p = sample_ball(rng, cfg.relative_position_radius, cfg.planar);
        s.x = p[0];
        s.y = p[1];
        s.z = p[2];
        // Bounded-motion condition plus noise.
        s.vx = cfg.velocity_noise_sigma * noise(rng);
        s.vy = -2.0 * n * s.x + cfg.velocity_noise_sigma * noise(rng);
        s.vz = cfg.planar ? 0.0 : cfg.velocity_noise_sigma * noise(rng);
    }

    const auto steps = static_cast<std::size_t>(cfg.step_count);
    traj.states.reserve(steps);
    traj.states.push_back(std::move(initial));
    for (std::size_t t = 1; t < steps; ++t) {
        std::vector<RelativeState> next;
        next.reserve(agents);
        for (const auto& s : traj.states.back()) next.push_back(cw_propagate(s, n, cfg.dt));
        traj.states.push_back(std::move(next));
    }

    const auto p0 = traj.positions_at(0);
    traj.sensing_range = calibrate_sensing_range(p0, cfg.target_edge_density);
    traj.adjacency.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        traj.adjacency.push_back(build_adjacency(traj.positions_at(t), traj.sensing_range));
    }
    return traj;
}

std::vector<ScenarioTrajectory> generate_trajectories(const ScenarioConfig& cfg) {
    cfg.validate();
    const auto count = static_cast<std::ptrdiff_t>(cfg.trajectory_count);
    std::vector<ScenarioTrajectory> out(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = sample_scenario(cfg, static_cast<std::size_t>(i));
    }
    return out;
}

std::vector<ScenarioTrajectory> generate_trajectories_serial(const ScenarioConfig& cfg) {
    cfg.validate();
    std::vector<ScenarioTrajectory> out;
    out.reserve(static_cast<std::size_t>(cfg.trajectory_count));
    for (int i = 0; i < cfg.trajectory_count; ++i) {
        out.push_back(sample_scenario(cfg, static_cast<std::size_t>(i)));
    }
    return out;
}

DatasetSplit split_dataset(std::vector<ScenarioTrajectory> trajectories, const SplitRatios& ratios,
                           std::uint64_t seed) {
    if (ratios.train < 0.0 || ratios.validation < 0.0 || ratios.test < 0.0 ||
        std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
        throw ContractError("split_dataset: ratios must be non-negative and sum to 1");
    }
    DatasetSplit split;
    const std::size_t n = trajectories.size();
    if (n < 3) {
        log_warn("split_dataset: fewer than 3 trajectories, all assigned to train");
        split.train = std::move(trajectories);
        return split;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_val = static_cast<std::size_t>(std::llround(ratios.validation * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(n)));
    if (n_val + n_test > n) throw ContractError("split_dataset: rounding left no room for train");
    const std::size_t n_train = n - n_val - n_test;

    for (std::size_t k = 0; k < n; ++k) {
        auto& traj = trajectories[order[k]];
        if (k < n_train) {
            split.train.push_back(std::move(traj));
        } else if (k < n_train + n_val) {
            split.validation.push_back(std::move(traj));
        } else {
            split.test.push_back(std::move(traj));
        }
    }
    return split;
}

} // namespace orbitgraph
