#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "orbitgraph/errors.hpp"
#include "orbitgraph/graph.hpp"
#include "orbitgraph/scenario.hpp"
#include "orbitgraph/kernels.hpp"
#include "support.hpp"

using namespace orbitgraph;

namespace {

// Every distinct threshold worth trying: 0 and each pairwise distance.
std::vector<double> candidate_thresholds(std::span<const Vec3> p) {
    std::vector<double> c{0.0};
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = i + 1; j < p.size(); ++j) c.push_back(pairwise_distance(p[i], p[j]));
    }
    std::sort(c.begin(), c.end());
    return c;
}

std::set<std::size_t> indices(const std::vector<ScenarioTrajectory>& part) {
    std::set<std::size_t> s;
    for (const auto& t : part) s.insert(t.index);
    return s;
}

std::vector<ScenarioTrajectory> dummy_trajectories(std::size_t n) {
    std::vector<ScenarioTrajectory> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i].index = i;
    return out;
}

} // namespace

TEST_CASE("scenario config validation names the field") {
    ScenarioConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto field_of = [](ScenarioConfig c) {
        try {
            c.validate();
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string{};
    };
    ScenarioConfig c = cfg;
    c.chief_radius_max = 6000.0;
    CHECK(field_of(c) == "chief_radius_max");
    c = cfg;
    c.dt = 0.0;
    CHECK(field_of(c) == "dt");
    c = cfg;
    c.step_count = 13;
    CHECK(field_of(c) == "step_count");
    c = cfg;
    c.target_edge_density = 1.5;
    CHECK(field_of(c) == "target_edge_density");
    c = cfg;
    c.agents_max = 2;
    CHECK(field_of(c) == "agents_max");
}

TEST_CASE("sample_scenario is deterministic in (seed, index)") {
    const ScenarioConfig cfg = testing::small_scenario();
    CHECK(sample_scenario(cfg, 4) == sample_scenario(cfg, 4));
    CHECK(!(sample_scenario(cfg, 4) == sample_scenario(cfg, 5)));
    ScenarioConfig other = cfg;
    other.seed = 99;
    CHECK(!(sample_scenario(cfg, 4) == sample_scenario(other, 4)));
}

TEST_CASE("noise-free planar scenarios stay on bounded ellipses") {
    ScenarioConfig cfg;
    cfg.velocity_noise_sigma = 0.0;
    cfg.planar = true;
    for (std::size_t index = 0; index < 5; ++index) {
        const ScenarioTrajectory traj = sample_scenario(cfg, index);
        const double n = traj.chief.n;
        for (std::size_t i = 0; i < traj.agent_count(); ++i) {
            const RelativeState& s0 = traj.states[0][i];
            CHECK(s0.z == 0.0);
            CHECK(s0.vz == 0.0);
            // With vx0 = 0 and vy0 = -2 n x0 the in-track coordinate returns to y0
            // every period; drift is measured as the change over whole orbits.
            const double centre = s0.y - 2.0 * s0.vx / n;
            const double amplitude = std::hypot(2.0 * s0.x, 2.0 * s0.vx / n);
            double excess = 0.0;
            for (const auto& step : traj.states) {
                excess = std::max(excess, std::abs(step[i].y - centre) - amplitude);
                CHECK(step[i].z == 0.0);
            }
            CHECK(excess < 1e-6);
        }
    }
}

TEST_CASE("degenerate radius range fixes the chief radius") {
    ScenarioConfig cfg = testing::small_scenario();
    cfg.chief_radius_min = cfg.chief_radius_max = 6880.0;
    for (std::size_t index = 0; index < 1000; ++index) {
        CHECK(sample_scenario(cfg, index).chief.a == 6880.0);
    }
}

TEST_CASE("sampled quantities fall inside their configured ranges") {
    const ScenarioConfig cfg{};
    std::set<std::size_t> agent_counts;
    for (std::size_t index = 0; index < 200; ++index) {
        ScenarioConfig c = cfg;
        c.step_count = 14;
        const ScenarioTrajectory t = sample_scenario(c, index);
        CHECK(t.chief.a >= 6880.0);
        CHECK(t.chief.a <= 7800.0);
        CHECK(t.agent_count() >= 3);
        CHECK(t.agent_count() <= 8);
        agent_counts.insert(t.agent_count());
        for (const auto& s : t.states[0]) {
            CHECK(std::hypot(s.x, s.y, s.z) <= 5.0);
        }
    }
    CHECK(agent_counts.size() == 6);
}

TEST_CASE("calibrate_sensing_range examples") {
    std::mt19937_64 rng(3);
    std::vector<Vec3> p;
    for (int i = 0; i < 6; ++i) {
        const auto s = testing::random_state(rng);
        p.push_back(s.position());
    }
    SUBCASE("target 1 gives the complete graph") {
        const double r = calibrate_sensing_range(p, 1.0);
        const auto c = candidate_thresholds(p);
        CHECK(r >= c.back());
        CHECK(build_adjacency(p, r) == Matrix(6, 6, 1.0));
    }
    SUBCASE("toy instance with distances 1, 2, 3") {
        const std::vector<Vec3> toy{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
        const double r = calibrate_sensing_range(toy, 0.6);
        CHECK(r == 2.0);
        CHECK(edge_density(build_adjacency(toy, 1.0)) == doctest::Approx(5.0 / 9.0));
        CHECK(edge_density(build_adjacency(toy, r)) == doctest::Approx(7.0 / 9.0));
    }
    SUBCASE("tiny target leaves self-loops only") {
        const double r = calibrate_sensing_range(p, 1e-9);
        CHECK(edge_density(build_adjacency(p, r)) == doctest::Approx(1.0 / 6.0));
    }
    SUBCASE("single agent") {
        const std::vector<Vec3> one{{1, 2, 3}};
        CHECK(calibrate_sensing_range(one, 0.6) == 0.0);
    }
}

TEST_CASE("calibrated range is the minimal threshold reaching the target") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> agents(2, 8);
    std::uniform_real_distribution<double> target(0.05, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Vec3> p;
        const int n = agents(rng);
        for (int i = 0; i < n; ++i) p.push_back(testing::random_state(rng).position());
        const double want = target(rng);
        const double r = calibrate_sensing_range(p, want);
        CHECK(edge_density(build_adjacency(p, r)) >= want);
        for (double c : candidate_thresholds(p)) {
            if (c < r) CHECK(edge_density(build_adjacency(p, c)) < want);
        }
    }
}

TEST_CASE("build_adjacency examples") {
    const std::vector<Vec3> p{{0, 0, 0}, {1, 1, 1}, {-2, 0, 3}};
    CHECK(build_adjacency(p, 0.0) == Matrix::identity(3));

    const std::vector<Vec3> pair{{0, 0, 0}, {3, 4, 0}};
    CHECK(build_adjacency(pair, 5.0) == Matrix(2, 2, 1.0));

    const std::vector<Vec3> line{{0, 0, 0}, {4, 0, 0}, {9, 0, 0}};
    CHECK(build_adjacency(line, 5.0) == Matrix::from_rows({{1, 1, 0}, {1, 1, 1}, {0, 1, 1}}));

    CHECK_THROWS_AS(build_adjacency(p, -1.0), ContractError);
}

TEST_CASE("node_features examples") {
    SUBCASE("isolated agent") {
        const std::vector<RelativeState> s{{1, 2, 3, 4, 5, 6}};
        const Matrix f = node_features(s, Matrix::identity(1));
        CHECK(f == Matrix::from_rows({{1, 2, 3, 4, 5, 6, 0, 0, 0, 0, 0, 0, 0}}));
    }
    SUBCASE("two mutually sensing agents") {
        const std::vector<RelativeState> s{{0, 0, 0, 1e-3, 0, 0}, {1, 0, 0, 1e-3, 0, 0}};
        const Matrix f = node_features(s, Matrix(2, 2, 1.0));
        CHECK(f(0, kDegreeColumn) == 1.0);
        CHECK(f(0, 7) == 1.0);
        CHECK(f(1, 7) == -1.0);
        for (std::size_t c = 8; c < kFeatureWidth; ++c) {
            CHECK(f(0, c) == 0.0);
            CHECK(f(1, c) == 0.0);
        }
    }
    SUBCASE("degree column counts neighbours excluding self") {
        std::mt19937_64 rng(2);
        const Matrix a = testing::random_adjacency(rng, 6);
        std::vector<RelativeState> s;
        for (int i = 0; i < 6; ++i) s.push_back(testing::random_state(rng));
        const Matrix f = node_features(s, a);
        for (std::size_t i = 0; i < 6; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < 6; ++j) row += a(i, j);
            CHECK(f(i, kDegreeColumn) == row - 1.0);
        }
    }
}

TEST_CASE("node features permute with the agents") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5;
        const Matrix a = testing::random_adjacency(rng, n);
        std::vector<RelativeState> s;
        for (std::size_t i = 0; i < n; ++i) s.push_back(testing::random_state(rng));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const Matrix p = testing::permutation_matrix(perm);

        std::vector<RelativeState> sp(n);
        for (std::size_t i = 0; i < n; ++i) sp[i] = s[perm[i]];
        const Matrix ap = kernels::matmul(kernels::matmul(p, a), kernels::transpose(p));
        const Matrix expected = kernels::matmul(p, node_features(s, a));
        CHECK(testing::max_abs_diff(node_features(sp, ap), expected) < 1e-15);
    }
}

TEST_CASE("feature row depends only on the agent and its sensed neighbours") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 6;
        const Matrix a = testing::random_adjacency(rng, n, 0.4);
        std::vector<RelativeState> s;
        for (std::size_t i = 0; i < n; ++i) s.push_back(testing::random_state(rng));
        const Matrix before = node_features(s, a);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (a(i, j) != 0.0) continue;
                auto mutated = s;
                mutated[j] = testing::random_state(rng);
                const Matrix after = node_features(mutated, a);
                for (std::size_t c = 0; c < kFeatureWidth; ++c) CHECK(after(i, c) == before(i, c));
            }
        }
    }
}

TEST_CASE("generated trajectories satisfy the dataset invariants") {
    const ScenarioConfig cfg = testing::small_scenario(8, 40, 5);
    const auto trajectories = generate_trajectories(cfg);
    REQUIRE(trajectories.size() == 8);
    for (const auto& t : trajectories) {
        CHECK(t.step_count() == 40);
        CHECK(t.adjacency.size() == 40);
        // Exactly CW-consistent step to step.
        for (std::size_t k = 0; k + 1 < t.step_count(); ++k) {
            for (std::size_t i = 0; i < t.agent_count(); ++i) {
                const auto next = cw_propagate(t.states[k][i], t.chief.n, t.dt).to_array();
                const auto stored = t.states[k + 1][i].to_array();
                for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(next[c] - stored[c]) <= 1e-9);
            }
        }
        for (const auto& a : t.adjacency) {
            for (std::size_t i = 0; i < a.rows(); ++i) {
                CHECK(a(i, i) == 1.0);
                for (std::size_t j = 0; j < a.cols(); ++j) CHECK(a(i, j) == a(j, i));
            }
        }
        CHECK(edge_density(t.adjacency.front()) >= cfg.target_edge_density);
        // Adjacency is rebuilt every step from the frozen range.
        for (std::size_t k = 0; k < t.step_count(); ++k) {
            CHECK(t.adjacency[k] == build_adjacency(t.positions_at(k), t.sensing_range));
        }
    }
}

TEST_CASE("parallel generation equals the serial reference") {
    const ScenarioConfig cfg = testing::small_scenario(12, 20);
    CHECK(generate_trajectories(cfg) == generate_trajectories_serial(cfg));
}

TEST_CASE("split_dataset examples") {
    SUBCASE("100 trajectories") {
        const DatasetSplit s = split_dataset(dummy_trajectories(100), {}, 1);
        CHECK(s.train.size() == 70);
        CHECK(s.validation.size() == 20);
        CHECK(s.test.size() == 10);
    }
    SUBCASE("10 trajectories") {
        const DatasetSplit s = split_dataset(dummy_trajectories(10), {}, 1);
        CHECK(s.train.size() == 7);
        CHECK(s.validation.size() == 2);
        CHECK(s.test.size() == 1);
    }
    SUBCASE("20 trajectories") {
        const DatasetSplit s = split_dataset(dummy_trajectories(20), {}, 1);
        CHECK(s.train.size() == 14);
        CHECK(s.validation.size() == 4);
        CHECK(s.test.size() == 2);
    }
    SUBCASE("same seed twice") {
        CHECK(split_dataset(dummy_trajectories(30), {}, 5) ==
              split_dataset(dummy_trajectories(30), {}, 5));
    }
    SUBCASE("fewer than three trajectories go to train") {
        const DatasetSplit s = split_dataset(dummy_trajectories(2), {}, 1);
        CHECK(s.train.size() == 2);
        CHECK(s.validation.empty());
        CHECK(s.test.empty());
    }
    SUBCASE("ratios must sum to one") {
        CHECK_THROWS_AS(split_dataset(dummy_trajectories(10), {0.5, 0.2, 0.1}, 1), ContractError);
    }
}

TEST_CASE("split parts are disjoint and cover every trajectory") {
    for (std::size_t n = 3; n < 60; ++n) {
        const DatasetSplit s = split_dataset(dummy_trajectories(n), {}, n);
        const auto a = indices(s.train);
        const auto b = indices(s.validation);
        const auto c = indices(s.test);
        CHECK(a.size() + b.size() + c.size() == n);
        std::set<std::size_t> all = a;
        all.insert(b.begin(), b.end());
        all.insert(c.begin(), c.end());
        CHECK(all.size() == n);
        CHECK(s.validation.size() == static_cast<std::size_t>(std::llround(0.2 * n)));
        CHECK(s.test.size() == static_cast<std::size_t>(std::llround(0.1 * n)));
    }
}

TEST_CASE("dataset files round-trip bitwise") {
    DatasetFile file;
    file.config = testing::small_scenario(7, 16, 4);
    file.split = split_dataset(generate_trajectories(file.config), {}, 3);
    const std::string text = dataset_to_string(file);
    CHECK(dataset_from_string(text) == file);

    const auto path = std::filesystem::temp_directory_path() / "orbitgraph_dataset_roundtrip.json";
    save_dataset(file, path.string());
    CHECK(load_dataset(path.string()) == file);
    std::filesystem::remove(path);
}

TEST_CASE("corrupt dataset files raise parse errors") {
    DatasetFile file;
    file.config = testing::small_scenario(3, 14, 3);
    file.split = split_dataset(generate_trajectories(file.config), {}, 3);
    const std::string text = dataset_to_string(file);

    SUBCASE("truncated") {
        try {
            dataset_from_string(text.substr(0, text.size() / 2));
            FAIL("expected ParseError");
        } catch (const VersionError&) {
            FAIL("truncation is not a version problem");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("byte") != std::string::npos);
            CHECK(std::string(e.what()).find("line") != std::string::npos);
        }
    }
    SUBCASE("unknown schema version") {
        std::string bumped = text;
        const auto at = bumped.find("\"schema_version\":1");
        REQUIRE(at != std::string::npos);
        bumped.replace(at, 18, "\"schema_version\":7");
        CHECK_THROWS_AS(dataset_from_string(bumped), VersionError);
    }
    SUBCASE("well-formed JSON with the wrong content") {
        CHECK_THROWS_AS(dataset_from_string("{\"schema_version\":1,\"config\":{}}"), ParseError);
        CHECK_THROWS_AS(dataset_from_string("[1,2,3]"), ParseError);
    }
    SUBCASE("empty input") { CHECK_THROWS_AS(dataset_from_string(""), ParseError); }
}
