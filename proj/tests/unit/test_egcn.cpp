#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "orbitgraph/checkpoint.hpp"
#include "orbitgraph/egcn.hpp"
#include "orbitgraph/errors.hpp"
#include "orbitgraph/gradcheck.hpp"
#include "orbitgraph/graph.hpp"
#include "orbitgraph/kernels.hpp"
#include "orbitgraph/physics_loss.hpp"
#include "orbitgraph/training.hpp"
#include "reference_model.hpp"
#include "support.hpp"

using namespace orbitgraph;
using testing::max_abs_diff;
using testing::random_matrix;

namespace {

double sig(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

MatrixGru random_gru(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale) {
    MatrixGru g;
    for (Matrix* m : {&g.wz, &g.uz, &g.bz, &g.wr, &g.ur, &g.br, &g.wh, &g.uh, &g.bh}) {
        *m = random_matrix(rng, r, c, -scale, scale);
    }
    return g;
}

std::vector<GraphSnapshot> window_of(const ScenarioTrajectory& traj, std::size_t first,
                                     std::size_t len) {
    std::vector<GraphSnapshot> w;
    for (std::size_t t = first; t < first + len; ++t) {
        w.push_back(make_snapshot(traj.states[t], traj.adjacency[t]));
    }
    return w;
}

Model model_for(const ScenarioTrajectory& traj, std::size_t hidden, std::uint64_t seed) {
    Model m;
    m.config = testing::small_model(hidden);
    m.params = init_params(m.config, seed);
    m.standardizer = Standardizer::fit(std::span<const ScenarioTrajectory>(&traj, 1));
    return m;
}

Var tape_forward(EvolveGcnGraph& net, std::span<const GraphSnapshot> window) {
    Tape& t = net.tape();
    auto weights = net.initial_weights();
    Var top, x;
    for (const auto& snap : window) {
        x = net.standardize_features(t.constant(snap.features));
        top = net.step(t.constant(snap.normalized), x, weights);
    }
    return net.readout(top, x);
}

// Largest |lambda| of a symmetric matrix by power iteration.
double spectral_radius(const Matrix& a, std::mt19937_64& rng) {
    Matrix v = random_matrix(rng, a.rows(), 1);
    double lambda = 0.0;
    for (int it = 0; it < 3000; ++it) {
        Matrix w = kernels::matmul(a, v);
        double norm = 0.0;
        for (double x : w.values()) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (double& x : w.values()) x /= norm;
        lambda = norm;
        v = std::move(w);
    }
    return lambda;
}

} // namespace

TEST_CASE("normalize_adjacency examples") {
    CHECK(normalize_adjacency(Matrix::identity(4)) == Matrix::identity(4));
    const Matrix full = normalize_adjacency(Matrix(3, 3, 1.0));
    for (double v : full.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const Matrix path = normalize_adjacency(
        Matrix::from_rows({{1, 1, 0}, {1, 1, 1}, {0, 1, 1}}));
    CHECK(path(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
    CHECK(path(1, 2) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
    CHECK(path(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(path(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(path(0, 2) == 0.0);
}

TEST_CASE("normalized adjacency is symmetric with spectral radius at most one") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> size(1, 10);
    std::uniform_real_distribution<double> p(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix a = normalize_adjacency(testing::random_adjacency(rng, size(rng), p(rng)));
        CHECK(max_abs_diff(a, kernels::transpose(a)) == 0.0);
        CHECK(spectral_radius(a, rng) <= 1.0 + 1e-6);
    }
}

TEST_CASE("gcn_forward examples") {
    std::mt19937_64 rng(8);
    const Matrix h = random_matrix(rng, 4, 3);
    CHECK(gcn_forward(Matrix::identity(4), h, Matrix::identity(3), false) == h);

    const Matrix mix(3, 3, 1.0 / 3.0);
    const Matrix out = gcn_forward(mix, random_matrix(rng, 3, 5), random_matrix(rng, 5, 2), true);
    for (std::size_t r = 1; r < 3; ++r) {
        CHECK(out(r, 0) == doctest::Approx(out(0, 0)).epsilon(1e-14));
        CHECK(out(r, 1) == doctest::Approx(out(0, 1)).epsilon(1e-14));
    }

    const Matrix one = random_matrix(rng, 1, 3);
    const Matrix w = random_matrix(rng, 3, 2);
    const Matrix single = gcn_forward(Matrix::identity(1), one, w, true);
    const Matrix hw = kernels::matmul(one, w);
    CHECK(single(0, 0) == std::tanh(hw(0, 0)));
    CHECK(single(0, 1) == std::tanh(hw(0, 1)));

    CHECK_THROWS_AS(gcn_forward(Matrix::identity(3), h, Matrix::identity(3), false),
                    DimensionError);
}

TEST_CASE("summarize examples") {
    const Matrix v = Matrix::from_rows({{1.5, -2.0, 0.25}});
    const Matrix z = summarize(v, 4);
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(z(0, c) == 1.5);
        CHECK(z(1, c) == -2.0);
        CHECK(z(2, c) == 0.25);
    }

    Matrix pm(2, 3);
    for (std::size_t c = 0; c < 3; ++c) {
        pm(0, c) = v(0, c);
        pm(1, c) = -v(0, c);
    }
    CHECK(summarize(pm, 2) == Matrix(3, 2));

    std::mt19937_64 rng(2);
    const Matrix h = random_matrix(rng, 5, 3);
    const Matrix ph = kernels::matmul(testing::permutation_matrix({3, 0, 4, 1, 2}), h);
    CHECK(max_abs_diff(summarize(h, 3), summarize(ph, 3)) < 1e-15);
    CHECK_THROWS_AS(summarize(Matrix(0, 3), 2), ContractError);
}

TEST_CASE("gru_evolve endpoints") {
    std::mt19937_64 rng(17);
    const Matrix w = random_matrix(rng, 4, 3, -2.0, 2.0);
    const Matrix z = random_matrix(rng, 4, 3);
    MatrixGru g = random_gru(rng, 4, 3, 1.0);

    g.bz = Matrix(4, 3, -1000.0);
    CHECK(gru_evolve(w, z, g) == w);

    g.bz = Matrix(4, 3, 1000.0);
    const Matrix out = gru_evolve(w, z, g);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double reset = sig(g.wr[i] * z[i] + g.ur[i] * w[i] + g.br[i]);
        const double candidate = std::tanh(g.wh[i] * z[i] + g.uh[i] * (reset * w[i]) + g.bh[i]);
        CHECK(out[i] == candidate);
        CHECK(std::abs(out[i]) < 1.0);
    }

    CHECK_THROWS_AS(gru_evolve(w, Matrix(3, 3), g), DimensionError);
}

TEST_CASE("gru_evolve is an exact entrywise convex combination") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> dim(1, 6);
    std::uniform_real_distribution<double> scale(0.1, 8.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t r = dim(rng), c = dim(rng);
        const double s = scale(rng);
        const Matrix w = random_matrix(rng, r, c, -s, s);
        const Matrix z = random_matrix(rng, r, c, -s, s);
        const MatrixGru g = random_gru(rng, r, c, scale(rng));
        const Matrix out = gru_evolve(w, z, g);
        double w_inf = 0.0, out_inf = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double reset = sig(g.wr[i] * z[i] + g.ur[i] * w[i] + g.br[i]);
            const double candidate =
                std::tanh(g.wh[i] * z[i] + g.uh[i] * (reset * w[i]) + g.bh[i]);
            REQUIRE(out[i] >= std::min(w[i], candidate));
            REQUIRE(out[i] <= std::max(w[i], candidate));
            w_inf = std::max(w_inf, std::abs(w[i]));
            out_inf = std::max(out_inf, std::abs(out[i]));
        }
        REQUIRE(out_inf <= std::max(w_inf, 1.0));
    }
}

TEST_CASE("init_params is deterministic with zero biases and bounded weights") {
    const ModelConfig cfg;
    const EvolveGcnParams a = init_params(cfg, 11);
    CHECK(a == init_params(cfg, 11));
    CHECK_FALSE(a == init_params(cfg, 12));

    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        const auto& g = a.grus[l];
        for (const Matrix* b : {&g.bz, &g.br, &g.bh}) CHECK(*b == Matrix(b->rows(), b->cols()));
        const double bound =
            std::sqrt(6.0 / static_cast<double>(cfg.layer_dims[l] + cfg.layer_dims[l + 1]));
        for (const Matrix* m : {&a.initial_weights[l], &g.wz, &g.uz, &g.wr, &g.ur, &g.wh, &g.uh}) {
            CHECK(m->rows() == cfg.layer_dims[l]);
            CHECK(m->cols() == cfg.layer_dims[l + 1]);
            for (double v : m->values()) REQUIRE(std::abs(v) <= bound);
        }
    }
    CHECK(a.readout_bias == Matrix(1, cfg.output_width()));
    const double rb =
        std::sqrt(6.0 / static_cast<double>(cfg.readout_input_width() + cfg.output_width()));
    for (double v : a.readout_weight.values()) REQUIRE(std::abs(v) <= rb);
    CHECK(a.names().size() == a.tensors().size());
}

TEST_CASE("model_forward determinism, shape and zero readout") {
    const auto traj = sample_scenario(testing::small_scenario(1, 20, 4), 0);
    Model m = model_for(traj, 8, 3);
    const auto window = window_of(traj, 0, 8);

    const auto a = model_forward(window, m);
    const auto b = model_forward(window, m);
    CHECK(a.prediction.values == b.prediction.values);
    CHECK(a.prediction.values.rows() == 4);
    CHECK(a.prediction.values.cols() == 36);
    CHECK(a.carry.size() == 2);

    std::vector<GraphSnapshot> repeated(8, window.front());
    CHECK(model_forward(repeated, m).prediction.values ==
          model_forward(repeated, m).prediction.values);

    m.params.readout_weight = Matrix(m.params.readout_weight.rows(), m.params.readout_weight.cols());
    m.standardizer = Standardizer::identity();
    CHECK(model_forward(window, m).prediction.values == Matrix(4, 36));

    CHECK_THROWS_AS(model_forward(std::span(window).first(7), m), ContractError);
}

TEST_CASE("model_forward is permutation-equivariant over agents") {
    std::mt19937_64 rng(44);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    const Matrix p = testing::permutation_matrix(perm);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<GraphSnapshot> window, permuted;
        for (int t = 0; t < 8; ++t) {
            std::vector<RelativeState> s(4);
            for (auto& x : s) x = testing::random_state(rng);
            const Matrix a = testing::random_adjacency(rng, 4);
            window.push_back(make_snapshot(s, a));
            std::vector<RelativeState> ps(4);
            for (std::size_t i = 0; i < 4; ++i) ps[i] = s[perm[i]];
            permuted.push_back(make_snapshot(ps, kernels::matmul(kernels::matmul(p, a), kernels::transpose(p))));
        }
        Model m;
        m.config = testing::small_model(6);
        m.params = init_params(m.config, trial);
        m.standardizer = Standardizer::identity();
        const Matrix out = model_forward(window, m).prediction.values;
        const Matrix pout = model_forward(permuted, m).prediction.values;
        CHECK(max_abs_diff(kernels::matmul(p, out), pout) < 1e-9);
    }
}

TEST_CASE("carried state continues weight evolution") {
    const auto traj = sample_scenario(testing::small_scenario(1, 20, 3), 2);
    const Model m = model_for(traj, 6, 4);
    const auto w0 = model_forward(window_of(traj, 0, 8), m);
    const auto w1 = model_forward(window_of(traj, 1, 8), m, &w0.carry);
    const auto fresh = model_forward(window_of(traj, 1, 8), m);
    CHECK_FALSE(w1.prediction.values == fresh.prediction.values);

    // Carry is the state after the first step of the window.
    const auto one = model_forward(window_of(traj, 0, 8), m);
    LayerWeights manual = m.params.initial_weights;
    const auto snap = window_of(traj, 0, 1).front();
    Matrix h = snap.features;
    for (std::size_t r = 0; r < h.rows(); ++r) {
        for (std::size_t c = 0; c < kFeatureWidth; ++c) {
            h(r, c) = (h(r, c) - m.standardizer.feature_mean(0, c)) *
                      (1.0 / m.standardizer.feature_scale(0, c));
        }
    }
    for (std::size_t l = 0; l < 2; ++l) {
        manual[l] = gru_evolve(manual[l], summarize(h, m.config.layer_dims[l + 1]), m.params.grus[l]);
        h = gcn_forward(snap.normalized, h, manual[l], l == 0);
    }
    CHECK(one.carry == manual);
}

TEST_CASE("tape route matches the value route bitwise") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto traj = sample_scenario(testing::small_scenario(1, 20, 3 + seed % 3), seed);
        const Model m = model_for(traj, 8, seed);
        const auto window = window_of(traj, seed, 8);
        Tape tape;
        EvolveGcnGraph net(tape, m, true);
        const Var out = tape_forward(net, window);
        CHECK(tape.value(out) == model_forward(window, m).prediction.values);
    }
}

TEST_CASE("parameter-span graph validates count and shapes") {
    const auto traj = sample_scenario(testing::small_scenario(1, 20, 3), 0);
    const Model m = model_for(traj, 4, 0);
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix* t : m.params.tensors()) vars.push_back(tape.constant(*t));
    CHECK_NOTHROW(EvolveGcnGraph(tape, m, std::span<const Var>(vars)));
    vars.pop_back();
    CHECK_THROWS_AS(EvolveGcnGraph(tape, m, std::span<const Var>(vars)), DimensionError);
    vars.push_back(tape.constant(Matrix(2, 2)));
    CHECK_THROWS_AS(EvolveGcnGraph(tape, m, std::span<const Var>(vars)), DimensionError);
}

TEST_CASE("readout requires standardized features for the same agent count") {
    const auto traj = sample_scenario(testing::small_scenario(1, 20, 3), 0);
    const Model m = model_for(traj, 4, 0);
    Tape tape;
    EvolveGcnGraph net(tape, m, false);
    const Var x = tape.constant(Matrix(3, kFeatureWidth));
    CHECK_THROWS_AS(net.readout(tape.constant(Matrix(3, 4)), x), ContractError);
}

TEST_CASE("quad-precision oracle reproduces the forward loss") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto traj = sample_scenario(testing::small_scenario(1, 20, 3 + seed % 2), seed);
        const Model m = model_for(traj, 8, seed);
        const auto window = window_of(traj, 1, 8);
        const Matrix target = target_matrix(traj, 9, 6);
        const Matrix last = states_to_matrix(traj.states[8]);
        const PredictionBatch pred = model_forward(window, m).prediction;
        const double loss = total_loss(data_loss(pred, target, 1.0, 1.0),
                                       physics_loss(pred, last, target, traj.chief.n, traj.dt), 0.25);
        const testing::QuadComposite ref(window, m, target, last, traj.chief.n, traj.dt, 0.25);
        CHECK(std::abs(ref.value() - loss) <= 1e-12 * loss);
    }
}

// A double central difference cannot resolve the smallest gate gradients
// (they sit ~1e-10 below the loss scale), so the numeric side is taken in
// quad precision. Analytic gradients are the double tape's.
TEST_CASE("full model plus loss passes the finite-difference check") {
    const auto traj = sample_scenario(testing::small_scenario(1, 20, 3), 5);
    const Model m = model_for(traj, 4, 9);
    const auto window = window_of(traj, 2, 8);
    const Matrix target = target_matrix(traj, 10, 6);
    const Matrix last = states_to_matrix(traj.states[9]);

    const TapeLossFn fn = [&](Tape& t, std::span<const Var> p) {
        EvolveGcnGraph net(t, m, p);
        const Var pred = tape_forward(net, window);
        LossGraph losses(t, 6, traj.chief.n, traj.dt);
        const Var data = losses.data(pred, target, 1.0, 1.0);
        const Var phys = losses.physics(pred, t.constant(last), target);
        return losses.total(data, phys, 0.25);
    };
    const testing::QuadComposite ref(window, m, target, last, traj.chief.n, traj.dt, 0.25);
    std::vector<Matrix> params;
    for (const Matrix* t : m.params.tensors()) params.push_back(*t);
    const auto report = finite_difference_check(
        fn, [&](std::size_t p, std::size_t e, double d) { return ref.difference(p, e, d); }, params,
        1e-6);
    CHECK(report.entries_checked + report.entries_skipped == m.params.scalar_count());
    CHECK(report.entries_checked > 0.9 * static_cast<double>(m.params.scalar_count()));
    CHECK(report.max_relative_error < 1e-5);
}

TEST_CASE("checkpoint round trip is exact") {
    const auto traj = sample_scenario(testing::small_scenario(1, 20, 3), 0);
    Checkpoint c{model_for(traj, 6, 21), "physics", 17};
    const std::string text = checkpoint_to_string(c);
    CHECK(checkpoint_from_string(text) == c);
    CHECK(checkpoint_to_string(checkpoint_from_string(text)) == text);
}

TEST_CASE("checkpoint loading rejects shape and version mismatches") {
    const auto traj = sample_scenario(testing::small_scenario(1, 20, 3), 0);
    const Checkpoint c{model_for(traj, 6, 21), "x", 1};
    auto j = nlohmann::json::parse(checkpoint_to_string(c));

    auto bad_shape = j;
    bad_shape["parameters"][0]["shape"] = {6, 13};
    CHECK_THROWS_AS(checkpoint_from_string(bad_shape.dump()), ParseError);

    auto bad_name = j;
    bad_name["parameters"][1]["name"] = "layer0.gru.nope";
    CHECK_THROWS_AS(checkpoint_from_string(bad_name.dump()), ParseError);

    auto missing = j;
    missing["parameters"].erase(missing["parameters"].size() - 1);
    CHECK_THROWS_AS(checkpoint_from_string(missing.dump()), ParseError);

    auto version = j;
    version["schema_version"] = 2;
    CHECK_THROWS_AS(checkpoint_from_string(version.dump()), VersionError);

    CHECK_THROWS_AS(checkpoint_from_string("{\"schema_version\": 1"), ParseError);
}
