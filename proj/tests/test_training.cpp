#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>

#include "regtsc/training.hpp"
#include "regtsc/util.hpp"

using namespace regtsc;

namespace {

// Independent oracle: the formula written out directly, clamp included.
double reward_oracle(double ql_t, double ql_next, double wte, const RewardParams &p) {
    double denom = ql_next < 1.0 ? 1.0 : ql_next;
    return p.lambda1 * ((ql_t - ql_next) / denom) + p.lambda2 * ((p.tau - wte) / (wte + p.gamma));
}

ExperienceBuffer buffer_with(const std::string &sig, const std::vector<double> &rewards) {
    ExperienceBuffer buf(sig);
    for (size_t i = 0; i < rewards.size(); ++i) {
        ReasoningTrajectory t;
        t.prompt = sig + " prompt " + std::to_string(i);
        t.response = "<response><signal>1</signal></response>";
        t.reward = rewards[i];
        t.type_signature = sig;
        t.step = (int)i;
        t.intersection_id = sig;
        buf.append(std::move(t));
    }
    return buf;
}

} // namespace

TEST_SUITE("training") {

TEST_CASE("reward reproduces the worked examples") {
    RewardParams p; // lambda1 5, lambda2 1, tau 5, gamma 1
    CHECK(compute_reward(10, 5, 0, p) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(compute_reward(7, 7, 5, p) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(compute_reward(3, 0, 0, p) == doctest::Approx(20.0).epsilon(1e-15)); // clamp path
}

TEST_CASE("reward equals the direct-evaluation oracle over random inputs") {
    RewardParams p;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ql(0.0, 60.0);
    std::uniform_real_distribution<double> wte(0.0, 30.0);
    for (int i = 0; i < 10000; ++i) {
        double a = std::floor(ql(rng));
        double b = std::floor(ql(rng));
        double w = wte(rng);
        CHECK(std::abs(compute_reward(a, b, w, p) - reward_oracle(a, b, w, p)) < 1e-12);
    }
}

TEST_CASE("reward is strictly decreasing in WTE and in the next queue") {
    RewardParams p;
    CHECK(compute_reward(10, 4, 2, p) > compute_reward(10, 4, 3, p));
    CHECK(compute_reward(10, 4, 2, p) > compute_reward(10, 5, 2, p));
    CHECK_THROWS_AS(compute_reward(-1, 0, 0, p), NegativeInputError);
    CHECK_THROWS_AS(compute_reward(0, 0, -2, p), NegativeInputError);
}

TEST_CASE("no-emergency convention gives the constant bonus") {
    RewardParams p;
    CHECK(compute_reward(4, 4, 0, p) ==
          doctest::Approx(p.lambda2 * p.tau / p.gamma).epsilon(1e-15));
}

TEST_CASE("filter keeps exactly the windows meeting the threshold") {
    FilterParams f{2, 0.5};
    CHECK(filter_trajectory({0.3, 0.4}, f));
    CHECK_FALSE(filter_trajectory({0.0, 0.0}, f));
    CHECK(filter_trajectory({0.25, 0.25}, f)); // sum exactly eta is kept
    CHECK_THROWS_AS(filter_trajectory({0.3}, f), WindowLengthError);
    CHECK_THROWS_AS(filter_trajectory({0.3, 0.3, 0.3}, f), WindowLengthError);
}

TEST_CASE("filter agrees with brute-force window sums on random streams") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> r(-2.0, 2.0);
    std::uniform_int_distribution<int> len(1, 6);
    for (int i = 0; i < 2000; ++i) {
        FilterParams f{len(rng), r(rng)};
        std::vector<double> window(f.t_re);
        for (double &x : window) x = r(rng);
        double sum = std::accumulate(window.begin(), window.end(), 0.0);
        CHECK(filter_trajectory(window, f) == (sum >= f.eta));
    }
}

TEST_CASE("buffer mean is recomputed exactly on insertion") {
    ExperienceBuffer buf = buffer_with("Cross", {1.0, 2.0, 6.0});
    CHECK(buf.mean_reward() == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(buf.size() == 3);
    CHECK(buf.type_signature() == "Cross");
}

TEST_CASE("sampling probabilities reproduce the worked example") {
    auto probs = sampling_probabilities({1.0, -0.5, 0.5}, 0.1);
    REQUIRE(probs.size() == 3);
    CHECK(std::abs(probs[0] - 0.0542) < 5e-4);
    CHECK(std::abs(probs[1] - 0.8670) < 5e-4);
    CHECK(std::abs(probs[2] - 0.0788) < 5e-4);
    CHECK(std::abs(probs[0] + probs[1] + probs[2] - 1.0) < 1e-12);
}

TEST_CASE("sampling probabilities: uniform and singleton edge cases") {
    auto equal = sampling_probabilities({2.5, 2.5, 2.5, 2.5}, 0.1);
    for (double p : equal) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
    auto one = sampling_probabilities({-3.0}, 0.1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("lower mean reward always samples more") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> r(-5.0, 5.0);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 2 + (int)(rng() % 6);
        std::vector<double> means(n);
        for (double &m : means) m = r(rng);
        auto probs = sampling_probabilities(means, 0.1);
        double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
        CHECK(std::abs(sum - 1.0) < 1e-12);
        for (int i = 0; i < n; ++i) {
            CHECK(probs[i] > 0.0);
            for (int j = 0; j < n; ++j) {
                if (means[i] < means[j]) CHECK(probs[i] > probs[j]);
            }
        }
    }
}

TEST_CASE("the formula is pinned: shifting all means changes the distribution") {
    // Not a symmetry: |min| re-anchors at zero only when the minimum is
    // negative, so a constant shift generally changes the probabilities.
    auto base = sampling_probabilities({1.0, -0.5, 0.5}, 0.1);
    auto shifted = sampling_probabilities({3.0, 1.5, 2.5}, 0.1);
    bool any_different = false;
    for (size_t i = 0; i < base.size(); ++i) {
        if (std::abs(base[i] - shifted[i]) > 1e-6) any_different = true;
    }
    CHECK(any_different);
}

TEST_CASE("degenerate distribution draws only from the supported buffer") {
    std::vector<ExperienceBuffer> buffers;
    buffers.push_back(buffer_with("A", {1.0, 2.0}));
    buffers.push_back(buffer_with("B", {3.0}));
    auto rng = make_rng(1, 2);
    auto batch = sample_refinement_batch(buffers, {1.0, 0.0}, 10, rng);
    REQUIRE(batch.size() == 10);
    for (const auto &t : batch) CHECK(t.type_signature == "A");
}

TEST_CASE("even split draws each buffer half the time") {
    std::vector<ExperienceBuffer> buffers;
    buffers.push_back(buffer_with("A", {1.0, 2.0}));
    buffers.push_back(buffer_with("B", {3.0, 4.0}));
    auto rng = make_rng(11, 4);
    auto batch = sample_refinement_batch(buffers, {0.5, 0.5}, 100000, rng);
    int a = 0;
    for (const auto &t : batch) a += t.type_signature == "A" ? 1 : 0;
    CHECK(std::abs(a / 100000.0 - 0.5) < 0.01);
}

TEST_CASE("empirical frequencies track the sampling probabilities") {
    std::vector<ExperienceBuffer> buffers;
    buffers.push_back(buffer_with("A", {1.0}));
    buffers.push_back(buffer_with("B", {2.0}));
    buffers.push_back(buffer_with("C", {3.0}));
    std::vector<double> probs = sampling_probabilities({1.0, -0.5, 0.5}, 0.1);
    // reorder to match buffers: A gets 0.0542, B 0.8670, C 0.0788
    auto rng = make_rng(7, 3);
    auto batch = sample_refinement_batch(buffers, probs, 100000, rng);
    std::map<std::string, int> counts;
    for (const auto &t : batch) counts[t.type_signature] += 1;
    CHECK(std::abs(counts["A"] / 100000.0 - probs[0]) < 0.01);
    CHECK(std::abs(counts["B"] / 100000.0 - probs[1]) < 0.01);
    CHECK(std::abs(counts["C"] / 100000.0 - probs[2]) < 0.01);
}

TEST_CASE("sampling from an empty supported buffer is rejected") {
    std::vector<ExperienceBuffer> buffers;
    buffers.push_back(buffer_with("A", {1.0}));
    buffers.push_back(ExperienceBuffer("B"));
    auto rng = make_rng(1, 1);
    CHECK_THROWS_AS(sample_refinement_batch(buffers, {0.5, 0.5}, 4, rng), EmptyBufferError);
    CHECK_THROWS_AS(sample_refinement_batch(buffers, {0.7, 0.7}, 4, rng), ValidationError);
}

TEST_CASE("dataset export and reload") {
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "regtsc_dataset_test.jsonl";
    std::vector<FineTuneRecord> records = {{"p1", "r1", 3.25}, {"p2", "r2", -1.5},
                                           {"p3", "r3", 0.0}};

    SUBCASE("imitation export forces weight 1.0") {
        export_dataset(records, path.string(), DatasetKind::Imitation);
        auto back = load_dataset(path.string());
        REQUIRE(back.size() == 3);
        for (const auto &rec : back) CHECK(rec.weight == 1.0);
        CHECK(back[1].prompt == "p2");
        CHECK(back[1].response == "r2");
    }

    SUBCASE("refinement export keeps raw rewards, including negatives") {
        export_dataset(records, path.string(), DatasetKind::Refinement);
        auto back = load_dataset(path.string());
        CHECK(back[0].weight == 3.25);
        CHECK(back[1].weight == -1.5);
        CHECK(back[2].weight == 0.0);
    }

    SUBCASE("optional clamp zeroes negative refinement weights") {
        export_dataset(records, path.string(), DatasetKind::Refinement, true);
        auto back = load_dataset(path.string());
        CHECK(back[0].weight == 3.25);
        CHECK(back[1].weight == 0.0);
    }

    SUBCASE("empty export is a precondition violation") {
        CHECK_THROWS_AS(export_dataset({}, path.string(), DatasetKind::Imitation),
                        ValidationError);
    }
    fs::remove(path);
}

TEST_CASE("buffer snapshots round-trip") {
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "regtsc_buffer_test.jsonl";
    ExperienceBuffer buf = buffer_with("Tee[2,2,2]J3", {0.5, -1.0, 4.0});
    save_buffer(buf, path.string());
    ExperienceBuffer back = load_buffer(path.string());
    CHECK(back.type_signature() == buf.type_signature());
    CHECK(back.size() == buf.size());
    CHECK(back.mean_reward() == doctest::Approx(buf.mean_reward()).epsilon(1e-15));
    CHECK(back.trajectories()[2].prompt == buf.trajectories()[2].prompt);
    fs::remove(path);
}

TEST_CASE("toy weighted NLL closed form: uniform binary model") {
    ToyModel model = make_uniform_toy_model(2);
    ToyLossResult res = toy_weighted_nll(model, {{{0}, 2.0}});
    CHECK(std::abs(res.loss - 2.0 * std::log(2.0)) < 1e-9);
}

TEST_CASE("weight zero annihilates loss and gradient") {
    ToyModel model = make_uniform_toy_model(3);
    ToyLossResult res = toy_weighted_nll(model, {{{0, 1, 2}, 0.0}});
    CHECK(res.loss == 0.0);
    for (double g : res.gradient) CHECK(g == 0.0);
}

TEST_CASE("weights of one reduce to the plain NLL exactly") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gauss(0.0, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
        int v = 2 + (int)(rng() % 4);
        ToyModel model = make_uniform_toy_model(v);
        for (double &x : model.logits) x = gauss(rng);
        std::vector<WeightedSequence> batch;
        std::vector<std::vector<int>> plain;
        for (int s = 0; s < 5; ++s) {
            std::vector<int> tokens;
            int len = 1 + (int)(rng() % 6);
            for (int t = 0; t < len; ++t) tokens.push_back((int)(rng() % v));
            batch.push_back({tokens, 1.0});
            plain.push_back(tokens);
        }
        CHECK(toy_weighted_nll(model, batch).loss == toy_nll(model, plain));
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> wdist(-2.0, 3.0);
    const double h = 1e-5;
    for (int trial = 0; trial < 25; ++trial) {
        int v = 2 + (int)(rng() % 3);
        ToyModel model = make_uniform_toy_model(v);
        for (double &x : model.logits) x = gauss(rng);
        std::vector<WeightedSequence> batch;
        for (int s = 0; s < 3; ++s) {
            std::vector<int> tokens;
            int len = 1 + (int)(rng() % 5);
            for (int t = 0; t < len; ++t) tokens.push_back((int)(rng() % v));
            batch.push_back({tokens, wdist(rng)});
        }
        ToyLossResult res = toy_weighted_nll(model, batch);
        for (size_t k = 0; k < model.logits.size(); ++k) {
            ToyModel plus = model, minus = model;
            plus.logits[k] += h;
            minus.logits[k] -= h;
            double fd =
                (toy_weighted_nll(plus, batch).loss - toy_weighted_nll(minus, batch).loss) /
                (2.0 * h);
            double scale = std::max({std::abs(fd), std::abs(res.gradient[k]), 1e-8});
            CHECK(std::abs(res.gradient[k] - fd) / scale < 1e-4);
        }
    }
}

TEST_CASE("negative weights flip the gradient direction") {
    ToyModel model = make_uniform_toy_model(2);
    auto pos = toy_weighted_nll(model, {{{1}, 1.0}});
    auto neg = toy_weighted_nll(model, {{{1}, -1.0}});
    for (size_t k = 0; k < pos.gradient.size(); ++k) {
        CHECK(neg.gradient[k] == doctest::Approx(-pos.gradient[k]).epsilon(1e-12));
    }
}

TEST_CASE("out-of-vocabulary tokens are rejected") {
    ToyModel model = make_uniform_toy_model(2);
    CHECK_THROWS_AS(toy_weighted_nll(model, {{{2}, 1.0}}), VocabularyError);
    CHECK_THROWS_AS(toy_nll(model, {{-1}}), VocabularyError);
}

} // TEST_SUITE
