#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/model.hpp"
#include "shiftscope/rng.hpp"

using namespace shiftscope;
using namespace shiftscope::testing;

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// One feature, positives strictly above 0.5.
LabeledDataset separable_dataset(std::size_t n = 40) {
    LabeledDataset ds;
    ds.feature_names = {"x"};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(n);
        ds.users.push_back(node_name(i));
        ds.features.push_back({x});
        ds.targets.push_back(x >= 0.5 ? 1 : 0);
    }
    return ds;
}

LabeledDataset noise_dataset(std::size_t n, std::uint64_t seed) {
    LabeledDataset ds;
    ds.feature_names = {"x", "y"};
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        ds.users.push_back(node_name(i));
        ds.features.push_back({rng.uniform01(), rng.uniform01()});
        ds.targets.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    return ds;
}

LabeledDataset xor_dataset(std::size_t n = 200) {
    LabeledDataset ds;
    ds.feature_names = {"x1", "x2"};
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = static_cast<double>((i / 2) % 2);
        const double x2 = static_cast<double>(i % 2);
        ds.users.push_back(node_name(i));
        ds.features.push_back({x1, x2});
        ds.targets.push_back(static_cast<int>(x1) != static_cast<int>(x2) ? 1 : 0);
    }
    return ds;
}

Tree leaf_tree(double value) { return Tree{{TreeNode{-1, 0.0, -1, -1, value}}}; }

Tree stump(int feature, double threshold, double left_value, double right_value) {
    Tree tree;
    tree.nodes.push_back(TreeNode{feature, threshold, 1, 2, 0.0});
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, left_value});
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, right_value});
    return tree;
}

SearchSpace point_space(int depth_min, int depth_max) {
    SearchSpace space;
    space.n_trees = {40, 40};
    space.max_depth = {depth_min, depth_max};
    space.learning_rate = {0.2, 0.2};
    space.subsample = {1.0, 1.0};
    space.colsample = {1.0, 1.0};
    space.l2_lambda = {1.0};
    return space;
}

}  // namespace

TEST_CASE("gbdt separates a separable dataset within ten trees") {
    const LabeledDataset ds = separable_dataset();
    GBDTParams params;
    params.n_trees = 10;
    params.max_depth = 2;
    params.learning_rate = 0.3;
    const GBDTModel model = train(ds, params);
    const std::vector<double> scores = predict_proba(model, ds);
    CHECK(pairwise_auc(scores, ds.targets) > 0.999);
}

TEST_CASE("gbdt on pure noise cross-validates near chance") {
    const LabeledDataset ds = noise_dataset(200, 17);
    SearchSpace space = point_space(3, 3);
    const SearchResult r = randomized_search(ds, space, 1, 3, 5);
    CHECK(r.mean_cv_auc[0] > 0.35);
    CHECK(r.mean_cv_auc[0] < 0.65);
}

TEST_CASE("a treeless model predicts the base-score prevalence") {
    GBDTModel model;
    model.feature_names = {"x"};
    model.base_score = std::log(0.25 / 0.75);
    CHECK(predict_proba(model, std::vector<double>{1.0}) ==
          doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("prediction sums leaf values through the sigmoid") {
    GBDTModel model;
    model.feature_names = {"x"};
    model.base_score = 0.0;
    model.trees.push_back(leaf_tree(0.4));
    model.trees.push_back(stump(0, 0.5, 0.1, -0.3));

    CHECK(predict_proba(model, std::vector<double>{0.2}) ==
          doctest::Approx(logistic(0.5)).epsilon(1e-12));
    CHECK(predict_proba(model, std::vector<double>{0.9}) ==
          doctest::Approx(logistic(0.1)).epsilon(1e-12));
    // Values at the threshold go right.
    CHECK(predict_proba(model, std::vector<double>{0.5}) ==
          doctest::Approx(logistic(0.1)).epsilon(1e-12));
}

TEST_CASE("a single split orders probabilities across the threshold") {
    GBDTModel model;
    model.feature_names = {"x"};
    model.trees.push_back(stump(0, 1.0, -2.0, 2.0));
    CHECK(predict_proba(model, std::vector<double>{0.0}) <
          predict_proba(model, std::vector<double>{5.0}));
}

TEST_CASE("train rejects degenerate datasets and bad parameters") {
    LabeledDataset single_class = separable_dataset();
    for (int& t : single_class.targets) t = 1;
    CHECK_THROWS_AS(train(single_class, GBDTParams{}), DataError);

    LabeledDataset tiny;
    tiny.feature_names = {"x"};
    tiny.users = {"u"};
    tiny.features = {{0.0}};
    tiny.targets = {1};
    CHECK_THROWS_AS(train(tiny, GBDTParams{}), DataError);

    const LabeledDataset ds = separable_dataset();
    GBDTParams p;
    p.n_trees = 0;
    CHECK_THROWS_AS(train(ds, p), ConfigError);
    p = GBDTParams{};
    p.max_depth = 0;
    CHECK_THROWS_AS(train(ds, p), ConfigError);
    p = GBDTParams{};
    p.learning_rate = 0.0;
    CHECK_THROWS_AS(train(ds, p), ConfigError);
    p = GBDTParams{};
    p.subsample = 1.5;
    CHECK_THROWS_AS(train(ds, p), ConfigError);
    p = GBDTParams{};
    p.colsample = 0.0;
    CHECK_THROWS_AS(train(ds, p), ConfigError);
    p = GBDTParams{};
    p.l2_lambda = -1.0;
    CHECK_THROWS_AS(train(ds, p), ConfigError);
}

TEST_CASE("full-sample training loss is monotone non-increasing") {
    const LabeledDataset ds = noise_dataset(80, 3);
    GBDTParams params;
    params.n_trees = 60;
    params.max_depth = 3;
    params.learning_rate = 0.1;
    params.subsample = 1.0;
    params.colsample = 1.0;
    const GBDTModel model = train(ds, params);
    REQUIRE(model.train_loss_history.size() == 60);
    for (std::size_t i = 1; i < model.train_loss_history.size(); ++i)
        CHECK(model.train_loss_history[i] <= model.train_loss_history[i - 1] + 1e-9);
}

TEST_CASE("training is deterministic in the seed") {
    const LabeledDataset ds = noise_dataset(120, 11);
    GBDTParams params;
    params.n_trees = 20;
    params.subsample = 0.8;
    params.colsample = 0.5;
    params.seed = 99;
    const GBDTModel a = train(ds, params);
    const GBDTModel b = train(ds, params);
    CHECK(a.train_loss_history == b.train_loss_history);
    CHECK(predict_proba(a, ds) == predict_proba(b, ds));
}

TEST_CASE("predictions are invariant to monotone feature transforms") {
    LabeledDataset raw;
    raw.feature_names = {"x"};
    Rng rng(21);
    for (std::size_t i = 0; i < 60; ++i) {
        const double x = 0.1 + rng.uniform01() * 4.0;
        raw.users.push_back(node_name(i));
        raw.features.push_back({x});
        raw.targets.push_back(rng.bernoulli(x / 5.0) ? 1 : 0);
    }
    LabeledDataset cubed = raw;
    for (auto& row : cubed.features) row[0] = row[0] * row[0] * row[0];

    GBDTParams params;
    params.n_trees = 15;
    params.max_depth = 3;
    const GBDTModel m_raw = train(raw, params);
    const GBDTModel m_cubed = train(cubed, params);
    const auto p_raw = predict_proba(m_raw, raw);
    const auto p_cubed = predict_proba(m_cubed, cubed);
    REQUIRE(p_raw.size() == p_cubed.size());
    for (std::size_t i = 0; i < p_raw.size(); ++i)
        CHECK(p_raw[i] == doctest::Approx(p_cubed[i]).epsilon(1e-12));
}

TEST_CASE("predict_proba rejects width mismatches") {
    const GBDTModel model = train(separable_dataset(), GBDTParams{});
    CHECK_THROWS_AS(predict_proba(model, std::vector<double>{1.0, 2.0}), ContractViolation);
}

TEST_CASE("randomized_search samples, scores, and ranks configurations") {
    const LabeledDataset ds = separable_dataset(60);
    const SearchSpace space;  // defaults
    const SearchResult one = randomized_search(ds, space, 1, 3, 4);
    CHECK(one.configs.size() == 1);
    CHECK(one.mean_cv_auc.size() == 1);
    CHECK(one.best_index == 0);

    const SearchResult five = randomized_search(ds, space, 5, 3, 4);
    CHECK(five.configs.size() == 5);
    for (std::size_t c = 0; c < 5; ++c)
        CHECK(five.mean_cv_auc[five.best_index] >= five.mean_cv_auc[c]);

    // Sampled parameters stay inside the space.
    for (const auto& p : five.configs) {
        CHECK(p.n_trees >= space.n_trees.first);
        CHECK(p.n_trees <= space.n_trees.second);
        CHECK(p.max_depth >= space.max_depth.first);
        CHECK(p.max_depth <= space.max_depth.second);
        CHECK(p.learning_rate >= space.learning_rate.first);
        CHECK(p.learning_rate <= space.learning_rate.second);
        CHECK(p.subsample >= space.subsample.first);
        CHECK(p.subsample <= space.subsample.second);
        CHECK((p.l2_lambda == 0.1 || p.l2_lambda == 1.0 || p.l2_lambda == 10.0));
    }

    // Same seed, same draws.
    const SearchResult again = randomized_search(ds, space, 5, 3, 4);
    for (std::size_t c = 0; c < 5; ++c) {
        CHECK(five.configs[c].n_trees == again.configs[c].n_trees);
        CHECK(five.configs[c].max_depth == again.configs[c].max_depth);
        CHECK(five.configs[c].learning_rate == again.configs[c].learning_rate);
        CHECK(five.configs[c].subsample == again.configs[c].subsample);
        CHECK(five.configs[c].colsample == again.configs[c].colsample);
        CHECK(five.configs[c].l2_lambda == again.configs[c].l2_lambda);
    }

    CHECK_THROWS_AS(randomized_search(ds, space, 0, 3, 4), ConfigError);
    CHECK_THROWS_AS(randomized_search(ds, space, 1, 1, 4), ConfigError);
}

TEST_CASE("search prefers depth-2 trees on an XOR target") {
    const LabeledDataset ds = xor_dataset();
    const SearchResult r = randomized_search(ds, point_space(1, 3), 10, 3, 3);
    CHECK(r.best().max_depth >= 2);
    CHECK(r.mean_cv_auc[r.best_index] > 0.9);
}

TEST_CASE("the random baseline scores near chance") {
    const LabeledDataset ds = noise_dataset(1000, 31);
    const std::vector<double> scores = baseline_random(ds, 13);
    for (double s : scores) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
    const double auc = pairwise_auc(scores, ds.targets);
    CHECK(auc > 0.45);
    CHECK(auc < 0.55);
    CHECK(baseline_random(ds, 13) == scores);
    CHECK(baseline_random(ds, 14) != scores);
}

TEST_CASE("the polar baseline flags everyone outside the two main communities") {
    LabeledDataset ds;
    ds.feature_names = {"degree", "community_rank_0", "community_rank_1", "community_rank_2",
                        "community_rank_3"};
    for (std::size_t i = 0; i < 12; ++i) {
        const std::size_t rank = i % 4;
        std::vector<double> row{1.0, 0.0, 0.0, 0.0, 0.0};
        row[1 + rank] = 1.0;
        ds.users.push_back(node_name(i));
        ds.features.push_back(row);
        ds.targets.push_back(rank >= 2 ? 1 : 0);
    }
    const std::vector<double> scores = baseline_polar(ds);
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(scores[i] == (i % 4 >= 2 ? 1.0 : 0.0));
    CHECK(pairwise_auc(scores, ds.targets) == 1.0);

    // A custom main-community set flips the flags.
    const std::vector<double> flipped = baseline_polar(ds, {2, 3});
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(flipped[i] == 1.0 - scores[i]);

    LabeledDataset no_onehot = separable_dataset();
    CHECK_THROWS_AS(baseline_polar(no_onehot), ContractViolation);

    LabeledDataset unset = ds;
    unset.features[0][1] = 0.0;  // clears the only active bit
    CHECK_THROWS_AS(baseline_polar(unset), ContractViolation);
}

TEST_CASE("model json round-trips to identical predictions") {
    TempDir dir;
    const LabeledDataset ds = noise_dataset(100, 41);
    GBDTParams params;
    params.n_trees = 12;
    params.max_depth = 4;
    params.subsample = 0.9;
    params.seed = 6;
    const GBDTModel model = train(ds, params);
    write_model_json(dir / "model.json", model, "prov");
    const GBDTModel loaded = read_model_json(dir / "model.json");

    CHECK(loaded.base_score == model.base_score);
    CHECK(loaded.feature_names == model.feature_names);
    CHECK(loaded.params.n_trees == model.params.n_trees);
    CHECK(loaded.params.seed == model.params.seed);
    CHECK(loaded.train_loss_history == model.train_loss_history);
    CHECK(predict_proba(loaded, ds) == predict_proba(model, ds));
}

TEST_CASE("score files carry user, score, and target columns") {
    TempDir dir;
    const LabeledDataset ds = separable_dataset(4);
    const std::vector<double> scores{0.1, 0.2, 0.8, 0.9};
    write_scores_csv(dir / "scores.csv", ds, scores, "prov");
    const std::string text = read_text_file(dir / "scores.csv");
    CHECK(text.find("user_id,score,target") != std::string::npos);
    CHECK(text.find(node_name(0)) != std::string::npos);
    CHECK_THROWS_AS(write_scores_csv(dir / "bad.csv", ds, {0.1}), ContractViolation);
}
