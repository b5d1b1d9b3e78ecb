#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shiftscope/dataset.hpp"

namespace shiftscope {

struct GBDTParams {
    int n_trees = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    double min_child_weight = 1.0;  // minimum hessian sum per child
    double l2_lambda = 1.0;
    double subsample = 1.0;  // row fraction per tree
    double colsample = 1.0;  // feature fraction per tree
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf weight, already scaled by the learning rate

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    double predict(const std::vector<double>& x) const;
};

struct GBDTModel {
    double base_score = 0.0;  // log-odds of training prevalence
    std::vector<Tree> trees;
    GBDTParams params;
    std::vector<std::string> feature_names;
    std::vector<double> train_loss_history;  // mean logistic loss per round
};

// Second-order boosted trees on logistic loss with exact greedy splits.
GBDTModel train(const LabeledDataset& train_set, const GBDTParams& params);

double predict_proba(const GBDTModel& model, const std::vector<double>& instance);
std::vector<double> predict_proba(const GBDTModel& model, const LabeledDataset& ds);

struct SearchSpace {
    std::pair<int, int> n_trees{50, 400};
    std::pair<int, int> max_depth{2, 8};
    std::pair<double, double> learning_rate{0.01, 0.3};  // sampled log-uniformly
    std::pair<double, double> subsample{0.5, 1.0};
    std::pair<double, double> colsample{0.5, 1.0};
    std::vector<double> l2_lambda{0.1, 1.0, 10.0};
};

struct SearchResult {
    std::vector<GBDTParams> configs;
    std::vector<double> mean_cv_auc;  // aligned with configs
    std::size_t best_index = 0;
    std::vector<std::string> warnings;

    const GBDTParams& best() const { return configs[best_index]; }
};

// n_iter seeded samples from the space, each scored by mean validation AUC
// over stratified n_folds cross-validation; ties go to the first sampled.
SearchResult randomized_search(const LabeledDataset& train_set, const SearchSpace& space,
                               int n_iter, int n_folds, std::uint64_t seed);

// Uniform(0,1) score per instance — the paper's coin-flip baseline.
std::vector<double> baseline_random(const LabeledDataset& ds, std::uint64_t seed);

// 0.0 for members of the main communities (predicted stay), 1.0 otherwise.
// Membership is read from the community one-hot columns; main_ranks indexes
// the size ranking (default: the two largest).
std::vector<double> baseline_polar(const LabeledDataset& ds,
                                   const std::vector<int>& main_ranks = {0, 1});

void write_model_json(const std::filesystem::path& path, const GBDTModel& model,
                      const std::string& provenance = {});
GBDTModel read_model_json(const std::filesystem::path& path);

void write_scores_csv(const std::filesystem::path& path, const LabeledDataset& ds,
                      const std::vector<double>& scores, const std::string& provenance = {});

}  // namespace shiftscope
