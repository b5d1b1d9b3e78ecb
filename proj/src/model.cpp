#include "shiftscope/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/eval.hpp"
#include "shiftscope/parallel.hpp"
#include "shiftscope/rng.hpp"

namespace shiftscope {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void validate_params(const GBDTParams& p) {
    if (p.n_trees < 1) throw ConfigError("gbdt: n_trees must be >= 1");
    if (p.max_depth < 1) throw ConfigError("gbdt: max_depth must be >= 1");
    if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0))
        throw ConfigError("gbdt: learning_rate must be in (0,1]");
    if (!(p.subsample > 0.0 && p.subsample <= 1.0))
        throw ConfigError("gbdt: subsample must be in (0,1]");
    if (!(p.colsample > 0.0 && p.colsample <= 1.0))
        throw ConfigError("gbdt: colsample must be in (0,1]");
    if (p.l2_lambda < 0.0) throw ConfigError("gbdt: l2_lambda must be >= 0");
    if (p.min_child_weight < 0.0) throw ConfigError("gbdt: min_child_weight must be >= 0");
}

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;

    bool found() const { return feature >= 0; }
};

struct TreeBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    const GBDTParams& params;
    const std::vector<int>& features;  // column-sampled candidate features
    Tree tree;

    // Best split of `rows` along one feature: scan sorted values, splitting
    // between distinct neighbors. Gain follows the second-order formula with
    // L2 regularization on leaf weights.
    SplitCandidate best_split_on(int feature, std::vector<std::size_t>& rows, double g_sum,
                                 double h_sum) const {
        std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
            const double xa = x[a][static_cast<std::size_t>(feature)];
            const double xb = x[b][static_cast<std::size_t>(feature)];
            if (xa != xb) return xa < xb;
            return a < b;
        });
        const double lambda = params.l2_lambda;
        const double parent = g_sum * g_sum / (h_sum + lambda);
        SplitCandidate best;
        double gl = 0.0, hl = 0.0;
        for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
            gl += grad[rows[i]];
            hl += hess[rows[i]];
            const double xv = x[rows[i]][static_cast<std::size_t>(feature)];
            const double xn = x[rows[i + 1]][static_cast<std::size_t>(feature)];
            if (xv == xn) continue;
            const double hr = h_sum - hl;
            if (hl < params.min_child_weight || hr < params.min_child_weight) continue;
            const double gr = g_sum - gl;
            const double gain =
                0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = feature;
                best.threshold = 0.5 * (xv + xn);
            }
        }
        return best;
    }

    int build(std::vector<std::size_t> rows, int depth) {
        double g_sum = 0.0, h_sum = 0.0;
        for (std::size_t r : rows) {
            g_sum += grad[r];
            h_sum += hess[r];
        }

        SplitCandidate best;
        if (depth < params.max_depth && rows.size() >= 2) {
            std::vector<SplitCandidate> per_feature(features.size());
            parallel_for(features.size(), [&](std::size_t fi) {
                std::vector<std::size_t> sorted_rows = rows;
                per_feature[fi] = best_split_on(features[fi], sorted_rows, g_sum, h_sum);
            });
            for (const auto& cand : per_feature) {
                // Scanned in ascending feature order, so ties keep the lowest
                // feature and then the lowest threshold.
                if (!cand.found()) continue;
                if (cand.gain > best.gain ||
                    (cand.gain == best.gain && best.found() &&
                     (cand.feature < best.feature ||
                      (cand.feature == best.feature && cand.threshold < best.threshold)))) {
                    best = cand;
                }
            }
        }

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (!best.found()) {
            tree.nodes[static_cast<std::size_t>(node_id)].value =
                -g_sum / (h_sum + params.l2_lambda) * params.learning_rate;
            return node_id;
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows)
            (x[r][static_cast<std::size_t>(best.feature)] < best.threshold ? left_rows
                                                                           : right_rows)
                .push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[static_cast<std::size_t>(node_id)].feature = best.feature;
        tree.nodes[static_cast<std::size_t>(node_id)].threshold = best.threshold;
        const int left = build(std::move(left_rows), depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = left;
        const int right = build(std::move(right_rows), depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

}  // namespace

double Tree::predict(const std::vector<double>& x) const {
    int node = 0;
    while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

GBDTModel train(const LabeledDataset& train_set, const GBDTParams& params) {
    validate_params(params);
    const std::size_t n = train_set.size();
    if (n < 2) throw DataError("gbdt: need at least 2 training instances");
    const auto n_pos = static_cast<std::size_t>(
        std::count(train_set.targets.begin(), train_set.targets.end(), 1));
    if (n_pos == 0 || n_pos == n) throw DataError("gbdt: single-class training set");

    GBDTModel model;
    model.params = params;
    model.feature_names = train_set.feature_names;
    const double prevalence = static_cast<double>(n_pos) / static_cast<double>(n);
    model.base_score = std::log(prevalence / (1.0 - prevalence));

    const std::size_t n_features = train_set.n_features();
    std::vector<double> margin(n, model.base_score);
    std::vector<double> grad(n), hess(n);

    const auto n_sample_rows = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));
    const auto n_sample_cols =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                     params.colsample * static_cast<double>(n_features))));

    for (int round = 0; round < params.n_trees; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            grad[i] = p - static_cast<double>(train_set.targets[i]);
            hess[i] = p * (1.0 - p);
        }

        std::vector<std::size_t> rows;
        if (n_sample_rows == n) {
            rows.resize(n);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        } else {
            Rng rng(derive_seed(params.seed, "gbdt-rows", static_cast<std::uint64_t>(round)));
            rows = rng.sample_without_replacement(n, n_sample_rows);
        }

        std::vector<int> features;
        if (n_sample_cols == n_features) {
            features.resize(n_features);
            std::iota(features.begin(), features.end(), 0);
        } else {
            Rng rng(derive_seed(params.seed, "gbdt-cols", static_cast<std::uint64_t>(round)));
            for (std::size_t f : rng.sample_without_replacement(n_features, n_sample_cols))
                features.push_back(static_cast<int>(f));
        }

        TreeBuilder builder{train_set.features, grad, hess, params, features, Tree{}};
        builder.build(std::move(rows), 0);
        model.trees.push_back(std::move(builder.tree));

        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            margin[i] += model.trees.back().predict(train_set.features[i]);
            const double p = sigmoid(margin[i]);
            loss -= train_set.targets[i] == 1 ? std::log(std::max(p, 1e-15))
                                              : std::log(std::max(1.0 - p, 1e-15));
        }
        model.train_loss_history.push_back(loss / static_cast<double>(n));
    }
    return model;
}

double predict_proba(const GBDTModel& model, const std::vector<double>& instance) {
    if (instance.size() != model.feature_names.size())
        throw ContractViolation("predict_proba: instance has " +
                                std::to_string(instance.size()) + " features, model expects " +
                                std::to_string(model.feature_names.size()));
    double margin = model.base_score;
    for (const Tree& tree : model.trees) margin += tree.predict(instance);
    return sigmoid(margin);
}

std::vector<double> predict_proba(const GBDTModel& model, const LabeledDataset& ds) {
    std::vector<double> out(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) { out[i] = predict_proba(model, ds.features[i]); });
    return out;
}

namespace {

// Deterministic stratified fold ids: per class, shuffled then dealt round-robin.
std::vector<int> stratified_folds(const std::vector<int>& targets, int n_folds,
                                  std::uint64_t seed) {
    std::vector<int> folds(targets.size(), 0);
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < targets.size(); ++i)
            if (targets[i] == cls) idx.push_back(i);
        Rng rng(derive_seed(seed, "cv-folds", static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);
        for (std::size_t j = 0; j < idx.size(); ++j)
            folds[idx[j]] = static_cast<int>(j % static_cast<std::size_t>(n_folds));
    }
    return folds;
}

LabeledDataset rows_where(const LabeledDataset& ds, const std::vector<int>& folds, int fold,
                          bool keep_fold) {
    LabeledDataset out;
    out.feature_names = ds.feature_names;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if ((folds[i] == fold) != keep_fold) continue;
        out.users.push_back(ds.users[i]);
        out.features.push_back(ds.features[i]);
        out.targets.push_back(ds.targets[i]);
    }
    return out;
}

}  // namespace

SearchResult randomized_search(const LabeledDataset& train_set, const SearchSpace& space,
                               int n_iter, int n_folds, std::uint64_t seed) {
    if (n_iter < 1) throw ConfigError("randomized_search: n_iter must be >= 1");
    if (n_folds < 2) throw ConfigError("randomized_search: n_folds must be >= 2");
    if (space.l2_lambda.empty()) throw ConfigError("randomized_search: empty l2_lambda choices");

    SearchResult result;
    for (int i = 0; i < n_iter; ++i) {
        Rng rng(derive_seed(seed, "search-config", static_cast<std::uint64_t>(i)));
        GBDTParams p;
        p.n_trees = static_cast<int>(
            rng.uniform_int(space.n_trees.first, space.n_trees.second));
        p.max_depth = static_cast<int>(
            rng.uniform_int(space.max_depth.first, space.max_depth.second));
        p.learning_rate = rng.log_uniform(space.learning_rate.first, space.learning_rate.second);
        p.subsample = rng.uniform_real(space.subsample.first, space.subsample.second);
        p.colsample = rng.uniform_real(space.colsample.first, space.colsample.second);
        p.l2_lambda = space.l2_lambda[static_cast<std::size_t>(
            rng.uniform_below(space.l2_lambda.size()))];
        p.seed = derive_seed(seed, "search-model", static_cast<std::uint64_t>(i));
        result.configs.push_back(p);
    }

    const std::vector<int> folds = stratified_folds(train_set.targets, n_folds, seed);
    result.mean_cv_auc.resize(result.configs.size(), 0.0);
    for (std::size_t c = 0; c < result.configs.size(); ++c) {
        double sum = 0.0;
        bool failed = false;
        for (int fold = 0; fold < n_folds && !failed; ++fold) {
            const LabeledDataset cv_train = rows_where(train_set, folds, fold, false);
            const LabeledDataset cv_val = rows_where(train_set, folds, fold, true);
            try {
                const GBDTModel model = train(cv_train, result.configs[c]);
                sum += roc_auc(predict_proba(model, cv_val), cv_val.targets).auc;
            } catch (const std::runtime_error& e) {
                result.warnings.push_back("search config " + std::to_string(c) + " fold " +
                                          std::to_string(fold) + " failed (" + e.what() +
                                          "); scored 0.5");
                failed = true;
            }
        }
        result.mean_cv_auc[c] = failed ? 0.5 : sum / static_cast<double>(n_folds);
    }

    result.best_index = 0;
    for (std::size_t c = 1; c < result.mean_cv_auc.size(); ++c)
        if (result.mean_cv_auc[c] > result.mean_cv_auc[result.best_index]) result.best_index = c;
    return result;
}

std::vector<double> baseline_random(const LabeledDataset& ds, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "baseline-random"));
    std::vector<double> scores(ds.size());
    for (double& s : scores) s = rng.uniform01();
    return scores;
}

std::vector<double> baseline_polar(const LabeledDataset& ds, const std::vector<int>& main_ranks) {
    std::vector<std::size_t> community_cols;
    std::vector<int> ranks;
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
        const std::string& name = ds.feature_names[j];
        if (name.rfind("community_rank_", 0) == 0) {
            community_cols.push_back(j);
            ranks.push_back(std::stoi(name.substr(std::string("community_rank_").size())));
        }
    }
    if (community_cols.empty())
        throw ContractViolation("baseline_polar: dataset has no community one-hot columns");

    std::vector<double> scores(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        int rank = -1;
        for (std::size_t c = 0; c < community_cols.size(); ++c) {
            if (ds.features[i][community_cols[c]] == 1.0) {
                rank = ranks[c];
                break;
            }
        }
        if (rank < 0)
            throw ContractViolation("baseline_polar: instance " + ds.users[i] +
                                    " has no community bit set");
        const bool main = std::find(main_ranks.begin(), main_ranks.end(), rank) != main_ranks.end();
        scores[i] = main ? 0.0 : 1.0;
    }
    return scores;
}

void write_model_json(const std::filesystem::path& path, const GBDTModel& model,
                      const std::string& provenance) {
    nlohmann::json doc;
    doc["base_score"] = model.base_score;
    doc["feature_names"] = model.feature_names;
    doc["params"] = {{"n_trees", model.params.n_trees},
                     {"max_depth", model.params.max_depth},
                     {"learning_rate", model.params.learning_rate},
                     {"min_child_weight", model.params.min_child_weight},
                     {"l2_lambda", model.params.l2_lambda},
                     {"subsample", model.params.subsample},
                     {"colsample", model.params.colsample},
                     {"seed", model.params.seed}};
    doc["train_loss_history"] = model.train_loss_history;
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& n : tree.nodes)
            nodes.push_back({{"f", n.feature},
                             {"t", n.threshold},
                             {"l", n.left},
                             {"r", n.right},
                             {"v", n.value}});
        trees.push_back(std::move(nodes));
    }
    doc["trees"] = std::move(trees);
    if (!provenance.empty()) doc["provenance"] = provenance;
    write_text_file(path, doc.dump(2) + "\n");
}

GBDTModel read_model_json(const std::filesystem::path& path) {
    const nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
    GBDTModel model;
    model.base_score = doc.at("base_score").get<double>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    const auto& p = doc.at("params");
    model.params.n_trees = p.at("n_trees").get<int>();
    model.params.max_depth = p.at("max_depth").get<int>();
    model.params.learning_rate = p.at("learning_rate").get<double>();
    model.params.min_child_weight = p.at("min_child_weight").get<double>();
    model.params.l2_lambda = p.at("l2_lambda").get<double>();
    model.params.subsample = p.at("subsample").get<double>();
    model.params.colsample = p.at("colsample").get<double>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    if (doc.contains("train_loss_history"))
        model.train_loss_history = doc.at("train_loss_history").get<std::vector<double>>();
    for (const auto& tree_doc : doc.at("trees")) {
        Tree tree;
        for (const auto& n : tree_doc) {
            TreeNode node;
            node.feature = n.at("f").get<int>();
            node.threshold = n.at("t").get<double>();
            node.left = n.at("l").get<int>();
            node.right = n.at("r").get<int>();
            node.value = n.at("v").get<double>();
            tree.nodes.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

void write_scores_csv(const std::filesystem::path& path, const LabeledDataset& ds,
                      const std::vector<double>& scores, const std::string& provenance) {
    if (scores.size() != ds.size())
        throw ContractViolation("write_scores_csv: score/instance count mismatch");
    CsvTable table;
    table.header = {"user_id", "score", "target"};
    for (std::size_t i = 0; i < ds.size(); ++i)
        table.rows.push_back({ds.users[i], format_double(scores[i]),
                              std::to_string(ds.targets[i])});
    write_csv(path, table, provenance);
}

}  // namespace shiftscope
