#include "shiftscope/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/rng.hpp"

namespace shiftscope {

int label_shift(const std::string& user, const ConsensusLabeling& labeling1,
                const ConsensusLabeling& labeling2, const CommunityMatching& matching) {
    auto it1 = labeling1.stable.find(user);
    auto it2 = labeling2.stable.find(user);
    if (it1 == labeling1.stable.end() || it2 == labeling2.stable.end())
        throw ContractViolation("label_shift: user " + user + " is not stable in both periods");
    if (!matching.has_period1(it1->second))
        throw ContractViolation("label_shift: user " + user + " period-1 community " +
                                std::to_string(it1->second) + " is outside the matching");
    if (!matching.has_period2(it2->second))
        throw ContractViolation("label_shift: user " + user + " period-2 community " +
                                std::to_string(it2->second) + " is outside the matching");
    return matching.match_of(it1->second) == it2->second ? 0 : 1;
}

LabeledDataset assemble(const std::map<std::string, NodeMetricsRow>& metrics1,
                        const ConsensusLabeling& labeling1,
                        const std::map<std::string, UserTopicProfile>& profiles,
                        const std::set<std::string>& eligible,
                        const CommunityMatching& matching, const ConsensusLabeling& labeling2,
                        int n_topics) {
    if (eligible.empty()) throw DataError("assemble: no eligible users, dataset would be empty");
    if (n_topics < 1) throw ConfigError("assemble: n_topics must be >= 1");

    // One-hot cells follow the matching's period-1 size ranking.
    const int top_k = static_cast<int>(matching.pairs.size());
    std::map<int, int> rank_of;  // period-1 community -> one-hot cell
    for (int i = 0; i < top_k; ++i) rank_of.emplace(matching.pairs[static_cast<std::size_t>(i)].c1, i);

    LabeledDataset ds;
    ds.feature_names = {"degree", "pagerank", "betweenness", "clustering"};
    for (int i = 0; i < top_k; ++i) ds.feature_names.push_back("community_rank_" + std::to_string(i));
    for (int t = 0; t < n_topics; ++t) ds.feature_names.push_back("topic_" + std::to_string(t));

    for (const auto& user : eligible) {
        auto metric_it = metrics1.find(user);
        if (metric_it == metrics1.end())
            throw ContractViolation("assemble: eligible user " + user + " has no period-1 metrics");
        auto profile_it = profiles.find(user);
        if (profile_it == profiles.end())
            throw ContractViolation("assemble: eligible user " + user + " has no topic profile");
        if (profile_it->second.fractions.size() != static_cast<std::size_t>(n_topics))
            throw ContractViolation("assemble: profile of " + user + " has " +
                                    std::to_string(profile_it->second.fractions.size()) +
                                    " topics, expected " + std::to_string(n_topics));
        auto comm_it = labeling1.stable.find(user);
        if (comm_it == labeling1.stable.end() || !rank_of.count(comm_it->second))
            throw ContractViolation("assemble: eligible user " + user +
                                    " is outside the matched period-1 communities");

        std::vector<double> row;
        row.reserve(ds.feature_names.size());
        const NodeMetricsRow& m = metric_it->second;
        row.push_back(static_cast<double>(m.degree));
        row.push_back(m.pagerank);
        row.push_back(m.betweenness);
        row.push_back(m.clustering);
        for (int i = 0; i < top_k; ++i) row.push_back(rank_of.at(comm_it->second) == i ? 1.0 : 0.0);
        for (double f : profile_it->second.fractions) row.push_back(f);

        ds.users.push_back(user);
        ds.features.push_back(std::move(row));
        ds.targets.push_back(label_shift(user, labeling1, labeling2, matching));
    }
    return ds;
}

namespace {

LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    LabeledDataset out;
    out.feature_names = ds.feature_names;
    out.users.reserve(rows.size());
    out.features.reserve(rows.size());
    out.targets.reserve(rows.size());
    for (std::size_t i : rows) {
        out.users.push_back(ds.users[i]);
        out.features.push_back(ds.features[i]);
        out.targets.push_back(ds.targets[i]);
    }
    return out;
}

}  // namespace

SplitResult split(const LabeledDataset& ds, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("split: train fraction must be in (0,1)");
    if (ds.size() < 2) throw DataError("split: need at least 2 instances");

    SplitResult result;
    Rng rng(derive_seed(spec.seed, "split"));

    std::vector<std::vector<std::size_t>> by_class(2);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.targets[i] != 0)].push_back(i);

    bool stratified = spec.stratified;
    if (stratified) {
        for (const auto& cls : by_class) {
            if (cls.size() == 1) {
                result.warnings.push_back(
                    "split: a class has a single instance; falling back to plain random split");
                stratified = false;
            }
        }
    }

    std::vector<std::size_t> train_rows, test_rows;
    if (stratified) {
        for (auto& cls : by_class) {
            rng.shuffle(cls);
            const auto n_train = static_cast<std::size_t>(
                std::llround(spec.train_fraction * static_cast<double>(cls.size())));
            for (std::size_t j = 0; j < cls.size(); ++j)
                (j < n_train ? train_rows : test_rows).push_back(cls[j]);
        }
    } else {
        std::vector<std::size_t> order(ds.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        const auto n_train = static_cast<std::size_t>(
            std::llround(spec.train_fraction * static_cast<double>(order.size())));
        for (std::size_t j = 0; j < order.size(); ++j)
            (j < n_train ? train_rows : test_rows).push_back(order[j]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    result.train = take_rows(ds, train_rows);
    result.test = take_rows(ds, test_rows);
    return result;
}

LabeledDataset select_features(const LabeledDataset& ds, const std::vector<std::string>& names) {
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
        if (it == ds.feature_names.end())
            throw ConfigError("select_features: unknown feature " + name);
        cols.push_back(static_cast<std::size_t>(it - ds.feature_names.begin()));
    }
    LabeledDataset out;
    out.users = ds.users;
    out.targets = ds.targets;
    out.feature_names = names;
    out.features.reserve(ds.features.size());
    for (const auto& row : ds.features) {
        std::vector<double> slim;
        slim.reserve(cols.size());
        for (std::size_t c : cols) slim.push_back(row[c]);
        out.features.push_back(std::move(slim));
    }
    return out;
}

std::vector<std::string> graph_feature_names(const LabeledDataset& ds) {
    std::vector<std::string> names;
    for (const auto& name : ds.feature_names)
        if (name.rfind("topic_", 0) != 0) names.push_back(name);
    return names;
}

std::vector<std::string> topic_feature_names(const LabeledDataset& ds) {
    std::vector<std::string> names;
    for (const auto& name : ds.feature_names)
        if (name.rfind("topic_", 0) == 0) names.push_back(name);
    return names;
}

void write_dataset_csv(const std::filesystem::path& path, const LabeledDataset& ds,
                       const nlohmann::json& sidecar, const std::string& provenance) {
    CsvTable table;
    table.header = ds.feature_names;
    table.header.push_back("target");
    table.header.push_back("user_id");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<std::string> row;
        row.reserve(table.header.size());
        for (double v : ds.features[i]) row.push_back(format_double(v));
        row.push_back(std::to_string(ds.targets[i]));
        row.push_back(ds.users[i]);
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table, provenance);

    std::filesystem::path sidecar_path = path;
    sidecar_path.replace_extension(".json");
    write_text_file(sidecar_path, sidecar.dump(2) + "\n");
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    if (table.header.size() < 3 || table.header[table.header.size() - 2] != "target" ||
        table.header.back() != "user_id")
        throw DataError("dataset csv: unexpected header in " + path.string());
    LabeledDataset ds;
    ds.feature_names.assign(table.header.begin(), table.header.end() - 2);
    const std::size_t n_features = ds.feature_names.size();
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw DataError("dataset csv: bad row width in " + path.string());
        std::vector<double> features;
        features.reserve(n_features);
        for (std::size_t j = 0; j < n_features; ++j) features.push_back(parse_double(row[j]));
        ds.features.push_back(std::move(features));
        ds.targets.push_back(std::stoi(row[n_features]));
        ds.users.push_back(row[n_features + 1]);
    }
    return ds;
}

}  // namespace shiftscope
