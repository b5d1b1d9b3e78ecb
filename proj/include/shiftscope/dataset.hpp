#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shiftscope/community.hpp"
#include "shiftscope/graph.hpp"
#include "shiftscope/topics.hpp"

namespace shiftscope {

struct LabeledDataset {
    std::vector<std::string> users;            // one per instance, ascending
    std::vector<std::vector<double>> features; // row per instance
    std::vector<int> targets;                  // 0 = stayed, 1 = shifted
    std::vector<std::string> feature_names;

    std::size_t size() const { return users.size(); }
    std::size_t n_features() const { return feature_names.size(); }
};

// 0 iff the user's period-2 community is the match of their period-1 one.
int label_shift(const std::string& user, const ConsensusLabeling& labeling1,
                const ConsensusLabeling& labeling2, const CommunityMatching& matching);

// Feature layout: degree, pagerank, betweenness, clustering, one-hot over the
// top_k period-1 communities (by size rank), k topic fractions. All features
// come from period 1; the target comes from the period-2 affiliation.
LabeledDataset assemble(const std::map<std::string, NodeMetricsRow>& metrics1,
                        const ConsensusLabeling& labeling1,
                        const std::map<std::string, UserTopicProfile>& profiles,
                        const std::set<std::string>& eligible,
                        const CommunityMatching& matching, const ConsensusLabeling& labeling2,
                        int n_topics);

struct SplitSpec {
    double train_fraction = 0.67;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct SplitResult {
    LabeledDataset train;
    LabeledDataset test;
    std::vector<std::string> warnings;
};

SplitResult split(const LabeledDataset& ds, const SplitSpec& spec);

// Column projection by feature name, preserving the given order.
LabeledDataset select_features(const LabeledDataset& ds, const std::vector<std::string>& names);

// Names of the graph-feature block (metrics + community one-hot) and the
// text-feature block (topic fractions).
std::vector<std::string> graph_feature_names(const LabeledDataset& ds);
std::vector<std::string> topic_feature_names(const LabeledDataset& ds);

void write_dataset_csv(const std::filesystem::path& path, const LabeledDataset& ds,
                       const nlohmann::json& sidecar, const std::string& provenance = {});
LabeledDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace shiftscope
