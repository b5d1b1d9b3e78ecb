#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "shiftscope/community.hpp"
#include "shiftscope/dataset.hpp"
#include "shiftscope/model.hpp"
#include "shiftscope/topics.hpp"

namespace shiftscope {

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
    double auc = 0.0;
};

// Threshold sweep with ties grouped; trapezoidal AUC (equals the
// pairwise-counting estimator with ties worth one half).
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ImportanceEntry {
    std::string feature;
    double mean_drop = 0.0;
    double std_drop = 0.0;
};

struct ImportanceReport {
    std::vector<ImportanceEntry> entries;  // sorted by mean drop, descending
    double baseline_auc = 0.0;
    int n_repeats = 0;
};

// AUC drop after shuffling one feature column at a time; permutation streams
// are derived from (seed, feature, repeat) so results do not depend on the
// thread count.
ImportanceReport permutation_importance(const GBDTModel& model, const LabeledDataset& test_set,
                                        int n_repeats, std::uint64_t seed);

struct PageRankGap {
    double mean_shifting = 0.0;
    double mean_non_shifting = 0.0;
    double ratio = 0.0;  // non-shifting / shifting
};

PageRankGap pagerank_gap(const LabeledDataset& ds);

struct CommunityTopicDistribution {
    std::map<int, std::vector<double>> weights;  // community -> normalized topic weights
    std::vector<std::string> warnings;
};

// Mean member profile per community, renormalized to sum 1.
CommunityTopicDistribution community_topic_distribution(
    const std::map<std::string, UserTopicProfile>& profiles, const ConsensusLabeling& labeling);

struct FlowArrow {
    int c1 = -1;       // origin (period-1 community)
    int c2 = -1;       // destination expressed as its period-1 counterpart
    bool stay = false;
    std::size_t count = 0;
    double pct = 0.0;  // share of the origin community's eligible users
    bool suppressed = false;               // below the arrow threshold (stays never are)
    std::vector<double> mover_topic_mean;  // mean mover profile
    std::vector<int> top_topics_by_share;  // up to 3, by mover mean fraction
    std::vector<int> top_topics_by_persuasiveness;  // up to 3, by global score
};

struct TopicFlowReport {
    std::vector<FlowArrow> arrows;                        // grouped by origin
    std::map<int, std::vector<double>> community_topics;  // per origin community
    double threshold = 0.01;
};

// Cross-period movement between matched communities among eligible users.
// Destination communities are reported by their period-1 counterparts so the
// report reads as community-to-community flow. Pass the persuasiveness scores
// to get the alternative arrow-topic ordering; otherwise it mirrors the
// share ordering.
TopicFlowReport flow_report(const ConsensusLabeling& labeling1,
                            const ConsensusLabeling& labeling2,
                            const CommunityMatching& matching,
                            const std::map<std::string, UserTopicProfile>& profiles,
                            const std::set<std::string>& eligible, double threshold = 0.01,
                            const std::vector<double>& persuasiveness_scores = {});

// score(t) = (mean fraction among shifting + smoothing) /
//            (mean fraction among non-shifting + smoothing)
std::vector<double> persuasiveness(const std::map<std::string, UserTopicProfile>& profiles,
                                   const std::map<std::string, int>& targets,
                                   double smoothing = 1e-6);

// Topic ids sorted by persuasiveness score, descending (ties to lower id).
std::vector<int> rank_topics(const std::vector<double>& scores);

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve,
                   const std::string& provenance = {});
void write_roc_svg(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, RocCurve>>& curves);
void write_importance_csv(const std::filesystem::path& path, const ImportanceReport& report,
                          const std::string& provenance = {});
void write_importance_svg(const std::filesystem::path& path, const ImportanceReport& report);
void write_flow_csv(const std::filesystem::path& path, const TopicFlowReport& report,
                    const std::string& provenance = {});
void write_flow_json(const std::filesystem::path& path, const TopicFlowReport& report,
                     const std::string& provenance = {});
void write_persuasiveness_csv(const std::filesystem::path& path,
                              const std::vector<double>& scores,
                              const std::string& provenance = {});

}  // namespace shiftscope
