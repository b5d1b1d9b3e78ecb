#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "shiftscope/graph.hpp"

namespace shiftscope {

struct Partition {
    std::vector<int> assignment;  // node index -> community id, contiguous from 0
    double modularity_q = 0.0;
    int n_communities = 0;
};

// Q = sum_c [ e_c/m - (d_c/2m)^2 ] on the unweighted graph.
double modularity(const RetweetGraph& g, const std::vector<int>& assignment);

// Two-phase greedy modularity maximization. Node visit order is reshuffled
// from the seed on every pass; tie gains go to the lowest community id.
Partition louvain(const RetweetGraph& g, std::uint64_t seed);

struct ConsensusLabeling {
    int runs = 0;
    std::map<std::string, int> stable;  // user id -> aligned community id
    std::set<std::string> unstable;

    // (community, stable member count), largest first, ties to lower id.
    std::vector<std::pair<int, std::size_t>> community_sizes() const;
};

// Runs louvain with seeds base_seed .. base_seed+n_runs-1, aligns every run
// to run 0 by greedy maximum overlap, and keeps nodes labeled identically
// across all runs.
ConsensusLabeling consensus(const RetweetGraph& g, int n_runs, std::uint64_t base_seed);

enum class RetweetCountMode { Authored, Received };

struct EligibleOptions {
    int min_retweets = 5;
    int top_k = 2;
    RetweetCountMode mode = RetweetCountMode::Authored;
};

// Users stable in both periods, with enough period-1 retweets, whose stable
// communities fall in each period's top_k largest.
std::set<std::string> eligible_users(const ConsensusLabeling& labeling1,
                                     const ConsensusLabeling& labeling2,
                                     const RetweetGraph& g1, const RetweetGraph& g2,
                                     const EligibleOptions& opts);

struct CommunityMatching {
    struct Pair {
        int c1 = -1;
        int c2 = -1;
        double jaccard = 0.0;
        std::size_t size1 = 0;  // stable members in period 1
        std::size_t size2 = 0;
    };
    std::vector<Pair> pairs;  // ordered by period-1 community size rank
    std::vector<int> unmatched1, unmatched2;
    std::vector<std::string> warnings;

    int match_of(int c1) const;       // period-2 community matched to c1
    int period1_of(int c2) const;     // inverse
    bool has_period1(int c1) const;
    bool has_period2(int c2) const;
};

// One-to-one assignment between each period's top_k communities maximizing
// total Jaccard overlap of shared stable users (exhaustive over the k!
// permutations; k is small).
CommunityMatching match_communities(const ConsensusLabeling& labeling1,
                                    const ConsensusLabeling& labeling2, int top_k);

void write_labeling_csv(const std::filesystem::path& path, const ConsensusLabeling& labeling,
                        PeriodLabel period, const std::string& provenance = {});
ConsensusLabeling read_labeling_csv(const std::filesystem::path& path);

void write_matching_csv(const std::filesystem::path& path, const CommunityMatching& matching,
                        const std::string& provenance = {});
CommunityMatching read_matching_csv(const std::filesystem::path& path);

}  // namespace shiftscope
