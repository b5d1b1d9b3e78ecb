#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shiftscope/ingest.hpp"

namespace shiftscope {

// Planted two-period corpus generator: SBM retweet graphs, bag-of-words
// tweets from per-user topic mixtures, and a logistic shift model that makes
// low-centrality, persuasive-topic-heavy users change communities.
struct SynthConfig {
    std::vector<std::size_t> community_sizes;
    double p_in = 0.02;
    double p_out = 0.001;

    int n_topics = 6;
    int terms_per_topic = 30;
    int n_filler_terms = 12;        // stopword-like shared terms
    double filler_word_rate = 0.3;  // chance a tweet word is filler
    double topic_alpha = 0.3;       // Dirichlet prior of user mixtures
    // Per-community additive Dirichlet boost on the persuasive topics; lets
    // some communities lean into the persuasive topics more than others.
    std::vector<double> persuasive_alpha_boost;

    std::pair<int, int> tweets_per_user{8, 16};
    std::pair<int, int> words_per_tweet{6, 12};
    std::pair<int, int> retweets_per_edge{1, 3};  // authored per endpoint

    std::vector<int> persuasive_topics{0};
    double base_shift_logodds = -2.2;
    double coef_pagerank_rank = -3.0;  // on within-community degree rank in [0,1]
    double coef_persuasive = 3.0;      // on the user's persuasive mixture mass

    PeriodWindow window1{PeriodLabel::Period1, 100000, 200000};
    PeriodWindow window2{PeriodLabel::Period2, 200000, 300000};
    std::uint64_t seed = 0;
};

// 2 communities x 500 users; shifting driven by centrality and individual
// persuasive-topic usage.
SynthConfig two_community_config();
// 4 communities of 400-600 users with the two smaller ones leaning into the
// persuasive topic, so community membership alone carries shift signal.
SynthConfig four_community_config();
// Tiny corpus for fast integration tests.
SynthConfig mini_config();

struct GroundTruthRow {
    std::string user;
    int community1 = -1;
    int community2 = -1;
    bool shifted = false;
    std::vector<double> mixture;
};

struct GroundTruth {
    std::vector<GroundTruthRow> rows;  // ascending by user id
    double expected_shift_fraction = 0.0;
    std::size_t realized_shifters = 0;
};

struct SynthResult {
    Corpus corpus1;
    Corpus corpus2;
    GroundTruth truth;
    std::vector<std::string> filler_terms;  // the stopword list to use downstream
};

SynthResult generate(const SynthConfig& config);

void write_ground_truth_csv(const std::filesystem::path& path, const GroundTruth& truth,
                            const std::string& provenance = {});

}  // namespace shiftscope
