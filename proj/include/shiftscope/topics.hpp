#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "shiftscope/ingest.hpp"

namespace shiftscope {

// Lowercases, strips URLs / @mentions / the retweet marker / punctuation,
// keeps hashtag bodies, splits on whitespace, and drops stopwords.
// Idempotent on its own output.
std::vector<std::string> tokenize(const std::string& text,
                                  const std::set<std::string>& stopwords);

// Space-joined word n-grams of the token stream for n in [ngram_min, ngram_max].
std::vector<std::string> word_ngrams(const std::vector<std::string>& tokens, int ngram_min,
                                     int ngram_max);

struct Vocabulary {
    std::vector<std::string> terms;    // column -> term, lexicographic
    std::map<std::string, int> index;  // term -> column
    std::vector<std::int64_t> df;      // documents containing the term
    int ngram_min = 1;
    int ngram_max = 1;
    std::set<std::string> stopwords;
    int min_df = 1;

    std::size_t size() const { return terms.size(); }
};

Vocabulary build_vocabulary(const Corpus& corpus, int ngram_min, int ngram_max,
                            const std::set<std::string>& stopwords, int min_df);

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Rows = tweets in corpus order, columns = vocabulary terms.
// entry = tf * (ln((1+N)/(1+df)) + 1), rows L2-normalized.
SparseRowMatrix tfidf(const Corpus& corpus, const Vocabulary& vocab);

struct TopicModel {
    Eigen::MatrixXd h;  // tweets x k memberships
    Eigen::MatrixXd w;  // k x terms topic-term weights
    int k = 0;
    std::uint64_t seed = 0;
    double tol = 0.0;
    double m_norm = 0.0;                // Frobenius norm of the factorized matrix
    std::vector<double> error_history;  // ||M - HW||_F per iteration, first entry at init

    double relative_error() const {
        return m_norm > 0.0 ? error_history.back() / m_norm : 0.0;
    }
};

// Multiplicative-update NMF M ~ H*W from seeded uniform initialization scaled
// to sqrt(mean(M)/k). Stops when the relative error improvement drops below
// tol or after max_iter iterations.
TopicModel nmf(const SparseRowMatrix& m, int k, std::uint64_t seed, double tol = 1e-4,
               int max_iter = 200);

struct SweepEntry {
    int k = 0;
    double relative_error = 0.0;
    // per topic: top terms with weights, descending
    std::vector<std::vector<std::pair<std::string, double>>> top_terms;
};

// One NMF model per k in [k_min, k_max]; the report backs a human choice of k.
std::vector<SweepEntry> sweep_k(const SparseRowMatrix& m, const Vocabulary& vocab, int k_min,
                                int k_max, std::uint64_t seed, double tol = 1e-4,
                                int max_iter = 200, int n_top_terms = 10);

struct UserTopicProfile {
    std::vector<double> fractions;  // k entries, sum 1 when tweets_counted > 0
    std::int64_t tweets_counted = 0;
};

// Hard-assigns each tweet to its argmax topic (ties to the lowest id; rows
// whose maximum is <= min_membership are skipped) and returns per-user
// assigned-count fractions.
std::map<std::string, UserTopicProfile> user_topic_profiles(const Corpus& corpus,
                                                            const Eigen::MatrixXd& h,
                                                            double min_membership = 0.0);

// n highest-weight terms of one topic row of W, descending (ties by term).
std::vector<std::pair<std::string, double>> top_terms(const Eigen::MatrixXd& w,
                                                      const Vocabulary& vocab, int topic, int n);

std::set<std::string> read_stopwords(const std::filesystem::path& path);
void write_stopwords(const std::filesystem::path& path, const std::set<std::string>& words);

void write_vocabulary_csv(const std::filesystem::path& path, const Vocabulary& vocab,
                          const std::string& provenance = {});
// Settings (ngram range, stopwords, min_df) are not stored in the CSV; the
// caller restores them from its config.
Vocabulary read_vocabulary_csv(const std::filesystem::path& path, int ngram_min, int ngram_max,
                               std::set<std::string> stopwords, int min_df);

// header.json + h.csv + w.csv under `dir`.
void write_topic_model(const std::filesystem::path& dir, const TopicModel& model,
                       const std::string& provenance = {});
TopicModel read_topic_model(const std::filesystem::path& dir);

void write_profiles_csv(const std::filesystem::path& path,
                        const std::map<std::string, UserTopicProfile>& profiles, int k,
                        const std::string& provenance = {});
std::map<std::string, UserTopicProfile> read_profiles_csv(const std::filesystem::path& path);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepEntry>& entries,
                     const std::string& provenance = {});

}  // namespace shiftscope
