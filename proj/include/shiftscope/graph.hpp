#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "shiftscope/ingest.hpp"

namespace shiftscope {

using NodeId = std::uint32_t;

// Undirected, unweighted user graph: one edge per pair with at least one
// retweet between them. Self-retweets never form edges and isolated users
// are absent. Node indices are dense and ordered by user id so every
// derived quantity is deterministic.
struct RetweetGraph {
    std::vector<std::string> node_ids;             // dense index -> user id
    std::map<std::string, NodeId> index;           // user id -> dense index
    std::vector<std::vector<NodeId>> adjacency;    // sorted neighbor lists
    std::vector<std::pair<NodeId, NodeId>> edges;  // u < v, sorted
    std::vector<std::uint32_t> retweets_authored;  // retweet records authored by node
    std::vector<std::uint32_t> retweets_received;  // retweet records naming node as source

    std::size_t n_nodes() const { return node_ids.size(); }
    std::size_t n_edges() const { return edges.size(); }
    std::size_t degree(NodeId v) const { return adjacency[v].size(); }
};

// Throws DataError when the corpus contains no usable retweet edge.
RetweetGraph build_graph(const Corpus& c);

struct PageRankResult {
    std::vector<double> values;  // sums to 1
    int iterations = 0;
    bool converged = true;
};

PageRankResult pagerank(const RetweetGraph& g, double damping = 0.85, double tol = 1e-8,
                        int max_iter = 100);

struct BetweennessOptions {
    bool sampled = false;
    int n_pivots = 0;            // required when sampled
    std::uint64_t seed = 0;      // pivot selection
    std::size_t exact_cap = 20000;
};

// Brandes accumulation, normalized by 1/((n-1)(n-2)) over ordered pairs so a
// path midpoint scores 1. Sampled mode rescales by n/n_pivots.
std::vector<double> betweenness(const RetweetGraph& g, const BetweennessOptions& opts = {});

// Local coefficient 2*tri(v)/(deg(v)*(deg(v)-1)); 0 for degree < 2.
std::vector<double> clustering_coefficient(const RetweetGraph& g);

struct MetricsConfig {
    double damping = 0.85;
    double pagerank_tol = 1e-8;
    int pagerank_max_iter = 100;
    BetweennessOptions betweenness;
};

struct NodeMetricsTable {
    std::vector<std::uint32_t> degree;
    std::vector<double> pagerank;
    std::vector<double> betweenness;
    std::vector<double> clustering;
    bool pagerank_converged = true;
};

NodeMetricsTable node_metrics(const RetweetGraph& g, const MetricsConfig& config = {});

// Per-user view of the metrics table, keyed by user id.
struct NodeMetricsRow {
    std::uint32_t degree = 0;
    double pagerank = 0.0;
    double betweenness = 0.0;
    double clustering = 0.0;
};

std::map<std::string, NodeMetricsRow> metrics_by_user(const RetweetGraph& g,
                                                      const NodeMetricsTable& m);

void write_edge_list(const std::filesystem::path& path, const RetweetGraph& g,
                     const std::string& provenance = {});
void write_metrics_csv(const std::filesystem::path& path, const RetweetGraph& g,
                       const NodeMetricsTable& m, const std::string& provenance = {});
std::map<std::string, NodeMetricsRow> read_metrics_csv(const std::filesystem::path& path);
void write_retweet_counts_csv(const std::filesystem::path& path, const RetweetGraph& g,
                              const std::string& provenance = {});

}  // namespace shiftscope
