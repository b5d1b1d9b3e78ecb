#pragma once

// Shared fixture builders for the unit tests.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shiftscope/graph.hpp"
#include "shiftscope/ingest.hpp"
#include "shiftscope/rng.hpp"

namespace shiftscope::testing {

// Self-deleting scratch directory.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::string name = (std::filesystem::temp_directory_path() / "shiftscope-test-XXXXXX")
                               .string();
        if (!mkdtemp(name.data())) throw std::runtime_error("mkdtemp failed");
        path = name;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::string node_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "u%03zu", i);
    return buf;
}

// Builds a graph directly from an edge list over nodes 0..n-1. Every node
// must appear in an edge somewhere unless allow_isolated is set.
inline RetweetGraph make_graph(std::size_t n, const std::vector<std::pair<int, int>>& edges,
                               std::vector<std::uint32_t> authored = {},
                               std::vector<std::uint32_t> received = {}) {
    RetweetGraph g;
    for (std::size_t i = 0; i < n; ++i) {
        g.node_ids.push_back(node_name(i));
        g.index.emplace(g.node_ids.back(), static_cast<NodeId>(i));
    }
    g.adjacency.assign(n, {});
    for (auto [u, v] : edges) {
        const auto a = static_cast<NodeId>(std::min(u, v));
        const auto b = static_cast<NodeId>(std::max(u, v));
        g.edges.emplace_back(a, b);
        g.adjacency[a].push_back(b);
        g.adjacency[b].push_back(a);
    }
    std::sort(g.edges.begin(), g.edges.end());
    for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
    g.retweets_authored = authored.empty() ? std::vector<std::uint32_t>(n, 0) : std::move(authored);
    g.retweets_received = received.empty() ? std::vector<std::uint32_t>(n, 0) : std::move(received);
    return g;
}

inline RetweetGraph complete_graph(std::size_t n) {
    std::vector<std::pair<int, int>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    return make_graph(n, edges);
}

// Planted-partition graph over the given block sizes, built directly.
inline RetweetGraph sbm_graph(const std::vector<std::size_t>& sizes, double p_in, double p_out,
                              std::uint64_t seed) {
    std::size_t n = 0;
    for (std::size_t s : sizes) n += s;
    std::vector<std::size_t> block(n);
    std::size_t at = 0;
    for (std::size_t b = 0; b < sizes.size(); ++b)
        for (std::size_t i = 0; i < sizes[b]; ++i) block[at++] = b;
    Rng rng(seed);
    std::vector<std::pair<int, int>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.bernoulli(block[i] == block[j] ? p_in : p_out))
                edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    return make_graph(n, edges);
}

inline TweetRecord record(const std::string& tweet_id, const std::string& author,
                          std::int64_t timestamp, const std::string& text,
                          std::optional<std::string> retweet_of = std::nullopt,
                          std::optional<std::string> lang = std::nullopt) {
    TweetRecord r;
    r.tweet_id = tweet_id;
    r.author_id = author;
    r.author_handle = author + "_handle";
    r.timestamp = timestamp;
    r.text = text;
    r.retweet_of_author_id = std::move(retweet_of);
    r.lang = std::move(lang);
    return r;
}

// Single-period corpus over the given records (all timestamps must fall in
// the window). Goes through split_periods so the per-user index is built by
// the real code path.
inline Corpus make_corpus(const std::vector<TweetRecord>& records,
                          PeriodWindow window = {PeriodLabel::Period1, 0, 1000000}) {
    PeriodWindow second{PeriodLabel::Period2, window.end, window.end + 1};
    return split_periods(records, window, second).first;
}

inline std::size_t connected_components(const RetweetGraph& g) {
    std::vector<char> seen(g.n_nodes(), 0);
    std::size_t components = 0;
    for (std::size_t s = 0; s < g.n_nodes(); ++s) {
        if (seen[s]) continue;
        ++components;
        std::vector<std::size_t> stack{s};
        seen[s] = 1;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (NodeId v : g.adjacency[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
        }
    }
    return components;
}

}  // namespace shiftscope::testing
