#include "shiftscope/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/parallel.hpp"
#include "shiftscope/rng.hpp"

namespace shiftscope {

RetweetGraph build_graph(const Corpus& c) {
    std::set<std::pair<std::string, std::string>> pair_set;
    std::map<std::string, std::uint32_t> authored, received;
    for (const auto& r : c.records) {
        if (!r.is_retweet()) continue;
        authored[r.author_id] += 1;
        received[*r.retweet_of_author_id] += 1;
        if (r.author_id == *r.retweet_of_author_id) continue;  // self-retweet: no edge
        auto p = std::minmax(r.author_id, *r.retweet_of_author_id);
        pair_set.insert(p);
    }
    if (pair_set.empty())
        throw DataError("corpus has no retweet edges; nothing to analyze");

    RetweetGraph g;
    for (const auto& [a, b] : pair_set) {
        g.index.emplace(a, 0);
        g.index.emplace(b, 0);
    }
    g.node_ids.reserve(g.index.size());
    for (auto& [id, idx] : g.index) {
        idx = static_cast<NodeId>(g.node_ids.size());
        g.node_ids.push_back(id);
    }

    g.adjacency.resize(g.n_nodes());
    g.edges.reserve(pair_set.size());
    for (const auto& [a, b] : pair_set) {
        const NodeId u = g.index.at(a);
        const NodeId v = g.index.at(b);
        g.edges.emplace_back(std::min(u, v), std::max(u, v));
        g.adjacency[u].push_back(v);
        g.adjacency[v].push_back(u);
    }
    std::sort(g.edges.begin(), g.edges.end());
    for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());

    g.retweets_authored.assign(g.n_nodes(), 0);
    g.retweets_received.assign(g.n_nodes(), 0);
    for (const auto& [id, count] : authored) {
        auto it = g.index.find(id);
        if (it != g.index.end()) g.retweets_authored[it->second] = count;
    }
    for (const auto& [id, count] : received) {
        auto it = g.index.find(id);
        if (it != g.index.end()) g.retweets_received[it->second] = count;
    }
    return g;
}

PageRankResult pagerank(const RetweetGraph& g, double damping, double tol, int max_iter) {
    if (g.n_nodes() == 0) throw DataError("pagerank on empty graph");
    if (damping <= 0.0 || damping >= 1.0)
        throw ConfigError("pagerank damping must be in (0,1)");

    const std::size_t n = g.n_nodes();
    PageRankResult result;
    result.values.assign(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    const double teleport = (1.0 - damping) / static_cast<double>(n);

    result.converged = false;
    for (int iter = 0; iter < max_iter; ++iter) {
        for (std::size_t v = 0; v < n; ++v) {
            double sum = 0.0;
            for (NodeId u : g.adjacency[v])
                sum += result.values[u] / static_cast<double>(g.degree(u));
            next[v] = teleport + damping * sum;
        }
        double delta = 0.0;
        for (std::size_t v = 0; v < n; ++v) delta += std::abs(next[v] - result.values[v]);
        result.values.swap(next);
        result.iterations = iter + 1;
        if (delta < tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

namespace {

// Single-source Brandes pass; adds dependencies into acc.
void brandes_from(const RetweetGraph& g, NodeId source, std::vector<double>& acc) {
    const std::size_t n = g.n_nodes();
    std::vector<double> sigma(n, 0.0);  // path counts overflow integers on big graphs
    std::vector<int> dist(n, -1);
    std::vector<double> delta(n, 0.0);
    std::vector<NodeId> order;
    order.reserve(n);

    sigma[source] = 1;
    dist[source] = 0;
    std::deque<NodeId> queue{source};
    while (!queue.empty()) {
        const NodeId v = queue.front();
        queue.pop_front();
        order.push_back(v);
        for (NodeId w : g.adjacency[v]) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const NodeId w = *it;
        for (NodeId v : g.adjacency[w]) {
            if (dist[v] == dist[w] - 1 && sigma[w] > 0)
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
        if (w != source) acc[w] += delta[w];
    }
}

}  // namespace

std::vector<double> betweenness(const RetweetGraph& g, const BetweennessOptions& opts) {
    const std::size_t n = g.n_nodes();
    if (n < 3) return std::vector<double>(n, 0.0);

    std::vector<NodeId> sources;
    double rescale = 1.0;
    if (opts.sampled) {
        if (opts.n_pivots < 1) throw ConfigError("sampled betweenness needs n_pivots >= 1");
        Rng rng(derive_seed(opts.seed, "betweenness-pivots"));
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(opts.n_pivots), n);
        for (std::size_t i : rng.sample_without_replacement(n, k))
            sources.push_back(static_cast<NodeId>(i));
        rescale = static_cast<double>(n) / static_cast<double>(sources.size());
    } else {
        if (n > opts.exact_cap)
            throw ConfigError("graph too large for exact betweenness (" + std::to_string(n) +
                              " nodes > cap " + std::to_string(opts.exact_cap) +
                              "); use sampled mode");
        sources.resize(n);
        for (std::size_t i = 0; i < n; ++i) sources[i] = static_cast<NodeId>(i);
    }

    // Per-chunk partials merged in chunk order: bit-stable for any thread count.
    const std::size_t chunks = chunk_count(sources.size());
    std::vector<std::vector<double>> partial(chunks);
    parallel_chunks(sources.size(), [&](std::size_t c, std::size_t lo, std::size_t hi) {
        partial[c].assign(n, 0.0);
        for (std::size_t i = lo; i < hi; ++i) brandes_from(g, sources[i], partial[c]);
    });

    std::vector<double> acc(n, 0.0);
    for (std::size_t c = 0; c < chunks; ++c)
        for (std::size_t v = 0; v < n; ++v) acc[v] += partial[c][v];

    const double norm =
        rescale / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
    for (auto& v : acc) v *= norm;
    return acc;
}

std::vector<double> clustering_coefficient(const RetweetGraph& g) {
    const std::size_t n = g.n_nodes();
    std::vector<double> cc(n, 0.0);
    parallel_for(n, [&](std::size_t v) {
        const auto& nbrs = g.adjacency[v];
        const std::size_t d = nbrs.size();
        if (d < 2) return;
        std::size_t links = 0;
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i + 1; j < d; ++j) {
                const auto& a = g.adjacency[nbrs[i]];
                if (std::binary_search(a.begin(), a.end(), nbrs[j])) ++links;
            }
        }
        cc[v] = 2.0 * static_cast<double>(links) /
                (static_cast<double>(d) * static_cast<double>(d - 1));
    });
    return cc;
}

NodeMetricsTable node_metrics(const RetweetGraph& g, const MetricsConfig& config) {
    if (g.n_nodes() == 0) throw DataError("node metrics on empty graph");
    NodeMetricsTable table;
    table.degree.reserve(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v)
        table.degree.push_back(static_cast<std::uint32_t>(g.degree(v)));
    auto pr = pagerank(g, config.damping, config.pagerank_tol, config.pagerank_max_iter);
    table.pagerank = std::move(pr.values);
    table.pagerank_converged = pr.converged;
    table.betweenness = betweenness(g, config.betweenness);
    table.clustering = clustering_coefficient(g);
    return table;
}

std::map<std::string, NodeMetricsRow> metrics_by_user(const RetweetGraph& g,
                                                      const NodeMetricsTable& m) {
    std::map<std::string, NodeMetricsRow> out;
    for (NodeId v = 0; v < g.n_nodes(); ++v)
        out.emplace(g.node_ids[v],
                    NodeMetricsRow{m.degree[v], m.pagerank[v], m.betweenness[v],
                                   m.clustering[v]});
    return out;
}

void write_edge_list(const std::filesystem::path& path, const RetweetGraph& g,
                     const std::string& provenance) {
    // Lexicographic by user id, "u v" per line.
    std::vector<std::pair<std::string, std::string>> lines;
    lines.reserve(g.n_edges());
    for (const auto& [u, v] : g.edges) {
        auto p = std::minmax(g.node_ids[u], g.node_ids[v]);
        lines.push_back(p);
    }
    std::sort(lines.begin(), lines.end());
    std::ostringstream out;
    if (!provenance.empty()) out << "# " << provenance << "\n";
    for (const auto& [a, b] : lines) out << a << ' ' << b << '\n';
    write_text_file(path, out.str());
}

void write_metrics_csv(const std::filesystem::path& path, const RetweetGraph& g,
                       const NodeMetricsTable& m, const std::string& provenance) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        rows.push_back({g.node_ids[v], std::to_string(m.degree[v]),
                        format_double(m.pagerank[v]), format_double(m.betweenness[v]),
                        format_double(m.clustering[v])});
    }
    write_csv(path, provenance, {"node", "degree", "pagerank", "betweenness", "clustering"},
              rows);
}

std::map<std::string, NodeMetricsRow> read_metrics_csv(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    std::map<std::string, NodeMetricsRow> out;
    for (const auto& row : table.rows) {
        if (row.size() != 5) throw DataError("metrics csv: bad row width in " + path.string());
        NodeMetricsRow r;
        r.degree = static_cast<std::uint32_t>(std::stoul(row[1]));
        r.pagerank = parse_double(row[2]);
        r.betweenness = parse_double(row[3]);
        r.clustering = parse_double(row[4]);
        out.emplace(row[0], r);
    }
    return out;
}

void write_retweet_counts_csv(const std::filesystem::path& path, const RetweetGraph& g,
                              const std::string& provenance) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        rows.push_back({g.node_ids[v], std::to_string(g.retweets_authored[v]),
                        std::to_string(g.retweets_received[v])});
    }
    write_csv(path, provenance, {"node", "retweets_authored", "retweets_received"}, rows);
}

}  // namespace shiftscope
