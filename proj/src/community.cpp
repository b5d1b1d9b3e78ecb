#include "shiftscope/community.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/parallel.hpp"
#include "shiftscope/rng.hpp"

namespace shiftscope {

double modularity(const RetweetGraph& g, const std::vector<int>& assignment) {
    const std::size_t n = g.n_nodes();
    if (assignment.size() != n)
        throw ContractViolation("modularity: assignment covers " +
                                std::to_string(assignment.size()) + " of " + std::to_string(n) +
                                " nodes");
    for (int c : assignment)
        if (c < 0) throw ContractViolation("modularity: node without community");
    const double m = static_cast<double>(g.n_edges());
    if (m == 0.0) throw DataError("modularity: graph has no edges");

    int n_comm = 1 + *std::max_element(assignment.begin(), assignment.end());
    std::vector<double> intra(n_comm, 0.0);  // e_c: edges inside community c
    std::vector<double> dsum(n_comm, 0.0);   // d_c: summed degree of community c
    for (const auto& [u, v] : g.edges)
        if (assignment[u] == assignment[v]) intra[assignment[u]] += 1.0;
    for (std::size_t v = 0; v < n; ++v)
        dsum[assignment[v]] += static_cast<double>(g.degree(static_cast<NodeId>(v)));

    double q = 0.0;
    for (int c = 0; c < n_comm; ++c) {
        const double frac = dsum[c] / (2.0 * m);
        q += intra[c] / m - frac * frac;
    }
    return q;
}

namespace {

// Aggregated graph in adjacency-matrix convention: self[v] is the diagonal
// entry A_vv (twice the collapsed intra-community weight), so strength
// k_v = self[v] + sum of neighbor weights and 2m = sum of strengths.
struct LevelGraph {
    std::vector<std::vector<std::pair<int, double>>> adj;  // off-diagonal, no duplicates
    std::vector<double> self;
    std::vector<double> strength;
    double two_m = 0.0;

    std::size_t size() const { return adj.size(); }
};

LevelGraph level_from(const RetweetGraph& g) {
    LevelGraph lg;
    const std::size_t n = g.n_nodes();
    lg.adj.resize(n);
    lg.self.assign(n, 0.0);
    lg.strength.assign(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        lg.adj[v].reserve(g.adjacency[v].size());
        for (NodeId u : g.adjacency[v]) lg.adj[v].emplace_back(static_cast<int>(u), 1.0);
        lg.strength[v] = static_cast<double>(g.degree(static_cast<NodeId>(v)));
        lg.two_m += lg.strength[v];
    }
    return lg;
}

// One sweep phase: move nodes between communities while any move improves Q.
// Returns the local assignment (community ids renumbered contiguously) and
// whether anything moved at all.
struct SweepResult {
    std::vector<int> assignment;
    bool moved = false;
};

SweepResult sweep(const LevelGraph& lg, Rng& rng) {
    const std::size_t n = lg.size();
    std::vector<int> comm(n);
    std::iota(comm.begin(), comm.end(), 0);
    std::vector<double> tot(lg.strength);  // summed strength per community

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> link(n, 0.0);  // community -> weight from current node
    std::vector<int> touched;
    bool any_move = false;

    const int max_passes = 128;
    for (int pass = 0; pass < max_passes; ++pass) {
        rng.shuffle(order);
        std::size_t moves = 0;
        for (std::size_t idx : order) {
            const int old_c = comm[idx];
            touched.clear();
            link[old_c] = 0.0;
            touched.push_back(old_c);
            for (const auto& [nbr, w] : lg.adj[idx]) {
                const int c = comm[nbr];
                if (link[c] == 0.0 && c != old_c) touched.push_back(c);
                link[c] += w;
            }
            tot[old_c] -= lg.strength[idx];

            // Gain of joining community c (node detached): proportional to
            // link[c] - tot[c] * k_idx / 2m. Candidates scanned in ascending
            // community id so equal gains keep the lowest id.
            std::sort(touched.begin(), touched.end());
            const double scale = lg.strength[idx] / lg.two_m;
            int best_c = old_c;
            double best_gain = link[old_c] - tot[old_c] * scale;
            for (int c : touched) {
                if (c == old_c) continue;
                const double gain = link[c] - tot[c] * scale;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_c = c;
                }
            }

            tot[best_c] += lg.strength[idx];
            comm[idx] = best_c;
            for (int c : touched) link[c] = 0.0;
            if (best_c != old_c) ++moves;
        }
        if (moves == 0) break;
        any_move = true;
    }

    // Renumber by first appearance in node order.
    std::vector<int> remap(n, -1);
    int next = 0;
    SweepResult out;
    out.assignment.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (remap[comm[v]] < 0) remap[comm[v]] = next++;
        out.assignment[v] = remap[comm[v]];
    }
    out.moved = any_move;
    return out;
}

LevelGraph aggregate(const LevelGraph& lg, const std::vector<int>& assignment, int n_comm) {
    LevelGraph next;
    next.adj.resize(static_cast<std::size_t>(n_comm));
    next.self.assign(static_cast<std::size_t>(n_comm), 0.0);
    next.strength.assign(static_cast<std::size_t>(n_comm), 0.0);
    next.two_m = lg.two_m;

    std::vector<std::map<int, double>> acc(static_cast<std::size_t>(n_comm));
    for (std::size_t v = 0; v < lg.size(); ++v) {
        const int cv = assignment[v];
        next.self[cv] += lg.self[v];
        for (const auto& [u, w] : lg.adj[v]) {
            const int cu = assignment[u];
            if (cu == cv)
                next.self[cv] += w;  // both directions visited, so this sums to A_cc
            else
                acc[cv][cu] += w;
        }
    }
    for (int c = 0; c < n_comm; ++c) {
        auto& row = next.adj[c];
        row.reserve(acc[c].size());
        for (const auto& [u, w] : acc[c]) row.emplace_back(u, w);
        next.strength[c] =
            next.self[c] +
            std::accumulate(row.begin(), row.end(), 0.0,
                            [](double s, const auto& p) { return s + p.second; });
    }
    return next;
}

}  // namespace

Partition louvain(const RetweetGraph& g, std::uint64_t seed) {
    if (g.n_edges() == 0) throw DataError("louvain: graph has no edges");
    const std::size_t n = g.n_nodes();
    Rng rng(derive_seed(seed, "louvain"));

    std::vector<int> assignment(n);
    std::iota(assignment.begin(), assignment.end(), 0);

    LevelGraph lg = level_from(g);
    while (true) {
        SweepResult res = sweep(lg, rng);
        if (!res.moved) break;
        for (std::size_t v = 0; v < n; ++v) assignment[v] = res.assignment[assignment[v]];
        const int n_comm = 1 + *std::max_element(res.assignment.begin(), res.assignment.end());
        if (static_cast<std::size_t>(n_comm) == lg.size()) break;
        lg = aggregate(lg, res.assignment, n_comm);
    }

    // Renumber composed ids by first appearance for a stable contiguous range.
    std::map<int, int> remap;
    Partition part;
    part.assignment.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        auto [it, inserted] = remap.emplace(assignment[v], static_cast<int>(remap.size()));
        part.assignment[v] = it->second;
    }
    part.n_communities = static_cast<int>(remap.size());
    part.modularity_q = modularity(g, part.assignment);
    return part;
}

namespace {

// Relabels `run` onto `reference` communities by repeatedly matching the pair
// with the largest member overlap. Leftover communities get fresh ids above
// the reference range.
std::vector<int> align_to(const Partition& reference, const Partition& run) {
    const int nr = run.n_communities;
    const int n0 = reference.n_communities;
    std::vector<std::vector<std::size_t>> overlap(static_cast<std::size_t>(nr),
                                                  std::vector<std::size_t>(n0, 0));
    for (std::size_t v = 0; v < run.assignment.size(); ++v)
        ++overlap[run.assignment[v]][reference.assignment[v]];

    std::vector<int> mapping(static_cast<std::size_t>(nr), -1);
    std::vector<bool> run_done(static_cast<std::size_t>(nr), false);
    std::vector<bool> ref_done(static_cast<std::size_t>(n0), false);
    const int rounds = std::min(nr, n0);
    for (int round = 0; round < rounds; ++round) {
        std::size_t best = 0;
        int bi = -1, bj = -1;
        for (int i = 0; i < nr; ++i) {
            if (run_done[i]) continue;
            for (int j = 0; j < n0; ++j) {
                if (ref_done[j]) continue;
                if (overlap[i][j] > best) {
                    best = overlap[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi < 0) break;  // all remaining overlaps empty
        mapping[bi] = bj;
        run_done[bi] = true;
        ref_done[bj] = true;
    }
    int next_fresh = n0;
    for (int i = 0; i < nr; ++i)
        if (mapping[i] < 0) mapping[i] = next_fresh++;
    return mapping;
}

}  // namespace

ConsensusLabeling consensus(const RetweetGraph& g, int n_runs, std::uint64_t base_seed) {
    if (n_runs < 2)
        throw ConfigError("consensus: need at least 2 runs, got " + std::to_string(n_runs));

    std::vector<Partition> runs(static_cast<std::size_t>(n_runs));
    parallel_for(static_cast<std::size_t>(n_runs), [&](std::size_t r) {
        runs[r] = louvain(g, base_seed + static_cast<std::uint64_t>(r));
    });

    const std::size_t n = g.n_nodes();
    std::vector<std::vector<int>> labels(static_cast<std::size_t>(n_runs),
                                         std::vector<int>(n));
    labels[0] = runs[0].assignment;
    for (int r = 1; r < n_runs; ++r) {
        const std::vector<int> mapping = align_to(runs[0], runs[static_cast<std::size_t>(r)]);
        for (std::size_t v = 0; v < n; ++v)
            labels[r][v] = mapping[runs[static_cast<std::size_t>(r)].assignment[v]];
    }

    ConsensusLabeling out;
    out.runs = n_runs;
    for (std::size_t v = 0; v < n; ++v) {
        bool stable = true;
        for (int r = 1; r < n_runs && stable; ++r) stable = labels[r][v] == labels[0][v];
        if (stable)
            out.stable.emplace(g.node_ids[v], labels[0][v]);
        else
            out.unstable.insert(g.node_ids[v]);
    }
    return out;
}

std::vector<std::pair<int, std::size_t>> ConsensusLabeling::community_sizes() const {
    std::map<int, std::size_t> counts;
    for (const auto& [user, c] : stable) ++counts[c];
    std::vector<std::pair<int, std::size_t>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

namespace {

std::set<int> top_communities(const ConsensusLabeling& labeling, int top_k, const char* which) {
    auto sizes = labeling.community_sizes();
    if (static_cast<int>(sizes.size()) < top_k) {
        std::ostringstream msg;
        msg << which << " labeling has " << sizes.size() << " stable communities but top_k="
            << top_k << " (sizes:";
        for (const auto& [c, s] : sizes) msg << ' ' << c << ':' << s;
        msg << ')';
        throw ConfigError(msg.str());
    }
    std::set<int> top;
    for (int i = 0; i < top_k; ++i) top.insert(sizes[static_cast<std::size_t>(i)].first);
    return top;
}

}  // namespace

std::set<std::string> eligible_users(const ConsensusLabeling& labeling1,
                                     const ConsensusLabeling& labeling2,
                                     const RetweetGraph& g1, const RetweetGraph& g2,
                                     const EligibleOptions& opts) {
    if (opts.min_retweets < 0) throw ConfigError("eligible_users: min_retweets must be >= 0");
    if (opts.top_k < 1) throw ConfigError("eligible_users: top_k must be >= 1");
    const std::set<int> top1 = top_communities(labeling1, opts.top_k, "period-1");
    const std::set<int> top2 = top_communities(labeling2, opts.top_k, "period-2");

    std::set<std::string> out;
    for (const auto& [user, c1] : labeling1.stable) {
        if (!top1.count(c1)) continue;
        auto it2 = labeling2.stable.find(user);
        if (it2 == labeling2.stable.end() || !top2.count(it2->second)) continue;
        auto g1_it = g1.index.find(user);
        if (g1_it == g1.index.end() || g2.index.find(user) == g2.index.end()) continue;
        const std::uint32_t count = opts.mode == RetweetCountMode::Authored
                                        ? g1.retweets_authored[g1_it->second]
                                        : g1.retweets_received[g1_it->second];
        if (count < static_cast<std::uint32_t>(opts.min_retweets)) continue;
        out.insert(user);
    }
    return out;
}

int CommunityMatching::match_of(int c1) const {
    for (const auto& p : pairs)
        if (p.c1 == c1) return p.c2;
    throw ContractViolation("match_of: period-1 community " + std::to_string(c1) +
                            " is not matched");
}

int CommunityMatching::period1_of(int c2) const {
    for (const auto& p : pairs)
        if (p.c2 == c2) return p.c1;
    throw ContractViolation("period1_of: period-2 community " + std::to_string(c2) +
                            " is not matched");
}

bool CommunityMatching::has_period1(int c1) const {
    for (const auto& p : pairs)
        if (p.c1 == c1) return true;
    return false;
}

bool CommunityMatching::has_period2(int c2) const {
    for (const auto& p : pairs)
        if (p.c2 == c2) return true;
    return false;
}

CommunityMatching match_communities(const ConsensusLabeling& labeling1,
                                    const ConsensusLabeling& labeling2, int top_k) {
    if (top_k < 1) throw ConfigError("match_communities: top_k must be >= 1");
    if (top_k > 8)
        throw ConfigError("match_communities: top_k=" + std::to_string(top_k) +
                          " exceeds the exhaustive-matching cap of 8");
    const auto sizes1 = labeling1.community_sizes();
    const auto sizes2 = labeling2.community_sizes();
    top_communities(labeling1, top_k, "period-1");  // validation only
    top_communities(labeling2, top_k, "period-2");

    std::vector<int> top1, top2;
    for (int i = 0; i < top_k; ++i) {
        top1.push_back(sizes1[static_cast<std::size_t>(i)].first);
        top2.push_back(sizes2[static_cast<std::size_t>(i)].first);
    }

    // Users stable in both periods form the overlap universe.
    std::vector<std::set<const std::string*>> members1(static_cast<std::size_t>(top_k));
    std::vector<std::set<const std::string*>> members2(static_cast<std::size_t>(top_k));
    for (const auto& [user, c1] : labeling1.stable) {
        auto it2 = labeling2.stable.find(user);
        if (it2 == labeling2.stable.end()) continue;
        for (int i = 0; i < top_k; ++i)
            if (top1[static_cast<std::size_t>(i)] == c1)
                members1[static_cast<std::size_t>(i)].insert(&it2->first);
        for (int j = 0; j < top_k; ++j)
            if (top2[static_cast<std::size_t>(j)] == it2->second)
                members2[static_cast<std::size_t>(j)].insert(&it2->first);
    }

    auto jaccard = [&](int i, int j) {
        const auto& a = members1[static_cast<std::size_t>(i)];
        const auto& b = members2[static_cast<std::size_t>(j)];
        if (a.empty() && b.empty()) return 0.0;
        std::size_t inter = 0;
        for (const std::string* u : a) inter += b.count(u);
        const std::size_t uni = a.size() + b.size() - inter;
        return static_cast<double>(inter) / static_cast<double>(uni);
    };

    std::vector<std::vector<double>> jac(static_cast<std::size_t>(top_k),
                                         std::vector<double>(static_cast<std::size_t>(top_k)));
    for (int i = 0; i < top_k; ++i)
        for (int j = 0; j < top_k; ++j)
            jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = jaccard(i, j);

    std::vector<int> perm(static_cast<std::size_t>(top_k));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best_perm = perm;
    double best_total = -1.0;
    do {
        double total = 0.0;
        for (int i = 0; i < top_k; ++i)
            total += jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(perm[i])];
        if (total > best_total) {
            best_total = total;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    CommunityMatching out;
    auto full_size = [](const std::vector<std::pair<int, std::size_t>>& sizes, int c) {
        for (const auto& [cc, s] : sizes)
            if (cc == c) return s;
        return std::size_t{0};
    };
    for (int i = 0; i < top_k; ++i) {
        CommunityMatching::Pair p;
        p.c1 = top1[static_cast<std::size_t>(i)];
        p.c2 = top2[static_cast<std::size_t>(best_perm[i])];
        p.jaccard = jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_perm[i])];
        p.size1 = full_size(sizes1, p.c1);
        p.size2 = full_size(sizes2, p.c2);
        if (p.jaccard < 0.05) {
            std::ostringstream msg;
            msg << "weak community match: period-1 community " << p.c1
                << " vs period-2 community " << p.c2 << " has jaccard "
                << format_double(p.jaccard) << " (< 0.05)";
            out.warnings.push_back(msg.str());
        }
        out.pairs.push_back(p);
    }
    for (std::size_t i = static_cast<std::size_t>(top_k); i < sizes1.size(); ++i)
        out.unmatched1.push_back(sizes1[i].first);
    for (std::size_t j = static_cast<std::size_t>(top_k); j < sizes2.size(); ++j)
        out.unmatched2.push_back(sizes2[j].first);
    return out;
}

void write_labeling_csv(const std::filesystem::path& path, const ConsensusLabeling& labeling,
                        PeriodLabel period, const std::string& provenance) {
    CsvTable table;
    table.header = {"user", "period", "community", "stable", "runs"};
    const std::string period_str = period == PeriodLabel::Period1 ? "1" : "2";
    const std::string runs_str = std::to_string(labeling.runs);
    for (const auto& [user, c] : labeling.stable)
        table.rows.push_back({user, period_str, std::to_string(c), "1", runs_str});
    for (const auto& user : labeling.unstable)
        table.rows.push_back({user, period_str, "-1", "0", runs_str});
    std::sort(table.rows.begin(), table.rows.end());
    write_csv(path, table, provenance);
}

ConsensusLabeling read_labeling_csv(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    ConsensusLabeling out;
    for (const auto& row : table.rows) {
        if (row.size() != 5) throw DataError("labeling csv: bad row width in " + path.string());
        out.runs = std::stoi(row[4]);
        if (row[3] == "1")
            out.stable.emplace(row[0], std::stoi(row[2]));
        else
            out.unstable.insert(row[0]);
    }
    return out;
}

void write_matching_csv(const std::filesystem::path& path, const CommunityMatching& matching,
                        const std::string& provenance) {
    CsvTable table;
    table.header = {"community_p1", "community_p2", "jaccard", "size_p1", "size_p2"};
    for (const auto& p : matching.pairs)
        table.rows.push_back({std::to_string(p.c1), std::to_string(p.c2),
                              format_double(p.jaccard), std::to_string(p.size1),
                              std::to_string(p.size2)});
    write_csv(path, table, provenance);
}

CommunityMatching read_matching_csv(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    CommunityMatching out;
    for (const auto& row : table.rows) {
        if (row.size() != 5) throw DataError("matching csv: bad row width in " + path.string());
        CommunityMatching::Pair p;
        p.c1 = std::stoi(row[0]);
        p.c2 = std::stoi(row[1]);
        p.jaccard = parse_double(row[2]);
        p.size1 = static_cast<std::size_t>(std::stoull(row[3]));
        p.size2 = static_cast<std::size_t>(std::stoull(row[4]));
        out.pairs.push_back(p);
    }
    return out;
}

}  // namespace shiftscope
