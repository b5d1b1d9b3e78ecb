#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/csvio.hpp"
#include "shiftscope/graph.hpp"

using namespace shiftscope;
using namespace shiftscope::testing;

namespace {

Corpus retweet_corpus(const std::vector<std::pair<std::string, std::string>>& retweets) {
    std::vector<TweetRecord> records;
    int id = 0;
    for (const auto& [author, source] : retweets) {
        ++id;
        records.push_back(record(std::to_string(id), author, 100 + id, "rt", source));
    }
    return make_corpus(records);
}

}  // namespace

TEST_CASE("build_graph collapses repeated retweets into one edge") {
    const Corpus corpus = retweet_corpus({{"u1", "u2"}, {"u1", "u2"}, {"u1", "u2"}});
    const RetweetGraph g = build_graph(corpus);
    CHECK(g.n_nodes() == 2);
    CHECK(g.n_edges() == 1);
    CHECK(g.retweets_authored[g.index.at("u1")] == 3);
    CHECK(g.retweets_received[g.index.at("u2")] == 3);
}

TEST_CASE("build_graph ignores self-retweets") {
    const Corpus corpus = retweet_corpus({{"u1", "u1"}, {"u1", "u2"}});
    const RetweetGraph g = build_graph(corpus);
    CHECK(g.n_nodes() == 2);
    CHECK(g.n_edges() == 1);
    // The self-retweet still counts as an authored retweet record.
    CHECK(g.retweets_authored[g.index.at("u1")] == 2);
}

TEST_CASE("build_graph on (a,b),(b,c),(a,b) yields 3 nodes and 2 edges") {
    const Corpus corpus = retweet_corpus({{"a", "b"}, {"b", "c"}, {"a", "b"}});
    const RetweetGraph g = build_graph(corpus);
    CHECK(g.n_nodes() == 3);
    CHECK(g.n_edges() == 2);
    CHECK(g.degree(g.index.at("b")) == 2);
}

TEST_CASE("build_graph ignores plain tweets and requires at least one edge") {
    std::vector<TweetRecord> records = {record("1", "u1", 100, "no retweet")};
    CHECK_THROWS_AS(build_graph(make_corpus(records)), DataError);
    records.push_back(record("2", "u2", 110, "rt", "u3"));
    const RetweetGraph g = build_graph(make_corpus(records));
    CHECK(g.n_nodes() == 2);  // the plain tweet's author creates no node
    CHECK_FALSE(g.index.count("u1"));
}

TEST_CASE("node ordering and edge lists are deterministic and sorted") {
    const Corpus corpus = retweet_corpus({{"zed", "alice"}, {"mid", "zed"}, {"alice", "mid"}});
    const RetweetGraph g = build_graph(corpus);
    CHECK(g.node_ids == std::vector<std::string>{"alice", "mid", "zed"});
    for (const auto& [u, v] : g.edges) CHECK(u < v);
    CHECK(std::is_sorted(g.edges.begin(), g.edges.end()));
}

TEST_CASE("pagerank on a triangle is uniform") {
    const RetweetGraph g = complete_graph(3);
    const PageRankResult pr = pagerank(g);
    REQUIRE(pr.values.size() == 3);
    for (double v : pr.values) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(pr.converged);
}

TEST_CASE("pagerank on a 3-path matches the closed-form values") {
    const RetweetGraph g = make_graph(3, {{0, 1}, {1, 2}});
    const PageRankResult pr = pagerank(g, 0.85, 1e-12, 200);
    CHECK(pr.values[0] == doctest::Approx(0.2568).epsilon(1e-3));
    CHECK(pr.values[1] == doctest::Approx(0.4864).epsilon(1e-3));
    CHECK(pr.values[2] == doctest::Approx(0.2568).epsilon(1e-3));
}

TEST_CASE("pagerank spreads evenly over two disconnected dyads") {
    const RetweetGraph g = make_graph(4, {{0, 1}, {2, 3}});
    const PageRankResult pr = pagerank(g);
    for (double v : pr.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("pagerank sums to one and matches the dense oracle on an SBM graph") {
    const RetweetGraph g = sbm_graph({40, 35}, 0.25, 0.02, 99);
    const PageRankResult pr = pagerank(g, 0.85, 1e-14, 300);
    const double total = std::accumulate(pr.values.begin(), pr.values.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    const std::vector<double> oracle = dense_pagerank(g, 0.85);
    for (std::size_t i = 0; i < pr.values.size(); ++i)
        CHECK(std::abs(pr.values[i] - (oracle[i])) < 1e-6);
}

TEST_CASE("pagerank validates damping") {
    const RetweetGraph g = complete_graph(3);
    CHECK_THROWS_AS(pagerank(g, 0.0), ConfigError);
    CHECK_THROWS_AS(pagerank(g, 1.0), ConfigError);
}

TEST_CASE("betweenness of a 3-path is 1 at the middle and 0 at the ends") {
    const RetweetGraph g = make_graph(3, {{0, 1}, {1, 2}});
    const std::vector<double> b = betweenness(g);
    CHECK(std::abs(b[0] - (0.0)) < 1e-12);
    CHECK(b[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(b[2] - (0.0)) < 1e-12);
}

TEST_CASE("betweenness on a complete graph is all zero") {
    const std::vector<double> b = betweenness(complete_graph(4));
    for (double v : b) CHECK(std::abs(v - (0.0)) < 1e-12);
}

TEST_CASE("betweenness of a star centers all paths on the hub") {
    const RetweetGraph g = make_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    const std::vector<double> b = betweenness(g);
    CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 1; i < 5; ++i)
        CHECK(std::abs(b[i] - (0.0)) < 1e-12);
}

TEST_CASE("betweenness is all zero below 3 nodes") {
    const std::vector<double> b = betweenness(make_graph(2, {{0, 1}}));
    CHECK(b == std::vector<double>{0.0, 0.0});
}

TEST_CASE("betweenness matches the brute-force oracle on a mixed fixture") {
    const RetweetGraph g =
        make_graph(7, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {3, 5}, {4, 5}, {5, 6}});
    const std::vector<double> lib = betweenness(g);
    const std::vector<double> oracle = brute_betweenness(g);
    for (std::size_t i = 0; i < lib.size(); ++i)
        CHECK(std::abs(lib[i] - (oracle[i])) < 1e-12);
}

TEST_CASE("exact betweenness refuses graphs beyond the cap") {
    const RetweetGraph g = sbm_graph({30}, 0.3, 0.3, 5);
    BetweennessOptions opts;
    opts.exact_cap = 10;
    CHECK_THROWS_AS(betweenness(g, opts), ConfigError);
}

TEST_CASE("sampled betweenness approximates the exact values deterministically") {
    const RetweetGraph g = sbm_graph({30, 30}, 0.3, 0.05, 21);
    const std::vector<double> exact = betweenness(g);
    BetweennessOptions opts;
    opts.sampled = true;
    opts.n_pivots = 30;
    opts.seed = 4;
    const std::vector<double> approx = betweenness(g, opts);
    const std::vector<double> again = betweenness(g, opts);
    CHECK(approx == again);
    double err = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) err = std::max(err, std::abs(approx[i] - exact[i]));
    CHECK(err < 0.05);
    CHECK_THROWS_AS(betweenness(g, BetweennessOptions{true, 0, 0, 20000}), ConfigError);
}

TEST_CASE("clustering coefficient handles the canonical fixtures") {
    const std::vector<double> triangle = clustering_coefficient(complete_graph(3));
    for (double v : triangle) CHECK(v == doctest::Approx(1.0));

    const RetweetGraph star = make_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    const std::vector<double> star_cc = clustering_coefficient(star);
    CHECK(std::abs(star_cc[0] - (0.0)) < 1e-12);
    CHECK(std::abs(star_cc[1] - (0.0)) < 1e-12);  // degree 1

    // K4 minus the (2,3) edge: nodes 0,1 have degree 3 and coefficient 2/3,
    // nodes 2,3 have degree 2 and still close a triangle through 0-1.
    const RetweetGraph diamond = make_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}});
    const std::vector<double> cc = clustering_coefficient(diamond);
    CHECK(cc[0] == doctest::Approx(2.0 / 3.0));
    CHECK(cc[1] == doctest::Approx(2.0 / 3.0));
    CHECK(cc[2] == doctest::Approx(1.0));
    CHECK(cc[3] == doctest::Approx(1.0));
}

TEST_CASE("node_metrics bundles all four metrics consistently") {
    const RetweetGraph g = sbm_graph({20, 20}, 0.3, 0.05, 8);
    const NodeMetricsTable table = node_metrics(g);
    CHECK(table.degree.size() == g.n_nodes());
    CHECK(table.pagerank.size() == g.n_nodes());
    CHECK(table.betweenness.size() == g.n_nodes());
    CHECK(table.clustering.size() == g.n_nodes());
    CHECK(table.pagerank_converged);
    for (std::size_t i = 0; i < g.n_nodes(); ++i)
        CHECK(table.degree[i] == g.degree(static_cast<NodeId>(i)));

    const auto by_user = metrics_by_user(g, table);
    const NodeId first = 0;
    CHECK(by_user.at(g.node_ids[first]).pagerank == table.pagerank[first]);
}

TEST_CASE("metrics csv round-trips exactly") {
    TempDir dir;
    const RetweetGraph g = sbm_graph({12, 12}, 0.4, 0.05, 3);
    const NodeMetricsTable table = node_metrics(g);
    const auto path = dir / "metrics.csv";
    write_metrics_csv(path, g, table, "prov test");
    const auto loaded = read_metrics_csv(path);
    REQUIRE(loaded.size() == g.n_nodes());
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
        const NodeMetricsRow& row = loaded.at(g.node_ids[i]);
        CHECK(row.degree == table.degree[i]);
        CHECK(row.pagerank == table.pagerank[i]);
        CHECK(row.betweenness == table.betweenness[i]);
        CHECK(row.clustering == table.clustering[i]);
    }
}

TEST_CASE("edge list and retweet count files are written with provenance") {
    TempDir dir;
    const Corpus corpus = retweet_corpus({{"u1", "u2"}, {"u2", "u3"}});
    const RetweetGraph g = build_graph(corpus);
    write_edge_list(dir / "edges.txt", g, "prov line");
    write_retweet_counts_csv(dir / "counts.csv", g, "prov line");
    const std::string edges = read_text_file(dir / "edges.txt");
    CHECK(edges.find("prov line") != std::string::npos);
    CHECK(edges.find("u1") != std::string::npos);
    const std::string counts = read_text_file(dir / "counts.csv");
    CHECK(counts.find("u2") != std::string::npos);
}
