#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/pipeline.hpp"

using namespace shiftscope;
using namespace shiftscope::testing;
namespace fs = std::filesystem;

namespace {

// Small end-to-end configuration: the mini preset with the search and the
// importance pass dialled down.
PipelineConfig mini_pipeline(const fs::path& out, std::uint64_t seed = 11) {
    PipelineConfig c = default_pipeline_config();
    c.synth_preset = "mini";
    c.synth = mini_config();
    c.window1 = c.synth.window1;
    c.window2 = c.synth.window2;
    c.n_topics = c.synth.n_topics + 2;
    c.top_k = 2;
    c.search_iters = 3;
    c.importance_repeats = 2;
    c.out_dir = out;
    c.seed = seed;
    return c;
}

std::map<std::string, std::string> dir_snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            out[fs::relative(entry.path(), root).string()] = read_text_file(entry.path());
    return out;
}

fs::path write_config(const TempDir& dir, const std::string& name, const std::string& body) {
    const fs::path path = dir / name;
    write_text_file(path, body);
    return path;
}

}  // namespace

TEST_CASE("the default configuration is self-consistent") {
    const PipelineConfig c = default_pipeline_config();
    CHECK(c.synth_preset == "four-communities");
    CHECK(c.synth.community_sizes.size() == 4);
    CHECK(c.top_k == 4);
    // The factorization gets headroom over the generator's planted topics.
    CHECK(c.n_topics == c.synth.n_topics + 2);
    CHECK(c.window1.start == c.synth.window1.start);
    CHECK(c.use_synth());
}

TEST_CASE("config hashes identify settings, not output locations") {
    PipelineConfig c = default_pipeline_config();
    const std::string hash = config_hash(c);
    CHECK(hash.size() == 16);
    for (char ch : hash) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));

    PipelineConfig moved = c;
    moved.out_dir = "/somewhere/else";
    CHECK(config_hash(moved) == hash);

    PipelineConfig reseeded = c;
    reseeded.seed = c.seed + 1;
    CHECK(config_hash(reseeded) != hash);

    const std::string prov = provenance_line(c);
    CHECK(prov.find("shiftscope") != std::string::npos);
    CHECK(prov.find(hash) != std::string::npos);
    CHECK(prov.find("seed=" + std::to_string(c.seed)) != std::string::npos);

    const nlohmann::json doc = nlohmann::json::parse(config_json(c));
    CHECK_FALSE(doc.contains("out_dir"));
    CHECK(doc.contains("seed"));
    CHECK(doc.contains("synth"));
}

TEST_CASE("load_pipeline_config applies overrides section by section") {
    TempDir dir;
    const fs::path path = write_config(dir, "config.json", R"({
        "out_dir": "somewhere",
        "seed": 3,
        "input": {"synth_preset": "mini"},
        "communities": {"top_k": 2, "count_mode": "received", "consensus_runs": 4},
        "topics": {"min_df": 2},
        "model": {"search_iters": 2, "cv_folds": 2, "max_depth": [2, 3]},
        "split": {"train_fraction": 0.5, "stratified": false},
        "eval": {"importance_repeats": 3, "flow_threshold": 0.05}
    })");
    const PipelineConfig c = load_pipeline_config(path);
    CHECK(c.out_dir == "somewhere");
    CHECK(c.seed == 3);
    CHECK(c.synth_preset == "mini");
    CHECK(c.synth.community_sizes.size() == 2);
    CHECK(c.top_k == 2);
    CHECK(c.count_mode == RetweetCountMode::Received);
    CHECK(c.consensus_runs == 4);
    CHECK(c.min_df == 2);
    // No explicit n_topics: headroom over the mini preset's planted count.
    CHECK(c.n_topics == c.synth.n_topics + 2);
    CHECK(c.search_iters == 2);
    CHECK(c.cv_folds == 2);
    CHECK(c.search_space.max_depth == std::pair{2, 3});
    CHECK(c.train_fraction == 0.5);
    CHECK_FALSE(c.stratified);
    CHECK(c.importance_repeats == 3);
    CHECK(c.flow_threshold == 0.05);
}

TEST_CASE("explicit topic counts beat the synthetic headroom rule") {
    TempDir dir;
    const PipelineConfig with = load_pipeline_config(write_config(
        dir, "a.json", R"({"input": {"synth_preset": "mini"}, "topics": {"n_topics": 4}})"));
    CHECK(with.n_topics == 4);

    const PipelineConfig without = load_pipeline_config(
        write_config(dir, "b.json", R"({"input": {"synth_preset": "mini"}})"));
    CHECK(without.n_topics == without.synth.n_topics + 2);
}

TEST_CASE("synth overrides reshape the generator and its windows rule") {
    TempDir dir;
    const PipelineConfig c = load_pipeline_config(write_config(dir, "config.json", R"({
        "input": {"synth_preset": "mini"},
        "synth": {"p_in": 0.1, "community_sizes": [50, 60],
                  "window1": {"start": 0, "end": 10},
                  "window2": {"start": 10, "end": 20}}
    })"));
    CHECK(c.synth.p_in == 0.1);
    CHECK(c.synth.community_sizes == std::vector<std::size_t>{50, 60});
    // Synthetic runs take their analysis windows from the generator.
    CHECK(c.window1.start == 0);
    CHECK(c.window1.end == 10);
    CHECK(c.window2.end == 20);
}

TEST_CASE("load_pipeline_config rejects malformed inputs") {
    TempDir dir;
    CHECK_THROWS_AS(load_pipeline_config(dir / "missing.json"), ConfigError);

    CHECK_THROWS_WITH_AS(
        load_pipeline_config(write_config(dir, "bad.json", "{ not json")),
        doctest::Contains("not valid JSON"), ConfigError);

    CHECK_THROWS_WITH_AS(
        load_pipeline_config(write_config(dir, "unknown.json", R"({"banana": 1})")),
        doctest::Contains("unknown key"), ConfigError);

    CHECK_THROWS_WITH_AS(
        load_pipeline_config(write_config(
            dir, "nested.json", R"({"communities": {"minimum_retweets": 5}})")),
        doctest::Contains("unknown key"), ConfigError);

    // Synth overrides make no sense without a synthetic preset.
    CHECK_THROWS_AS(load_pipeline_config(write_config(dir, "none.json", R"({
        "input": {"synth_preset": "none", "path": "x.jsonl"},
        "synth": {"p_in": 0.1}
    })")),
                    ConfigError);

    CHECK_THROWS_WITH_AS(
        load_pipeline_config(write_config(
            dir, "nopath.json", R"({"input": {"synth_preset": "none"}})")),
        doctest::Contains("input.path"), ConfigError);

    CHECK_THROWS_AS(load_pipeline_config(write_config(
                        dir, "preset.json", R"({"input": {"synth_preset": "galaxy"}})")),
                    ConfigError);

    CHECK_THROWS_WITH_AS(
        load_pipeline_config(
            write_config(dir, "topk.json", R"({"communities": {"top_k": 9}})")),
        doctest::Contains("top_k"), ConfigError);

    CHECK_THROWS_AS(load_pipeline_config(write_config(
                        dir, "mode.json", R"({"communities": {"count_mode": "sideways"}})")),
                    ConfigError);
}

TEST_CASE("stages refuse to run before their inputs exist") {
    TempDir dir;
    const PipelineConfig c = mini_pipeline(dir.path);
    CHECK_THROWS_WITH_AS(stage_train(c), doctest::Contains("features"), ConfigError);
    CHECK_THROWS_WITH_AS(stage_graph(c), doctest::Contains("ingest"), ConfigError);
}

TEST_CASE("the mini pipeline runs end to end, deterministically") {
    TempDir first_dir;
    const PipelineConfig first = mini_pipeline(first_dir.path);
    run_pipeline(first);

    for (const char* name :
         {"tweets.jsonl", "ground_truth.csv", "stopwords.txt", "corpus_p1.jsonl",
          "corpus_p2.jsonl", "ingest_summary.json", "edges_p1.txt", "metrics_p1.csv",
          "metrics_p2.csv", "labeling_p1.csv", "labeling_p2.csv", "matching.csv",
          "vocabulary.csv", "profiles.csv", "dataset.csv", "model_all.json",
          "model_graph.json", "model_text.json", "scores_all.csv", "roc_all.csv", "roc.svg",
          "metrics.json", "importance.csv", "flow.json", "persuasiveness.csv",
          "community_topics.csv", "report.json", "manifest.json"})
        CHECK_MESSAGE(fs::exists(first_dir.path / name), name);
    CHECK_FALSE(fs::exists(first_dir.path / "sweep.csv"));  // sweep stays off by default

    const nlohmann::json metrics =
        nlohmann::json::parse(read_text_file(first_dir.path / "metrics.json"));
    REQUIRE(metrics.contains("auc"));
    for (const char* variant : {"all", "graph", "text", "polar", "random"}) {
        REQUIRE_MESSAGE(metrics.at("auc").contains(variant), variant);
        const double auc = metrics.at("auc").at(variant).get<double>();
        CHECK(auc >= 0.0);
        CHECK(auc <= 1.0);
    }

    const nlohmann::json report =
        nlohmann::json::parse(read_text_file(first_dir.path / "report.json"));
    CHECK(report.at("pagerank_gap").contains("ratio"));
    CHECK(report.at("n_eligible").get<std::size_t>() > 0);
    CHECK_FALSE(report.at("top_features").empty());

    const nlohmann::json manifest =
        nlohmann::json::parse(read_text_file(first_dir.path / "manifest.json"));
    CHECK(manifest.at("tool") == "shiftscope");
    CHECK(manifest.at("config_hash") == config_hash(first));
    CHECK_FALSE(manifest.at("artifacts").empty());
    // Artifact entries are bare names; no absolute paths anywhere.
    CHECK(read_text_file(first_dir.path / "manifest.json").find(first_dir.path.string()) ==
          std::string::npos);

    // A second run in a different directory produces byte-identical output.
    TempDir second_dir;
    PipelineConfig second = first;
    second.out_dir = second_dir.path;
    run_pipeline(second);
    const auto snap1 = dir_snapshot(first_dir.path);
    const auto snap2 = dir_snapshot(second_dir.path);
    REQUIRE(snap1.size() == snap2.size());
    for (const auto& [name, content] : snap1) {
        REQUIRE_MESSAGE(snap2.count(name), name);
        CHECK_MESSAGE(snap2.at(name) == content, name);
    }

    // Running the stages one by one matches the pipeline (minus the manifest,
    // which only the full pipeline writes).
    TempDir staged_dir;
    PipelineConfig staged = first;
    staged.out_dir = staged_dir.path;
    stage_synth(staged);
    stage_ingest(staged);
    stage_graph(staged);
    stage_communities(staged);
    stage_topics(staged);
    stage_features(staged);
    stage_train(staged);
    stage_evaluate(staged);
    stage_report(staged);
    auto snap3 = dir_snapshot(staged_dir.path);
    CHECK_FALSE(snap3.count("manifest.json"));
    CHECK(snap3.size() + 1 == snap1.size());
    for (const auto& [name, content] : snap3) CHECK_MESSAGE(snap1.at(name) == content, name);
}
