#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "shiftscope/community.hpp"
#include "shiftscope/graph.hpp"
#include "shiftscope/model.hpp"
#include "shiftscope/synth.hpp"

namespace shiftscope {

// Declarative run description. One config drives every stage; flags override
// individual keys. Thread count is deliberately not part of the config: it
// must never change results.
struct PipelineConfig {
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 7;

    // Input: a synthetic preset or an external JSONL file.
    std::string synth_preset = "four-communities";  // "two-communities" | "mini" | "none"
    SynthConfig synth;                              // resolved preset + overrides
    std::filesystem::path input_path;               // used when preset == "none"
    std::string lang;                               // optional language filter
    std::filesystem::path stopwords_path;           // optional explicit stopword list
    PeriodWindow window1{PeriodLabel::Period1, 100000, 200000};
    PeriodWindow window2{PeriodLabel::Period2, 200000, 300000};

    int top_k = 4;
    int min_retweets = 5;
    RetweetCountMode count_mode = RetweetCountMode::Authored;
    int consensus_runs = 10;

    int ngram_min = 1;
    int ngram_max = 3;
    int min_df = 5;
    int n_topics = 6;
    double nmf_tol = 1e-4;
    int nmf_max_iter = 200;
    std::pair<int, int> sweep_range{0, 0};  // sweep disabled while zero

    MetricsConfig metrics;

    SearchSpace search_space;
    int search_iters = 25;
    int cv_folds = 3;

    double train_fraction = 0.67;
    bool stratified = true;

    int importance_repeats = 10;
    double flow_threshold = 0.01;

    bool use_synth() const { return synth_preset != "none"; }
};

PipelineConfig default_pipeline_config();
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Canonical JSON image of the config; its hash goes into every provenance
// header so artifacts can be traced to the exact run settings.
std::string config_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);
std::string provenance_line(const PipelineConfig& config);

void stage_synth(const PipelineConfig& config);
void stage_ingest(const PipelineConfig& config);
void stage_graph(const PipelineConfig& config);
void stage_communities(const PipelineConfig& config);
void stage_topics(const PipelineConfig& config);
void stage_features(const PipelineConfig& config);
void stage_train(const PipelineConfig& config);
void stage_evaluate(const PipelineConfig& config);
void stage_report(const PipelineConfig& config);

// All stages in order, then the manifest.
void run_pipeline(const PipelineConfig& config);

}  // namespace shiftscope
