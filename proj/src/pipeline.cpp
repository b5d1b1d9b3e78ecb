#include "shiftscope/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "shiftscope/csvio.hpp"
#include "shiftscope/dataset.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/eval.hpp"
#include "shiftscope/rng.hpp"
#include "shiftscope/topics.hpp"
#include "shiftscope/version.hpp"

namespace shiftscope {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path art(const PipelineConfig& config, const std::string& name) {
    return config.out_dir / name;
}

void require_artifact(const fs::path& path, const std::string& stage) {
    if (!fs::exists(path)) {
        throw ConfigError("missing artifact " + path.string() + "; run the '" + stage +
                          "' stage first");
    }
}

void write_json_file(const fs::path& path, json doc, const std::string& provenance) {
    if (!provenance.empty()) doc["provenance"] = provenance;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

Corpus load_corpus(const fs::path& path, const PeriodWindow& window) {
    ParseResult parsed = parse_records_file(path);
    Corpus c;
    c.period = window;
    c.records = std::move(parsed.records);
    for (std::size_t i = 0; i < c.records.size(); ++i) {
        c.by_author[c.records[i].author_id].push_back(i);
    }
    return c;
}

Corpus corpus_for(const PipelineConfig& config, int period) {
    const std::string name = period == 1 ? "corpus_p1.jsonl" : "corpus_p2.jsonl";
    require_artifact(art(config, name), "ingest");
    return load_corpus(art(config, name), period == 1 ? config.window1 : config.window2);
}

std::set<std::string> stopwords_for(const PipelineConfig& config) {
    if (!config.stopwords_path.empty()) {
        if (!fs::exists(config.stopwords_path)) {
            throw ConfigError("stopword list not found: " + config.stopwords_path.string());
        }
        return read_stopwords(config.stopwords_path);
    }
    if (fs::exists(art(config, "stopwords.txt"))) {
        return read_stopwords(art(config, "stopwords.txt"));
    }
    return {};
}

SplitSpec split_spec(const PipelineConfig& config) {
    SplitSpec spec;
    spec.train_fraction = config.train_fraction;
    spec.seed = derive_seed(config.seed, "split");
    spec.stratified = config.stratified;
    return spec;
}

// Model variants: every feature, the graph block, the text block.
std::vector<std::pair<std::string, std::vector<std::string>>> feature_variants(
    const LabeledDataset& ds) {
    return {{"all", ds.feature_names},
            {"graph", graph_feature_names(ds)},
            {"text", topic_feature_names(ds)}};
}

// --- config parsing -------------------------------------------------------

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

std::pair<int, int> int_pair(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) throw ConfigError(where + " must be [lo, hi]");
    return {v[0].get<int>(), v[1].get<int>()};
}

std::pair<double, double> double_pair(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) throw ConfigError(where + " must be [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
}

PeriodWindow parse_window(const json& v, PeriodLabel label, const std::string& where) {
    if (!v.is_object()) throw ConfigError(where + " must be {\"start\": .., \"end\": ..}");
    check_keys(v, where, {"start", "end"});
    PeriodWindow w;
    w.label = label;
    w.start = v.at("start").get<std::int64_t>();
    w.end = v.at("end").get<std::int64_t>();
    return w;
}

SynthConfig preset_by_name(const std::string& name) {
    if (name == "two-communities") return two_community_config();
    if (name == "four-communities") return four_community_config();
    if (name == "mini") return mini_config();
    throw ConfigError("unknown synth preset '" + name +
                      "' (expected two-communities, four-communities, mini or none)");
}

void apply_synth_overrides(SynthConfig& sc, const json& obj) {
    check_keys(obj, "synth",
               {"community_sizes", "p_in", "p_out", "n_topics", "terms_per_topic",
                "n_filler_terms", "filler_word_rate", "topic_alpha", "persuasive_alpha_boost",
                "tweets_per_user", "words_per_tweet", "retweets_per_edge", "persuasive_topics",
                "base_shift_logodds", "coef_pagerank_rank", "coef_persuasive", "window1",
                "window2"});
    if (obj.contains("community_sizes"))
        sc.community_sizes = obj.at("community_sizes").get<std::vector<std::size_t>>();
    if (obj.contains("p_in")) sc.p_in = obj.at("p_in").get<double>();
    if (obj.contains("p_out")) sc.p_out = obj.at("p_out").get<double>();
    if (obj.contains("n_topics")) sc.n_topics = obj.at("n_topics").get<int>();
    if (obj.contains("terms_per_topic")) sc.terms_per_topic = obj.at("terms_per_topic").get<int>();
    if (obj.contains("n_filler_terms")) sc.n_filler_terms = obj.at("n_filler_terms").get<int>();
    if (obj.contains("filler_word_rate"))
        sc.filler_word_rate = obj.at("filler_word_rate").get<double>();
    if (obj.contains("topic_alpha")) sc.topic_alpha = obj.at("topic_alpha").get<double>();
    if (obj.contains("persuasive_alpha_boost"))
        sc.persuasive_alpha_boost = obj.at("persuasive_alpha_boost").get<std::vector<double>>();
    if (obj.contains("tweets_per_user"))
        sc.tweets_per_user = int_pair(obj.at("tweets_per_user"), "synth.tweets_per_user");
    if (obj.contains("words_per_tweet"))
        sc.words_per_tweet = int_pair(obj.at("words_per_tweet"), "synth.words_per_tweet");
    if (obj.contains("retweets_per_edge"))
        sc.retweets_per_edge = int_pair(obj.at("retweets_per_edge"), "synth.retweets_per_edge");
    if (obj.contains("persuasive_topics"))
        sc.persuasive_topics = obj.at("persuasive_topics").get<std::vector<int>>();
    if (obj.contains("base_shift_logodds"))
        sc.base_shift_logodds = obj.at("base_shift_logodds").get<double>();
    if (obj.contains("coef_pagerank_rank"))
        sc.coef_pagerank_rank = obj.at("coef_pagerank_rank").get<double>();
    if (obj.contains("coef_persuasive"))
        sc.coef_persuasive = obj.at("coef_persuasive").get<double>();
    if (obj.contains("window1"))
        sc.window1 = parse_window(obj.at("window1"), PeriodLabel::Period1, "synth.window1");
    if (obj.contains("window2"))
        sc.window2 = parse_window(obj.at("window2"), PeriodLabel::Period2, "synth.window2");
}

void validate_config(const PipelineConfig& c) {
    if (c.out_dir.empty()) throw ConfigError("out_dir must not be empty");
    if (!c.use_synth() && c.input_path.empty()) {
        throw ConfigError("input.path is required when input.synth_preset is \"none\"");
    }
    validate_windows(c.window1, c.window2);
    if (c.top_k < 1 || c.top_k > 8) throw ConfigError("communities.top_k must be in [1, 8]");
    if (c.min_retweets < 0) throw ConfigError("communities.min_retweets must be >= 0");
    if (c.consensus_runs < 1) throw ConfigError("communities.consensus_runs must be >= 1");
    if (c.ngram_min < 1 || c.ngram_max < c.ngram_min) {
        throw ConfigError("topics ngram range must satisfy 1 <= ngram_min <= ngram_max");
    }
    if (c.min_df < 1) throw ConfigError("topics.min_df must be >= 1");
    if (c.n_topics < 1) throw ConfigError("topics.n_topics must be >= 1");
    if (!(c.nmf_tol > 0.0)) throw ConfigError("topics.nmf_tol must be > 0");
    if (c.nmf_max_iter < 1) throw ConfigError("topics.nmf_max_iter must be >= 1");
    const auto [k_lo, k_hi] = c.sweep_range;
    if (!(k_lo == 0 && k_hi == 0) && !(k_lo >= 1 && k_hi >= k_lo)) {
        throw ConfigError("topics sweep range must be [0, 0] (off) or 1 <= k_min <= k_max");
    }
    if (c.search_iters < 1) throw ConfigError("model.search_iters must be >= 1");
    if (c.cv_folds < 2) throw ConfigError("model.cv_folds must be >= 2");
    const SearchSpace& s = c.search_space;
    if (s.n_trees.first < 1 || s.n_trees.second < s.n_trees.first ||
        s.max_depth.first < 1 || s.max_depth.second < s.max_depth.first) {
        throw ConfigError("model tree ranges must be positive and ordered");
    }
    if (!(s.learning_rate.first > 0.0) || s.learning_rate.second < s.learning_rate.first) {
        throw ConfigError("model.learning_rate range must be positive and ordered");
    }
    auto unit_range = [](const std::pair<double, double>& p) {
        return p.first > 0.0 && p.first <= p.second && p.second <= 1.0;
    };
    if (!unit_range(s.subsample) || !unit_range(s.colsample)) {
        throw ConfigError("model subsample/colsample ranges must lie in (0, 1]");
    }
    if (s.l2_lambda.empty()) throw ConfigError("model.l2_lambda must list at least one value");
    for (double v : s.l2_lambda) {
        if (v < 0.0) throw ConfigError("model.l2_lambda values must be >= 0");
    }
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
        throw ConfigError("split.train_fraction must be in (0, 1)");
    }
    if (c.importance_repeats < 1) throw ConfigError("eval.importance_repeats must be >= 1");
    if (c.flow_threshold < 0.0 || c.flow_threshold > 1.0) {
        throw ConfigError("eval.flow_threshold must be in [0, 1]");
    }
}

json window_json(const PeriodWindow& w) {
    return json{{"start", w.start}, {"end", w.end}};
}

json summary_json(const CorpusSummary& s) {
    return json{{"n_tweets", s.n_tweets},
                {"n_users", s.n_users},
                {"n_retweets", s.n_retweets},
                {"window", window_json(s.window)}};
}

json params_json(const GBDTParams& p) {
    return json{{"n_trees", p.n_trees},
                {"max_depth", p.max_depth},
                {"learning_rate", p.learning_rate},
                {"min_child_weight", p.min_child_weight},
                {"l2_lambda", p.l2_lambda},
                {"subsample", p.subsample},
                {"colsample", p.colsample},
                {"seed", p.seed}};
}

}  // namespace

PipelineConfig default_pipeline_config() {
    PipelineConfig c;
    c.synth = preset_by_name(c.synth_preset);
    c.window1 = c.synth.window1;
    c.window2 = c.synth.window2;
    // Sized for a full run on one core in a few minutes.
    c.search_iters = 12;
    c.n_topics = c.synth.n_topics + 2;
    c.search_space.n_trees = {60, 200};
    c.search_space.max_depth = {2, 4};
    c.search_space.learning_rate = {0.03, 0.3};
    c.search_space.subsample = {0.7, 1.0};
    c.search_space.colsample = {0.6, 1.0};
    validate_config(c);
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    check_keys(doc, "config",
               {"out_dir", "seed", "input", "synth", "communities", "graph", "topics", "model",
                "split", "eval"});

    PipelineConfig c = default_pipeline_config();
    try {
        if (doc.contains("out_dir")) c.out_dir = doc.at("out_dir").get<std::string>();
        if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();

        if (doc.contains("input")) {
            const json& in = doc.at("input");
            check_keys(in, "input",
                       {"synth_preset", "path", "lang", "stopwords", "window1", "window2"});
            if (in.contains("synth_preset"))
                c.synth_preset = in.at("synth_preset").get<std::string>();
            if (c.use_synth()) {
                c.synth = preset_by_name(c.synth_preset);
            } else {
                c.synth = SynthConfig{};
            }
            if (in.contains("path")) c.input_path = in.at("path").get<std::string>();
            if (in.contains("lang")) c.lang = in.at("lang").get<std::string>();
            if (in.contains("stopwords")) c.stopwords_path = in.at("stopwords").get<std::string>();
            if (in.contains("window1"))
                c.window1 = parse_window(in.at("window1"), PeriodLabel::Period1, "input.window1");
            if (in.contains("window2"))
                c.window2 = parse_window(in.at("window2"), PeriodLabel::Period2, "input.window2");
        }

        if (doc.contains("synth")) {
            if (!c.use_synth()) {
                throw ConfigError("synth overrides given but input.synth_preset is \"none\"");
            }
            apply_synth_overrides(c.synth, doc.at("synth"));
        }
        if (c.use_synth()) {
            // The generator's windows are authoritative for synthetic runs.
            c.window1 = c.synth.window1;
            c.window2 = c.synth.window2;
        }

        if (doc.contains("communities")) {
            const json& cm = doc.at("communities");
            check_keys(cm, "communities",
                       {"top_k", "min_retweets", "count_mode", "consensus_runs"});
            if (cm.contains("top_k")) c.top_k = cm.at("top_k").get<int>();
            if (cm.contains("min_retweets")) c.min_retweets = cm.at("min_retweets").get<int>();
            if (cm.contains("count_mode")) {
                const std::string mode = cm.at("count_mode").get<std::string>();
                if (mode == "authored") {
                    c.count_mode = RetweetCountMode::Authored;
                } else if (mode == "received") {
                    c.count_mode = RetweetCountMode::Received;
                } else {
                    throw ConfigError("communities.count_mode must be 'authored' or 'received'");
                }
            }
            if (cm.contains("consensus_runs"))
                c.consensus_runs = cm.at("consensus_runs").get<int>();
        }

        if (doc.contains("graph")) {
            const json& gr = doc.at("graph");
            check_keys(gr, "graph",
                       {"damping", "pagerank_tol", "pagerank_max_iter", "betweenness_sampled",
                        "betweenness_pivots"});
            if (gr.contains("damping")) c.metrics.damping = gr.at("damping").get<double>();
            if (gr.contains("pagerank_tol"))
                c.metrics.pagerank_tol = gr.at("pagerank_tol").get<double>();
            if (gr.contains("pagerank_max_iter"))
                c.metrics.pagerank_max_iter = gr.at("pagerank_max_iter").get<int>();
            if (gr.contains("betweenness_sampled"))
                c.metrics.betweenness.sampled = gr.at("betweenness_sampled").get<bool>();
            if (gr.contains("betweenness_pivots"))
                c.metrics.betweenness.n_pivots = gr.at("betweenness_pivots").get<int>();
        }

        if (doc.contains("topics")) {
            const json& tp = doc.at("topics");
            check_keys(tp, "topics",
                       {"ngram_min", "ngram_max", "min_df", "n_topics", "nmf_tol", "nmf_max_iter",
                        "sweep_k_min", "sweep_k_max"});
            if (tp.contains("ngram_min")) c.ngram_min = tp.at("ngram_min").get<int>();
            if (tp.contains("ngram_max")) c.ngram_max = tp.at("ngram_max").get<int>();
            if (tp.contains("min_df")) c.min_df = tp.at("min_df").get<int>();
            if (tp.contains("n_topics")) {
                c.n_topics = tp.at("n_topics").get<int>();
            } else if (c.use_synth()) {
                // Leave the factorization some headroom over the generator's
                // planted topic count so mixed usage can still separate.
                c.n_topics = c.synth.n_topics + 2;
            }
            if (tp.contains("nmf_tol")) c.nmf_tol = tp.at("nmf_tol").get<double>();
            if (tp.contains("nmf_max_iter")) c.nmf_max_iter = tp.at("nmf_max_iter").get<int>();
            if (tp.contains("sweep_k_min")) c.sweep_range.first = tp.at("sweep_k_min").get<int>();
            if (tp.contains("sweep_k_max")) c.sweep_range.second = tp.at("sweep_k_max").get<int>();
        } else if (c.use_synth()) {
            c.n_topics = c.synth.n_topics + 2;
        }

        if (doc.contains("model")) {
            const json& md = doc.at("model");
            check_keys(md, "model",
                       {"search_iters", "cv_folds", "n_trees", "max_depth", "learning_rate",
                        "subsample", "colsample", "l2_lambda"});
            if (md.contains("search_iters")) c.search_iters = md.at("search_iters").get<int>();
            if (md.contains("cv_folds")) c.cv_folds = md.at("cv_folds").get<int>();
            if (md.contains("n_trees"))
                c.search_space.n_trees = int_pair(md.at("n_trees"), "model.n_trees");
            if (md.contains("max_depth"))
                c.search_space.max_depth = int_pair(md.at("max_depth"), "model.max_depth");
            if (md.contains("learning_rate"))
                c.search_space.learning_rate =
                    double_pair(md.at("learning_rate"), "model.learning_rate");
            if (md.contains("subsample"))
                c.search_space.subsample = double_pair(md.at("subsample"), "model.subsample");
            if (md.contains("colsample"))
                c.search_space.colsample = double_pair(md.at("colsample"), "model.colsample");
            if (md.contains("l2_lambda"))
                c.search_space.l2_lambda = md.at("l2_lambda").get<std::vector<double>>();
        }

        if (doc.contains("split")) {
            const json& sp = doc.at("split");
            check_keys(sp, "split", {"train_fraction", "stratified"});
            if (sp.contains("train_fraction"))
                c.train_fraction = sp.at("train_fraction").get<double>();
            if (sp.contains("stratified")) c.stratified = sp.at("stratified").get<bool>();
        }

        if (doc.contains("eval")) {
            const json& ev = doc.at("eval");
            check_keys(ev, "eval", {"importance_repeats", "flow_threshold"});
            if (ev.contains("importance_repeats"))
                c.importance_repeats = ev.at("importance_repeats").get<int>();
            if (ev.contains("flow_threshold"))
                c.flow_threshold = ev.at("flow_threshold").get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }

    validate_config(c);
    return c;
}

std::string config_json(const PipelineConfig& c) {
    // Canonical image of everything that can affect results. out_dir and the
    // thread count are deliberately excluded: neither may change content.
    json doc;
    doc["seed"] = c.seed;
    json in;
    in["synth_preset"] = c.synth_preset;
    in["path"] = c.input_path.string();
    in["lang"] = c.lang;
    in["stopwords"] = c.stopwords_path.string();
    in["window1"] = window_json(c.window1);
    in["window2"] = window_json(c.window2);
    doc["input"] = in;
    if (c.use_synth()) {
        const SynthConfig& s = c.synth;
        json sy;
        sy["community_sizes"] = s.community_sizes;
        sy["p_in"] = s.p_in;
        sy["p_out"] = s.p_out;
        sy["n_topics"] = s.n_topics;
        sy["terms_per_topic"] = s.terms_per_topic;
        sy["n_filler_terms"] = s.n_filler_terms;
        sy["filler_word_rate"] = s.filler_word_rate;
        sy["topic_alpha"] = s.topic_alpha;
        sy["persuasive_alpha_boost"] = s.persuasive_alpha_boost;
        sy["tweets_per_user"] = {s.tweets_per_user.first, s.tweets_per_user.second};
        sy["words_per_tweet"] = {s.words_per_tweet.first, s.words_per_tweet.second};
        sy["retweets_per_edge"] = {s.retweets_per_edge.first, s.retweets_per_edge.second};
        sy["persuasive_topics"] = s.persuasive_topics;
        sy["base_shift_logodds"] = s.base_shift_logodds;
        sy["coef_pagerank_rank"] = s.coef_pagerank_rank;
        sy["coef_persuasive"] = s.coef_persuasive;
        doc["synth"] = sy;
    }
    json cm;
    cm["top_k"] = c.top_k;
    cm["min_retweets"] = c.min_retweets;
    cm["count_mode"] = c.count_mode == RetweetCountMode::Authored ? "authored" : "received";
    cm["consensus_runs"] = c.consensus_runs;
    doc["communities"] = cm;
    json gr;
    gr["damping"] = c.metrics.damping;
    gr["pagerank_tol"] = c.metrics.pagerank_tol;
    gr["pagerank_max_iter"] = c.metrics.pagerank_max_iter;
    gr["betweenness_sampled"] = c.metrics.betweenness.sampled;
    gr["betweenness_pivots"] = c.metrics.betweenness.n_pivots;
    doc["graph"] = gr;
    json tp;
    tp["ngram_min"] = c.ngram_min;
    tp["ngram_max"] = c.ngram_max;
    tp["min_df"] = c.min_df;
    tp["n_topics"] = c.n_topics;
    tp["nmf_tol"] = c.nmf_tol;
    tp["nmf_max_iter"] = c.nmf_max_iter;
    tp["sweep_k_min"] = c.sweep_range.first;
    tp["sweep_k_max"] = c.sweep_range.second;
    doc["topics"] = tp;
    json md;
    md["search_iters"] = c.search_iters;
    md["cv_folds"] = c.cv_folds;
    md["n_trees"] = {c.search_space.n_trees.first, c.search_space.n_trees.second};
    md["max_depth"] = {c.search_space.max_depth.first, c.search_space.max_depth.second};
    md["learning_rate"] = {c.search_space.learning_rate.first, c.search_space.learning_rate.second};
    md["subsample"] = {c.search_space.subsample.first, c.search_space.subsample.second};
    md["colsample"] = {c.search_space.colsample.first, c.search_space.colsample.second};
    md["l2_lambda"] = c.search_space.l2_lambda;
    doc["model"] = md;
    json sp;
    sp["train_fraction"] = c.train_fraction;
    sp["stratified"] = c.stratified;
    doc["split"] = sp;
    json ev;
    ev["importance_repeats"] = c.importance_repeats;
    ev["flow_threshold"] = c.flow_threshold;
    doc["eval"] = ev;
    return doc.dump();
}

std::string config_hash(const PipelineConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_json(config))));
    return buf;
}

std::string provenance_line(const PipelineConfig& config) {
    return std::string("shiftscope ") + kVersion + " config=" + config_hash(config) +
           " seed=" + std::to_string(config.seed);
}

void stage_synth(const PipelineConfig& config) {
    if (!config.use_synth()) {
        throw ConfigError("the synth stage needs a synthetic preset; input.synth_preset is none");
    }
    fs::create_directories(config.out_dir);
    SynthConfig sc = config.synth;
    sc.seed = derive_seed(config.seed, "synth");
    SynthResult result = generate(sc);
    std::vector<TweetRecord> all = result.corpus1.records;
    all.insert(all.end(), result.corpus2.records.begin(), result.corpus2.records.end());
    write_records_file(art(config, "tweets.jsonl"), all);
    write_ground_truth_csv(art(config, "ground_truth.csv"), result.truth,
                           provenance_line(config));
    write_stopwords(art(config, "stopwords.txt"),
                    {result.filler_terms.begin(), result.filler_terms.end()});
}

void stage_ingest(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    fs::path input = config.input_path;
    if (config.use_synth()) {
        input = art(config, "tweets.jsonl");
        require_artifact(input, "synth");
    } else if (!fs::exists(input)) {
        throw ConfigError("input file not found: " + input.string());
    }
    ParseResult parsed = parse_records_file(input);
    std::vector<TweetRecord> records = std::move(parsed.records);
    std::size_t lang_dropped = 0;
    if (!config.lang.empty()) records = filter_lang(records, config.lang, &lang_dropped);
    SplitStats stats;
    auto [c1, c2] = split_periods(records, config.window1, config.window2, &stats);
    write_records_file(art(config, "corpus_p1.jsonl"), c1.records);
    write_records_file(art(config, "corpus_p2.jsonl"), c2.records);
    json summary;
    summary["lines"] = parsed.stats.lines;
    summary["parsed"] = parsed.stats.parsed;
    summary["malformed"] = parsed.stats.malformed;
    summary["lang_dropped"] = lang_dropped;
    summary["outside_windows"] = stats.dropped;
    summary["period1"] = summary_json(corpus_summary(c1));
    summary["period2"] = summary_json(corpus_summary(c2));
    write_json_file(art(config, "ingest_summary.json"), summary, provenance_line(config));
}

void stage_graph(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    const std::string prov = provenance_line(config);
    for (int period : {1, 2}) {
        const std::string sfx = "_p" + std::to_string(period);
        RetweetGraph g = build_graph(corpus_for(config, period));
        MetricsConfig mc = config.metrics;
        mc.betweenness.seed = derive_seed(config.seed, "betweenness" + sfx);
        NodeMetricsTable table = node_metrics(g, mc);
        if (!table.pagerank_converged) {
            std::cerr << "warning: pagerank did not converge in period " << period << '\n';
        }
        write_edge_list(art(config, "edges" + sfx + ".txt"), g, prov);
        write_metrics_csv(art(config, "metrics" + sfx + ".csv"), g, table, prov);
        write_retweet_counts_csv(art(config, "retweet_counts" + sfx + ".csv"), g, prov);
    }
}

void stage_communities(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    const std::string prov = provenance_line(config);
    RetweetGraph g1 = build_graph(corpus_for(config, 1));
    RetweetGraph g2 = build_graph(corpus_for(config, 2));
    ConsensusLabeling l1 =
        consensus(g1, config.consensus_runs, derive_seed(config.seed, "consensus-p1"));
    ConsensusLabeling l2 =
        consensus(g2, config.consensus_runs, derive_seed(config.seed, "consensus-p2"));
    write_labeling_csv(art(config, "labeling_p1.csv"), l1, PeriodLabel::Period1, prov);
    write_labeling_csv(art(config, "labeling_p2.csv"), l2, PeriodLabel::Period2, prov);
    CommunityMatching matching = match_communities(l1, l2, config.top_k);
    print_warnings(matching.warnings);
    write_matching_csv(art(config, "matching.csv"), matching, prov);
}

void stage_topics(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    const std::string prov = provenance_line(config);
    Corpus c1 = corpus_for(config, 1);
    const std::set<std::string> stopwords = stopwords_for(config);
    Vocabulary vocab =
        build_vocabulary(c1, config.ngram_min, config.ngram_max, stopwords, config.min_df);
    write_vocabulary_csv(art(config, "vocabulary.csv"), vocab, prov);
    SparseRowMatrix m = tfidf(c1, vocab);
    TopicModel model = nmf(m, config.n_topics, derive_seed(config.seed, "nmf"), config.nmf_tol,
                           config.nmf_max_iter);
    write_topic_model(art(config, "topic_model"), model, prov);
    auto profiles = user_topic_profiles(c1, model.h);
    write_profiles_csv(art(config, "profiles.csv"), profiles, model.k, prov);
    if (config.sweep_range.first >= 1) {
        auto entries = sweep_k(m, vocab, config.sweep_range.first, config.sweep_range.second,
                               derive_seed(config.seed, "nmf"), config.nmf_tol,
                               config.nmf_max_iter);
        write_sweep_csv(art(config, "sweep.csv"), entries, prov);
    }
}

void stage_features(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    require_artifact(art(config, "metrics_p1.csv"), "graph");
    require_artifact(art(config, "labeling_p1.csv"), "communities");
    require_artifact(art(config, "labeling_p2.csv"), "communities");
    require_artifact(art(config, "matching.csv"), "communities");
    require_artifact(art(config, "profiles.csv"), "topics");

    ConsensusLabeling l1 = read_labeling_csv(art(config, "labeling_p1.csv"));
    ConsensusLabeling l2 = read_labeling_csv(art(config, "labeling_p2.csv"));
    CommunityMatching matching = read_matching_csv(art(config, "matching.csv"));
    auto metrics1 = read_metrics_csv(art(config, "metrics_p1.csv"));
    auto profiles = read_profiles_csv(art(config, "profiles.csv"));
    RetweetGraph g1 = build_graph(corpus_for(config, 1));
    RetweetGraph g2 = build_graph(corpus_for(config, 2));

    EligibleOptions opts;
    opts.min_retweets = config.min_retweets;
    opts.top_k = config.top_k;
    opts.mode = config.count_mode;
    std::set<std::string> eligible = eligible_users(l1, l2, g1, g2, opts);
    if (eligible.empty()) {
        throw DataError("no eligible users: nothing survives the stability, activity and top-" +
                        std::to_string(config.top_k) + " community filters");
    }

    LabeledDataset ds = assemble(metrics1, l1, profiles, eligible, matching, l2, config.n_topics);
    int n_shifted = 0;
    for (int t : ds.targets) n_shifted += t;
    json sidecar;
    sidecar["window1"] = window_json(config.window1);
    sidecar["window2"] = window_json(config.window2);
    sidecar["seed"] = config.seed;
    sidecar["n_topics"] = config.n_topics;
    sidecar["top_k"] = config.top_k;
    sidecar["min_retweets"] = config.min_retweets;
    sidecar["n_instances"] = ds.size();
    sidecar["n_shifted"] = n_shifted;
    sidecar["feature_names"] = ds.feature_names;
    write_dataset_csv(art(config, "dataset.csv"), ds, sidecar, provenance_line(config));
}

void stage_train(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    require_artifact(art(config, "dataset.csv"), "features");
    const std::string prov = provenance_line(config);
    LabeledDataset ds = read_dataset_csv(art(config, "dataset.csv"));
    SplitResult sp = split(ds, split_spec(config));
    print_warnings(sp.warnings);

    for (const auto& [name, names] : feature_variants(ds)) {
        LabeledDataset train_sub = select_features(sp.train, names);
        SearchResult search =
            randomized_search(train_sub, config.search_space, config.search_iters,
                              config.cv_folds, derive_seed(config.seed, "search-" + name));
        print_warnings(search.warnings);
        GBDTModel model = train(train_sub, search.best());
        write_model_json(art(config, "model_" + name + ".json"), model, prov);

        json report;
        report["variant"] = name;
        report["n_iter"] = config.search_iters;
        report["cv_folds"] = config.cv_folds;
        report["best_index"] = search.best_index;
        report["best_cv_auc"] = search.mean_cv_auc[search.best_index];
        json trials = json::array();
        for (std::size_t i = 0; i < search.configs.size(); ++i) {
            json t = params_json(search.configs[i]);
            t["mean_cv_auc"] = search.mean_cv_auc[i];
            trials.push_back(std::move(t));
        }
        report["trials"] = std::move(trials);
        report["warnings"] = search.warnings;
        write_json_file(art(config, "search_" + name + ".json"), report, prov);
    }
}

void stage_evaluate(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    require_artifact(art(config, "dataset.csv"), "features");
    const std::string prov = provenance_line(config);
    LabeledDataset ds = read_dataset_csv(art(config, "dataset.csv"));
    SplitResult sp = split(ds, split_spec(config));

    std::vector<std::pair<std::string, std::vector<double>>> scored;
    for (const auto& [name, names] : feature_variants(ds)) {
        (void)names;
        require_artifact(art(config, "model_" + name + ".json"), "train");
        GBDTModel model = read_model_json(art(config, "model_" + name + ".json"));
        LabeledDataset test_sub = select_features(sp.test, model.feature_names);
        scored.emplace_back(name, predict_proba(model, test_sub));
    }
    scored.emplace_back("polar", baseline_polar(sp.test));
    scored.emplace_back("random",
                        baseline_random(sp.test, derive_seed(config.seed, "baseline-random")));

    int test_shifted = 0;
    for (int t : sp.test.targets) test_shifted += t;
    int train_shifted = 0;
    for (int t : sp.train.targets) train_shifted += t;

    json metrics;
    metrics["n_train"] = sp.train.size();
    metrics["n_test"] = sp.test.size();
    metrics["train_shifted"] = train_shifted;
    metrics["test_shifted"] = test_shifted;
    std::vector<std::pair<std::string, RocCurve>> curves;
    json aucs;
    for (const auto& [name, scores] : scored) {
        RocCurve curve = roc_auc(scores, sp.test.targets);
        write_scores_csv(art(config, "scores_" + name + ".csv"), sp.test, scores, prov);
        write_roc_csv(art(config, "roc_" + name + ".csv"), curve, prov);
        aucs[name] = curve.auc;
        curves.emplace_back(name, std::move(curve));
    }
    metrics["auc"] = std::move(aucs);
    write_roc_svg(art(config, "roc.svg"), curves);
    write_json_file(art(config, "metrics.json"), metrics, prov);
}

void stage_report(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    require_artifact(art(config, "dataset.csv"), "features");
    require_artifact(art(config, "model_all.json"), "train");
    require_artifact(art(config, "labeling_p1.csv"), "communities");
    require_artifact(art(config, "profiles.csv"), "topics");
    const std::string prov = provenance_line(config);

    LabeledDataset ds = read_dataset_csv(art(config, "dataset.csv"));
    SplitResult sp = split(ds, split_spec(config));
    GBDTModel model = read_model_json(art(config, "model_all.json"));
    ConsensusLabeling l1 = read_labeling_csv(art(config, "labeling_p1.csv"));
    ConsensusLabeling l2 = read_labeling_csv(art(config, "labeling_p2.csv"));
    CommunityMatching matching = read_matching_csv(art(config, "matching.csv"));
    auto profiles = read_profiles_csv(art(config, "profiles.csv"));

    LabeledDataset test_sub = select_features(sp.test, model.feature_names);
    ImportanceReport importance = permutation_importance(
        model, test_sub, config.importance_repeats, derive_seed(config.seed, "importance"));
    write_importance_csv(art(config, "importance.csv"), importance, prov);
    write_importance_svg(art(config, "importance.svg"), importance);

    std::map<std::string, int> targets;
    for (std::size_t i = 0; i < ds.size(); ++i) targets[ds.users[i]] = ds.targets[i];
    std::vector<double> scores = persuasiveness(profiles, targets);
    write_persuasiveness_csv(art(config, "persuasiveness.csv"), scores, prov);

    std::set<std::string> eligible(ds.users.begin(), ds.users.end());
    TopicFlowReport flow =
        flow_report(l1, l2, matching, profiles, eligible, config.flow_threshold, scores);
    write_flow_csv(art(config, "flow.csv"), flow, prov);
    write_flow_json(art(config, "flow.json"), flow, prov);

    CommunityTopicDistribution dist = community_topic_distribution(profiles, l1);
    print_warnings(dist.warnings);
    CsvTable table;
    table.header.push_back("community");
    for (int t = 0; t < config.n_topics; ++t) table.header.push_back("topic_" + std::to_string(t));
    for (const auto& [community, weights] : dist.weights) {
        std::vector<std::string> row{std::to_string(community)};
        for (double w : weights) row.push_back(format_double(w));
        table.rows.push_back(std::move(row));
    }
    write_csv(art(config, "community_topics.csv"), table, prov);

    PageRankGap gap = pagerank_gap(ds);
    int n_shifted = 0;
    for (int t : ds.targets) n_shifted += t;

    json report;
    report["n_eligible"] = ds.size();
    report["n_shifted"] = n_shifted;
    report["pagerank_gap"] = {{"mean_shifting", gap.mean_shifting},
                              {"mean_non_shifting", gap.mean_non_shifting},
                              {"ratio", gap.ratio}};
    report["importance_baseline_auc"] = importance.baseline_auc;
    json top_features = json::array();
    for (std::size_t i = 0; i < importance.entries.size() && i < 5; ++i) {
        top_features.push_back({{"feature", importance.entries[i].feature},
                                {"mean_drop", importance.entries[i].mean_drop},
                                {"std_drop", importance.entries[i].std_drop}});
    }
    report["top_features"] = std::move(top_features);
    report["persuasiveness"] = scores;
    report["topic_ranking"] = rank_topics(scores);
    report["n_flow_arrows"] = flow.arrows.size();
    write_json_file(art(config, "report.json"), report, prov);
}

void run_pipeline(const PipelineConfig& config) {
    if (config.use_synth()) stage_synth(config);
    stage_ingest(config);
    stage_graph(config);
    stage_communities(config);
    stage_topics(config);
    stage_features(config);
    stage_train(config);
    stage_evaluate(config);
    stage_report(config);

    static const char* kArtifacts[] = {
        "tweets.jsonl",         "ground_truth.csv",      "stopwords.txt",
        "corpus_p1.jsonl",      "corpus_p2.jsonl",       "ingest_summary.json",
        "edges_p1.txt",         "edges_p2.txt",          "metrics_p1.csv",
        "metrics_p2.csv",       "retweet_counts_p1.csv", "retweet_counts_p2.csv",
        "labeling_p1.csv",      "labeling_p2.csv",       "matching.csv",
        "vocabulary.csv",       "topic_model/header.json", "topic_model/h.csv",
        "topic_model/w.csv",    "profiles.csv",          "sweep.csv",
        "dataset.csv",          "dataset.json",          "model_all.json",
        "model_graph.json",     "model_text.json",       "search_all.json",
        "search_graph.json",    "search_text.json",      "scores_all.csv",
        "scores_graph.csv",     "scores_text.csv",       "scores_polar.csv",
        "scores_random.csv",    "roc_all.csv",           "roc_graph.csv",
        "roc_text.csv",         "roc_polar.csv",         "roc_random.csv",
        "roc.svg",              "metrics.json",          "importance.csv",
        "importance.svg",       "flow.csv",              "flow.json",
        "persuasiveness.csv",   "community_topics.csv",  "report.json",
    };
    json manifest;
    manifest["tool"] = "shiftscope";
    manifest["version"] = kVersion;
    manifest["seed"] = config.seed;
    manifest["config_hash"] = config_hash(config);
    manifest["config"] = json::parse(config_json(config));
    json artifacts = json::array();
    for (const char* name : kArtifacts) {
        if (fs::exists(art(config, name))) artifacts.push_back(name);
    }
    manifest["artifacts"] = std::move(artifacts);
    write_json_file(art(config, "manifest.json"), manifest, provenance_line(config));
}

}  // namespace shiftscope
