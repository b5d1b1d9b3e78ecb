#include <cstdint>
#include <exception>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/parallel.hpp"
#include "shiftscope/pipeline.hpp"
#include "shiftscope/version.hpp"

namespace {

using shiftscope::PipelineConfig;

void run_stage(const std::string& name, const PipelineConfig& config) {
    using Stage = void (*)(const PipelineConfig&);
    static const std::map<std::string, Stage> stages = {
        {"synth", shiftscope::stage_synth},         {"ingest", shiftscope::stage_ingest},
        {"graph", shiftscope::stage_graph},         {"communities", shiftscope::stage_communities},
        {"topics", shiftscope::stage_topics},       {"features", shiftscope::stage_features},
        {"train", shiftscope::stage_train},         {"evaluate", shiftscope::stage_evaluate},
        {"report", shiftscope::stage_report},       {"pipeline", shiftscope::run_pipeline},
    };
    stages.at(name)(config);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shiftscope: predict users who change community between two periods of a "
                 "retweet network"};
    app.set_version_flag("--version", shiftscope::kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string lang;
    std::uint64_t seed = 0;
    int threads = 0;
    bool stratified = true;

    auto* config_opt = app.add_option("--config", config_path, "JSON run configuration");
    auto* out_opt = app.add_option("--out", out_dir, "output directory for artifacts");
    auto* seed_opt = app.add_option("--seed", seed, "master random seed");
    auto* threads_opt =
        app.add_option("--threads", threads, "worker thread cap (never affects results)")
            ->check(CLI::PositiveNumber);
    auto* strat_opt = app.add_flag("--stratified,!--no-stratified", stratified,
                                   "class-stratified train/test split");
    auto* lang_opt = app.add_option("--lang", lang, "keep only tweets with this language tag");

    struct SubcommandSpec {
        const char* name;
        const char* help;
    };
    static const SubcommandSpec kSubcommands[] = {
        {"synth", "generate a planted synthetic tweet corpus"},
        {"ingest", "parse tweets and split them into the two period corpora"},
        {"graph", "build the per-period retweet graphs and node metrics"},
        {"communities", "detect consensus communities and match them across periods"},
        {"topics", "fit the topic model and per-user topic profiles"},
        {"features", "assemble the labeled shift-prediction dataset"},
        {"train", "tune and fit the boosted-tree models"},
        {"evaluate", "score models and baselines on the held-out split"},
        {"report", "write importance, flow and persuasiveness reports"},
        {"pipeline", "run every stage end to end"},
    };
    for (const auto& spec : kSubcommands) {
        app.add_subcommand(spec.name, spec.help)->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        PipelineConfig config = config_path.empty()
                                    ? shiftscope::default_pipeline_config()
                                    : shiftscope::load_pipeline_config(config_path);
        if (*config_opt && config_path.empty()) {
            throw shiftscope::ConfigError("--config requires a path");
        }
        if (*out_opt) config.out_dir = out_dir;
        if (*seed_opt) config.seed = seed;
        if (*lang_opt) config.lang = lang;
        if (*strat_opt) config.stratified = stratified;
        if (*threads_opt) shiftscope::set_max_threads(threads);

        run_stage(app.get_subcommands().front()->get_name(), config);
        return 0;
    } catch (const shiftscope::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const shiftscope::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
