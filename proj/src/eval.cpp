#include "shiftscope/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/parallel.hpp"
#include "shiftscope/rng.hpp"

namespace shiftscope {

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ContractViolation("roc_auc: " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(labels.size()) + " labels");
    const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw DataError("roc_auc: AUC undefined with a single class");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // Consume the whole tie group before emitting a point.
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1)
                ++tp;
            else
                ++fp;
            ++i;
        }
        curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                                  static_cast<double>(tp) / static_cast<double>(n_pos));
    }

    double auc = 0.0;
    for (std::size_t p = 1; p < curve.points.size(); ++p) {
        const auto& [x1, y1] = curve.points[p - 1];
        const auto& [x2, y2] = curve.points[p];
        auc += (x2 - x1) * (y1 + y2) * 0.5;
    }
    curve.auc = auc;
    return curve;
}

ImportanceReport permutation_importance(const GBDTModel& model, const LabeledDataset& test_set,
                                        int n_repeats, std::uint64_t seed) {
    if (n_repeats < 1) throw ConfigError("permutation_importance: n_repeats must be >= 1");
    ImportanceReport report;
    report.n_repeats = n_repeats;
    report.baseline_auc = roc_auc(predict_proba(model, test_set), test_set.targets).auc;

    const std::size_t n_features = test_set.n_features();
    const auto repeats = static_cast<std::size_t>(n_repeats);
    std::vector<double> drops(n_features * repeats);
    const std::uint64_t base = derive_seed(seed, "permutation-importance");

    parallel_for(n_features * repeats, [&](std::size_t job) {
        const std::size_t f = job / repeats;
        const std::size_t r = job % repeats;
        std::vector<double> column(test_set.size());
        for (std::size_t i = 0; i < test_set.size(); ++i) column[i] = test_set.features[i][f];
        Rng rng(derive_seed(base, f, r));
        rng.shuffle(column);

        LabeledDataset permuted = test_set;
        for (std::size_t i = 0; i < permuted.size(); ++i) permuted.features[i][f] = column[i];
        const double auc = roc_auc(predict_proba(model, permuted), permuted.targets).auc;
        drops[job] = report.baseline_auc - auc;
    });

    std::vector<std::size_t> feature_order(n_features);
    std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});
    std::vector<double> means(n_features), stds(n_features);
    for (std::size_t f = 0; f < n_features; ++f) {
        double sum = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) sum += drops[f * repeats + r];
        means[f] = sum / static_cast<double>(repeats);
        double var = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            const double d = drops[f * repeats + r] - means[f];
            var += d * d;
        }
        // Standard error of the reported mean, so more repeats mean a
        // tighter estimate.
        const double variance = var / static_cast<double>(repeats);
        stds[f] = std::sqrt(variance / static_cast<double>(repeats));
    }
    std::stable_sort(feature_order.begin(), feature_order.end(),
                     [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
    for (std::size_t f : feature_order)
        report.entries.push_back({test_set.feature_names[f], means[f], stds[f]});
    return report;
}

PageRankGap pagerank_gap(const LabeledDataset& ds) {
    const auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), "pagerank");
    if (it == ds.feature_names.end())
        throw ContractViolation("pagerank_gap: dataset has no pagerank feature");
    const auto col = static_cast<std::size_t>(it - ds.feature_names.begin());

    double sum_shift = 0.0, sum_stay = 0.0;
    std::size_t n_shift = 0, n_stay = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.targets[i] == 1) {
            sum_shift += ds.features[i][col];
            ++n_shift;
        } else {
            sum_stay += ds.features[i][col];
            ++n_stay;
        }
    }
    if (n_shift == 0 || n_stay == 0)
        throw DataError("pagerank_gap: a class is empty (shifting=" + std::to_string(n_shift) +
                        ", non-shifting=" + std::to_string(n_stay) + ")");
    PageRankGap gap;
    gap.mean_shifting = sum_shift / static_cast<double>(n_shift);
    gap.mean_non_shifting = sum_stay / static_cast<double>(n_stay);
    gap.ratio = gap.mean_non_shifting / gap.mean_shifting;
    return gap;
}

CommunityTopicDistribution community_topic_distribution(
    const std::map<std::string, UserTopicProfile>& profiles, const ConsensusLabeling& labeling) {
    CommunityTopicDistribution out;
    std::map<int, std::size_t> counts;
    for (const auto& [user, community] : labeling.stable) {
        auto it = profiles.find(user);
        if (it == profiles.end())
            throw ContractViolation("community_topic_distribution: user " + user +
                                    " has no profile");
        auto& weights = out.weights[community];
        if (weights.empty()) weights.assign(it->second.fractions.size(), 0.0);
        for (std::size_t t = 0; t < it->second.fractions.size(); ++t)
            weights[t] += it->second.fractions[t];
        ++counts[community];
    }
    for (auto& [community, weights] : out.weights) {
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (total <= 0.0) {
            out.warnings.push_back("community " + std::to_string(community) +
                                   " has an all-zero topic distribution");
            continue;
        }
        for (double& w : weights) w /= total;
    }
    return out;
}

namespace {

std::vector<int> top3(const std::vector<double>& values,
                      const std::vector<double>& order_by) {
    std::vector<int> ids;
    for (std::size_t t = 0; t < values.size(); ++t)
        if (values[t] > 0.0) ids.push_back(static_cast<int>(t));
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        return order_by[static_cast<std::size_t>(a)] > order_by[static_cast<std::size_t>(b)];
    });
    if (ids.size() > 3) ids.resize(3);
    return ids;
}

}  // namespace

TopicFlowReport flow_report(const ConsensusLabeling& labeling1,
                            const ConsensusLabeling& labeling2,
                            const CommunityMatching& matching,
                            const std::map<std::string, UserTopicProfile>& profiles,
                            const std::set<std::string>& eligible, double threshold,
                            const std::vector<double>& persuasiveness_scores) {
    TopicFlowReport report;
    report.threshold = threshold;
    const std::size_t k = matching.pairs.size();

    std::map<int, std::size_t> origin_of, dest_of;  // community id -> pair index
    for (std::size_t i = 0; i < k; ++i) {
        origin_of.emplace(matching.pairs[i].c1, i);
        dest_of.emplace(matching.pairs[i].c2, i);
    }

    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(k, 0));
    std::vector<std::vector<std::vector<double>>> profile_sums(
        k, std::vector<std::vector<double>>(k));
    std::vector<std::vector<double>> origin_profile_sum(k);
    std::vector<std::size_t> origin_total(k, 0);

    for (const auto& user : eligible) {
        const int c1 = labeling1.stable.at(user);
        const int p2 = labeling2.stable.at(user);
        const UserTopicProfile& profile = profiles.at(user);
        const std::size_t i = origin_of.at(c1);
        const std::size_t j = dest_of.at(p2);
        ++counts[i][j];
        ++origin_total[i];
        auto& cell = profile_sums[i][j];
        if (cell.empty()) cell.assign(profile.fractions.size(), 0.0);
        for (std::size_t t = 0; t < profile.fractions.size(); ++t)
            cell[t] += profile.fractions[t];
        auto& origin_sum = origin_profile_sum[i];
        if (origin_sum.empty()) origin_sum.assign(profile.fractions.size(), 0.0);
        for (std::size_t t = 0; t < profile.fractions.size(); ++t)
            origin_sum[t] += profile.fractions[t];
    }

    for (std::size_t i = 0; i < k; ++i) {
        if (origin_total[i] == 0) continue;
        const int c1 = matching.pairs[i].c1;

        std::vector<double> community = origin_profile_sum[i];
        const double total = std::accumulate(community.begin(), community.end(), 0.0);
        if (total > 0.0)
            for (double& w : community) w /= total;
        report.community_topics.emplace(c1, std::move(community));

        for (std::size_t j = 0; j < k; ++j) {
            const bool stay = i == j;
            if (counts[i][j] == 0 && !stay) continue;
            FlowArrow arrow;
            arrow.c1 = c1;
            arrow.c2 = matching.pairs[j].c1;  // destination as its period-1 counterpart
            arrow.stay = stay;
            arrow.count = counts[i][j];
            arrow.pct =
                100.0 * static_cast<double>(counts[i][j]) / static_cast<double>(origin_total[i]);
            arrow.suppressed = !stay && arrow.pct < threshold * 100.0;
            if (!profile_sums[i][j].empty()) {
                arrow.mover_topic_mean = profile_sums[i][j];
                for (double& v : arrow.mover_topic_mean)
                    v /= static_cast<double>(counts[i][j]);
            }
            if (!arrow.mover_topic_mean.empty()) {
                arrow.top_topics_by_share = top3(arrow.mover_topic_mean, arrow.mover_topic_mean);
                arrow.top_topics_by_persuasiveness =
                    persuasiveness_scores.empty()
                        ? arrow.top_topics_by_share
                        : top3(arrow.mover_topic_mean, persuasiveness_scores);
            }
            report.arrows.push_back(std::move(arrow));
        }
    }
    return report;
}

std::vector<double> persuasiveness(const std::map<std::string, UserTopicProfile>& profiles,
                                   const std::map<std::string, int>& targets, double smoothing) {
    std::vector<double> sum_shift, sum_stay;
    std::size_t n_shift = 0, n_stay = 0;
    for (const auto& [user, target] : targets) {
        auto it = profiles.find(user);
        if (it == profiles.end())
            throw ContractViolation("persuasiveness: user " + user + " has no profile");
        const auto& fractions = it->second.fractions;
        if (sum_shift.empty()) {
            sum_shift.assign(fractions.size(), 0.0);
            sum_stay.assign(fractions.size(), 0.0);
        }
        auto& sums = target == 1 ? sum_shift : sum_stay;
        ++(target == 1 ? n_shift : n_stay);
        for (std::size_t t = 0; t < fractions.size(); ++t) sums[t] += fractions[t];
    }
    if (n_shift == 0 || n_stay == 0)
        throw DataError("persuasiveness: both shifting and non-shifting users are required");

    std::vector<double> scores(sum_shift.size());
    for (std::size_t t = 0; t < scores.size(); ++t) {
        const double mean_shift = sum_shift[t] / static_cast<double>(n_shift);
        const double mean_stay = sum_stay[t] / static_cast<double>(n_stay);
        scores[t] = (mean_shift + smoothing) / (mean_stay + smoothing);
    }
    return scores;
}

std::vector<int> rank_topics(const std::vector<double>& scores) {
    std::vector<int> ids(scores.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    return ids;
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve,
                   const std::string& provenance) {
    CsvTable table;
    table.header = {"fpr", "tpr"};
    for (const auto& [fpr, tpr] : curve.points)
        table.rows.push_back({format_double(fpr), format_double(tpr)});
    write_csv(path, table, provenance);
}

namespace {

const char* kPalette[] = {"#c23b22", "#1f6f8b", "#4a7c59", "#8e6c8a", "#b0803c", "#555555"};

std::string svg_num(double v) { return format_double(std::round(v * 100.0) / 100.0); }

}  // namespace

void write_roc_svg(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, RocCurve>>& curves) {
    const double size = 480.0, margin = 50.0, span = size - 2.0 * margin;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\""
        << size << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
    svg << "<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << size - margin << "\" x2=\"" << size - margin
        << "\" y2=\"" << size - margin << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << size - margin << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << margin << "\" y1=\"" << size - margin << "\" x2=\"" << size - margin
        << "\" y2=\"" << margin << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"6 4\"/>\n";
    svg << "<text x=\"" << size / 2 << "\" y=\"" << size - 12
        << "\" text-anchor=\"middle\" font-size=\"13\">false positive rate</text>\n";
    svg << "<text x=\"14\" y=\"" << size / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 14 " << size / 2
        << ")\">true positive rate</text>\n";

    std::size_t color = 0;
    double legend_y = margin + 16.0;
    for (const auto& [name, curve] : curves) {
        const char* stroke = kPalette[color % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.6\" points=\"";
        for (const auto& [fpr, tpr] : curve.points)
            svg << svg_num(margin + fpr * span) << ',' << svg_num(size - margin - tpr * span)
                << ' ';
        svg << "\"/>\n";
        svg << "<text x=\"" << size - margin - 6 << "\" y=\"" << legend_y
            << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << stroke << "\">" << name
            << " (auc " << svg_num(curve.auc) << ")</text>\n";
        legend_y += 16.0;
        ++color;
    }
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

void write_importance_csv(const std::filesystem::path& path, const ImportanceReport& report,
                          const std::string& provenance) {
    CsvTable table;
    table.header = {"feature", "mean_auc_drop", "std_auc_drop", "n_repeats", "baseline_auc"};
    for (const auto& entry : report.entries)
        table.rows.push_back({entry.feature, format_double(entry.mean_drop),
                              format_double(entry.std_drop), std::to_string(report.n_repeats),
                              format_double(report.baseline_auc)});
    write_csv(path, table, provenance);
}

void write_importance_svg(const std::filesystem::path& path, const ImportanceReport& report) {
    const double width = 520.0, row_h = 22.0, label_w = 170.0, margin = 16.0;
    const double height = margin * 2 + row_h * static_cast<double>(report.entries.size());
    double max_drop = 1e-12;
    for (const auto& entry : report.entries) max_drop = std::max(max_drop, entry.mean_drop);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << svg_num(height) << "\" viewBox=\"0 0 " << width << ' ' << svg_num(height) << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << svg_num(height)
        << "\" fill=\"white\"/>\n";
    double y = margin;
    for (const auto& entry : report.entries) {
        const double bar = std::max(0.0, entry.mean_drop) / max_drop * (width - label_w - 90.0);
        svg << "<text x=\"" << label_w - 8 << "\" y=\"" << svg_num(y + row_h * 0.7)
            << "\" text-anchor=\"end\" font-size=\"12\">" << entry.feature << "</text>\n";
        svg << "<rect x=\"" << label_w << "\" y=\"" << svg_num(y + 3) << "\" width=\""
            << svg_num(bar) << "\" height=\"" << row_h - 8 << "\" fill=\"#1f6f8b\"/>\n";
        svg << "<text x=\"" << svg_num(label_w + bar + 6) << "\" y=\""
            << svg_num(y + row_h * 0.7) << "\" font-size=\"11\">"
            << format_double(entry.mean_drop) << "</text>\n";
        y += row_h;
    }
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back('|');
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

void write_flow_csv(const std::filesystem::path& path, const TopicFlowReport& report,
                    const std::string& provenance) {
    CsvTable table;
    table.header = {"origin",     "destination", "stay",
                    "count",      "pct",         "suppressed",
                    "top_topics_by_share", "top_topics_by_persuasiveness"};
    for (const auto& arrow : report.arrows)
        table.rows.push_back({std::to_string(arrow.c1), std::to_string(arrow.c2),
                              arrow.stay ? "1" : "0", std::to_string(arrow.count),
                              format_double(arrow.pct), arrow.suppressed ? "1" : "0",
                              join_ints(arrow.top_topics_by_share),
                              join_ints(arrow.top_topics_by_persuasiveness)});
    write_csv(path, table, provenance);
}

void write_flow_json(const std::filesystem::path& path, const TopicFlowReport& report,
                     const std::string& provenance) {
    nlohmann::json doc;
    doc["threshold"] = report.threshold;
    if (!provenance.empty()) doc["provenance"] = provenance;
    nlohmann::json arrows = nlohmann::json::array();
    for (const auto& arrow : report.arrows) {
        arrows.push_back({{"origin", arrow.c1},
                          {"destination", arrow.c2},
                          {"stay", arrow.stay},
                          {"count", arrow.count},
                          {"pct", arrow.pct},
                          {"suppressed", arrow.suppressed},
                          {"mover_topic_mean", arrow.mover_topic_mean},
                          {"top_topics_by_share", arrow.top_topics_by_share},
                          {"top_topics_by_persuasiveness", arrow.top_topics_by_persuasiveness}});
    }
    doc["arrows"] = std::move(arrows);
    nlohmann::json communities = nlohmann::json::object();
    for (const auto& [community, weights] : report.community_topics)
        communities[std::to_string(community)] = weights;
    doc["community_topics"] = std::move(communities);
    write_text_file(path, doc.dump(2) + "\n");
}

void write_persuasiveness_csv(const std::filesystem::path& path,
                              const std::vector<double>& scores,
                              const std::string& provenance) {
    CsvTable table;
    table.header = {"topic", "score", "rank"};
    const std::vector<int> ranking = rank_topics(scores);
    std::vector<int> rank_of(scores.size());
    for (std::size_t r = 0; r < ranking.size(); ++r)
        rank_of[static_cast<std::size_t>(ranking[r])] = static_cast<int>(r);
    for (std::size_t t = 0; t < scores.size(); ++t)
        table.rows.push_back({std::to_string(t), format_double(scores[t]),
                              std::to_string(rank_of[t])});
    write_csv(path, table, provenance);
}

}  // namespace shiftscope
