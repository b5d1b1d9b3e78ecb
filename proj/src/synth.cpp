#include "shiftscope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/rng.hpp"

namespace shiftscope {

SynthConfig two_community_config() {
    SynthConfig config;
    config.community_sizes = {500, 500};
    config.persuasive_alpha_boost = {0.0, 0.0};
    config.base_shift_logodds = -1.35;
    config.coef_pagerank_rank = -3.2;
    config.coef_persuasive = 2.4;
    return config;
}

SynthConfig four_community_config() {
    SynthConfig config;
    config.community_sizes = {600, 560, 440, 400};
    config.p_in = 0.02;
    config.p_out = 0.0005;
    config.topic_alpha = 0.15;
    config.persuasive_alpha_boost = {0.0, 0.0, 1.0, 1.0};
    config.base_shift_logodds = 0.5;
    config.coef_pagerank_rank = -18.0;
    config.coef_persuasive = 3.0;
    config.tweets_per_user = {12, 20};
    config.words_per_tweet = {8, 14};
    config.filler_word_rate = 0.2;
    return config;
}

SynthConfig mini_config() {
    SynthConfig config;
    // Dense enough that consensus communities are stable at this scale and
    // nearly every user clears the eligibility filter.
    config.community_sizes = {110, 100};
    config.p_in = 0.12;
    config.p_out = 0.003;
    config.n_topics = 3;
    config.terms_per_topic = 18;
    config.n_filler_terms = 6;
    config.tweets_per_user = {5, 9};
    config.persuasive_alpha_boost = {0.0, 0.0};
    // Keep shifters spread across the degree range: on a graph this small the
    // eligibility filter drops most low-degree users, so a steep rank
    // coefficient would leave almost no labeled shifters.
    config.base_shift_logodds = -1.1;
    config.coef_pagerank_rank = -1.8;
    config.coef_persuasive = 2.4;
    return config;
}

namespace {

void validate(const SynthConfig& c) {
    if (c.community_sizes.size() < 2)
        throw ConfigError("synth: need at least 2 communities");
    for (std::size_t s : c.community_sizes)
        if (s < 2) throw ConfigError("synth: every community needs at least 2 users");
    if (!(c.p_out >= 0.0 && c.p_out < c.p_in && c.p_in <= 1.0))
        throw ConfigError("synth: need 0 <= p_out < p_in <= 1");
    if (c.n_topics < 1) throw ConfigError("synth: n_topics must be >= 1");
    if (c.terms_per_topic < 2) throw ConfigError("synth: terms_per_topic must be >= 2");
    if (c.n_filler_terms < 1) throw ConfigError("synth: n_filler_terms must be >= 1");
    for (int t : c.persuasive_topics)
        if (t < 0 || t >= c.n_topics)
            throw ConfigError("synth: persuasive topic " + std::to_string(t) +
                              " outside 0.." + std::to_string(c.n_topics - 1));
    if (!c.persuasive_alpha_boost.empty() &&
        c.persuasive_alpha_boost.size() != c.community_sizes.size())
        throw ConfigError("synth: persuasive_alpha_boost must match community count");
    if (c.tweets_per_user.first < 1 || c.tweets_per_user.second < c.tweets_per_user.first)
        throw ConfigError("synth: bad tweets_per_user range");
    if (c.words_per_tweet.first < 1 || c.words_per_tweet.second < c.words_per_tweet.first)
        throw ConfigError("synth: bad words_per_tweet range");
    if (c.retweets_per_edge.first < 1 || c.retweets_per_edge.second < c.retweets_per_edge.first)
        throw ConfigError("synth: bad retweets_per_edge range");
    validate_windows(c.window1, c.window2);

    const std::size_t total = std::accumulate(c.community_sizes.begin(),
                                              c.community_sizes.end(), std::size_t{0});
    for (std::size_t ci = 0; ci < c.community_sizes.size(); ++ci) {
        const double expected =
            static_cast<double>(c.community_sizes[ci] - 1) * c.p_in +
            static_cast<double>(total - c.community_sizes[ci]) * c.p_out;
        if (expected < 1.0)
            throw ConfigError("synth: community " + std::to_string(ci) +
                              " expects fewer than 1 edge per user; the graph would shatter");
    }
}

std::string padded_id(const char* prefix, std::size_t value, std::size_t width) {
    std::string digits = std::to_string(value);
    std::string out(prefix);
    out.append(width > digits.size() ? width - digits.size() : 0, '0');
    out += digits;
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> draw_sbm_edges(
    const std::vector<int>& community, double p_in, double p_out, Rng& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    const std::size_t n = community.size();
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
            if (rng.bernoulli(community[u] == community[v] ? p_in : p_out))
                edges.emplace_back(u, v);
    return edges;
}

}  // namespace

SynthResult generate(const SynthConfig& config) {
    validate(config);
    const std::size_t n_users = std::accumulate(config.community_sizes.begin(),
                                                config.community_sizes.end(), std::size_t{0});
    const std::size_t id_width = std::to_string(n_users).size();

    std::vector<int> community1;
    for (std::size_t c = 0; c < config.community_sizes.size(); ++c)
        community1.insert(community1.end(), config.community_sizes[c], static_cast<int>(c));

    std::vector<std::string> user_ids(n_users), handles(n_users);
    for (std::size_t u = 0; u < n_users; ++u) {
        user_ids[u] = padded_id("u", u, id_width);
        handles[u] = padded_id("user", u, id_width);
    }

    // Vocabulary: distinct single words per topic plus shared filler words.
    std::vector<std::vector<std::string>> topic_terms(
        static_cast<std::size_t>(config.n_topics));
    for (int t = 0; t < config.n_topics; ++t)
        for (int j = 0; j < config.terms_per_topic; ++j)
            topic_terms[static_cast<std::size_t>(t)].push_back(
                "topic" + std::to_string(t) + "term" + padded_id("", static_cast<std::size_t>(j), 2));
    std::vector<std::string> fillers;
    for (int j = 0; j < config.n_filler_terms; ++j)
        fillers.push_back("filler" + padded_id("", static_cast<std::size_t>(j), 2));

    // Per-user topic mixtures: Dirichlet with a per-community boost on the
    // persuasive topics.
    std::vector<std::vector<double>> mixtures(n_users);
    for (std::size_t u = 0; u < n_users; ++u) {
        Rng rng(derive_seed(config.seed, "mixture", u));
        const double boost = config.persuasive_alpha_boost.empty()
                                 ? 0.0
                                 : config.persuasive_alpha_boost[static_cast<std::size_t>(
                                       community1[u])];
        std::vector<double> mixture(static_cast<std::size_t>(config.n_topics));
        double sum = 0.0;
        for (int t = 0; t < config.n_topics; ++t) {
            const bool persuasive = std::find(config.persuasive_topics.begin(),
                                              config.persuasive_topics.end(),
                                              t) != config.persuasive_topics.end();
            const double alpha = config.topic_alpha + (persuasive ? boost : 0.0);
            mixture[static_cast<std::size_t>(t)] = rng.gamma(alpha);
            sum += mixture[static_cast<std::size_t>(t)];
        }
        if (sum <= 0.0) sum = 1.0;
        for (double& m : mixture) m /= sum;
        mixtures[u] = std::move(mixture);
    }

    // Period-1 graph, then degree ranks within each community.
    Rng edge_rng1(derive_seed(config.seed, "edges-p1"));
    const auto edges1 = draw_sbm_edges(community1, config.p_in, config.p_out, edge_rng1);
    std::vector<std::size_t> degree(n_users, 0);
    for (const auto& [u, v] : edges1) {
        ++degree[u];
        ++degree[v];
    }
    std::vector<double> rank_pct(n_users, 0.0);
    for (std::size_t c = 0; c < config.community_sizes.size(); ++c) {
        std::vector<std::size_t> members;
        for (std::size_t u = 0; u < n_users; ++u)
            if (community1[u] == static_cast<int>(c)) members.push_back(u);
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            if (degree[a] != degree[b]) return degree[a] < degree[b];
            return a < b;
        });
        for (std::size_t r = 0; r < members.size(); ++r)
            rank_pct[members[r]] =
                members.size() > 1
                    ? static_cast<double>(r) / static_cast<double>(members.size() - 1)
                    : 0.0;
    }

    // The two largest communities (ties to the lower id) receive shifters.
    std::vector<std::size_t> size_order(config.community_sizes.size());
    std::iota(size_order.begin(), size_order.end(), std::size_t{0});
    std::stable_sort(size_order.begin(), size_order.end(), [&](std::size_t a, std::size_t b) {
        return config.community_sizes[a] > config.community_sizes[b];
    });
    const int main_a = static_cast<int>(size_order[0]);
    const int main_b = static_cast<int>(size_order[1]);

    SynthResult result;
    result.filler_terms = fillers;
    std::vector<int> community2(community1);
    double expected_shifters = 0.0;
    for (std::size_t u = 0; u < n_users; ++u) {
        double usage = 0.0;
        for (int t : config.persuasive_topics) usage += mixtures[u][static_cast<std::size_t>(t)];
        const double logit = config.base_shift_logodds +
                             config.coef_pagerank_rank * rank_pct[u] +
                             config.coef_persuasive * usage;
        const double p = 1.0 / (1.0 + std::exp(-logit));
        expected_shifters += p;
        Rng rng(derive_seed(config.seed, "shift", u));
        if (!rng.bernoulli(p)) continue;
        ++result.truth.realized_shifters;
        if (community1[u] == main_a)
            community2[u] = main_b;
        else if (community1[u] == main_b)
            community2[u] = main_a;
        else
            community2[u] = rng.bernoulli(0.5) ? main_a : main_b;
    }
    result.truth.expected_shift_fraction = expected_shifters / static_cast<double>(n_users);

    Rng edge_rng2(derive_seed(config.seed, "edges-p2"));
    const auto edges2 = draw_sbm_edges(community2, config.p_in, config.p_out, edge_rng2);

    // Tweets: originals from the user's own mixture, retweet records along
    // every edge in both directions (the retweeter echoes their own topics).
    std::size_t tweet_counter = 0;
    auto make_text = [&](std::size_t user, Rng& rng) {
        const int length = static_cast<int>(
            rng.uniform_int(config.words_per_tweet.first, config.words_per_tweet.second));
        const auto topic = static_cast<std::size_t>([&] {
            double target = rng.uniform01();
            for (std::size_t t = 0; t < mixtures[user].size(); ++t) {
                target -= mixtures[user][t];
                if (target < 0.0) return static_cast<int>(t);
            }
            return config.n_topics - 1;
        }());
        std::string text;
        for (int wi = 0; wi < length; ++wi) {
            if (wi > 0) text.push_back(' ');
            if (rng.bernoulli(config.filler_word_rate))
                text += fillers[rng.uniform_below(fillers.size())];
            else
                text += topic_terms[topic][rng.uniform_below(topic_terms[topic].size())];
        }
        return text;
    };

    auto build_corpus = [&](const PeriodWindow& window,
                            const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                            std::string_view tweet_tag, std::string_view retweet_tag) {
        Corpus corpus;
        corpus.period = window;
        const auto span = static_cast<std::uint64_t>(window.end - window.start);
        for (std::size_t u = 0; u < n_users; ++u) {
            Rng rng(derive_seed(derive_seed(config.seed, tweet_tag), u));
            const int n_tweets = static_cast<int>(
                rng.uniform_int(config.tweets_per_user.first, config.tweets_per_user.second));
            for (int i = 0; i < n_tweets; ++i) {
                TweetRecord record;
                record.tweet_id = padded_id("t", tweet_counter++, 8);
                record.author_id = user_ids[u];
                record.author_handle = handles[u];
                record.timestamp =
                    window.start + static_cast<std::int64_t>(rng.uniform_below(span));
                record.text = make_text(u, rng);
                corpus.records.push_back(std::move(record));
            }
        }
        Rng rng(derive_seed(config.seed, retweet_tag));
        for (const auto& [u, v] : edges) {
            for (const auto& [author, source] :
                 {std::pair{u, v}, std::pair{v, u}}) {
                const int n_retweets = static_cast<int>(rng.uniform_int(
                    config.retweets_per_edge.first, config.retweets_per_edge.second));
                for (int i = 0; i < n_retweets; ++i) {
                    TweetRecord record;
                    record.tweet_id = padded_id("t", tweet_counter++, 8);
                    record.author_id = user_ids[author];
                    record.author_handle = handles[author];
                    record.timestamp =
                        window.start + static_cast<std::int64_t>(rng.uniform_below(span));
                    record.text = "rt @" + handles[source] + " " + make_text(author, rng);
                    record.retweet_of_author_id = user_ids[source];
                    corpus.records.push_back(std::move(record));
                }
            }
        }
        for (std::size_t i = 0; i < corpus.records.size(); ++i)
            corpus.by_author[corpus.records[i].author_id].push_back(i);
        return corpus;
    };

    result.corpus1 = build_corpus(config.window1, edges1, "tweets-p1", "retweets-p1");
    result.corpus2 = build_corpus(config.window2, edges2, "tweets-p2", "retweets-p2");

    result.truth.rows.reserve(n_users);
    for (std::size_t u = 0; u < n_users; ++u) {
        GroundTruthRow row;
        row.user = user_ids[u];
        row.community1 = community1[u];
        row.community2 = community2[u];
        row.shifted = community1[u] != community2[u];
        row.mixture = mixtures[u];
        result.truth.rows.push_back(std::move(row));
    }

    // Planted guarantee: shifters use the persuasive topics more on average.
    if (config.coef_persuasive > 0.0 && result.truth.realized_shifters > 0 &&
        result.truth.realized_shifters < n_users) {
        double shift_usage = 0.0, stay_usage = 0.0;
        std::size_t n_shift = 0, n_stay = 0;
        for (const auto& row : result.truth.rows) {
            double usage = 0.0;
            for (int t : config.persuasive_topics)
                usage += row.mixture[static_cast<std::size_t>(t)];
            if (row.shifted) {
                shift_usage += usage;
                ++n_shift;
            } else {
                stay_usage += usage;
                ++n_stay;
            }
        }
        if (shift_usage / static_cast<double>(n_shift) <=
            stay_usage / static_cast<double>(n_stay))
            throw ContractViolation(
                "synth: planted persuasive usage is not higher among shifters; "
                "the configured coefficients are too weak for this seed");
    }
    return result;
}

void write_ground_truth_csv(const std::filesystem::path& path, const GroundTruth& truth,
                            const std::string& provenance) {
    CsvTable table;
    table.header = {"user", "community_p1", "community_p2", "shifted"};
    for (const auto& row : truth.rows)
        table.rows.push_back({row.user, std::to_string(row.community1),
                              std::to_string(row.community2), row.shifted ? "1" : "0"});
    write_csv(path, table, provenance);
}

}  // namespace shiftscope
