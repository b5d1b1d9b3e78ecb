#include "shiftscope/topics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/parallel.hpp"
#include "shiftscope/rng.hpp"

namespace shiftscope {

namespace {

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

// Lowercase ASCII, drop ASCII punctuation, pass other bytes (UTF-8 tails)
// through untouched.
std::string normalize_token(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    std::size_t start = 0;
    while (start < raw.size() && raw[start] == '#') ++start;  // keep hashtag bodies
    for (std::size_t i = start; i < raw.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(raw[i]);
        if (is_ascii_punct(c)) continue;
        out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : raw[i]);
    }
    return out;
}

std::string ascii_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (static_cast<unsigned char>(c) < 0x80)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text,
                                  const std::set<std::string>& stopwords) {
    std::vector<std::string> tokens;
    std::istringstream stream(text);
    std::string raw;
    while (stream >> raw) {
        if (raw[0] == '@') continue;
        const std::string lowered = ascii_lower(raw);
        if (lowered.rfind("http://", 0) == 0 || lowered.rfind("https://", 0) == 0) continue;
        std::string token = normalize_token(raw);
        if (token.empty() || token == "rt") continue;
        if (stopwords.count(token)) continue;
        tokens.push_back(std::move(token));
    }
    return tokens;
}

std::vector<std::string> word_ngrams(const std::vector<std::string>& tokens, int ngram_min,
                                     int ngram_max) {
    std::vector<std::string> grams;
    for (int n = ngram_min; n <= ngram_max; ++n) {
        if (n < 1 || tokens.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (int j = 1; j < n; ++j) {
                gram.push_back(' ');
                gram += tokens[i + static_cast<std::size_t>(j)];
            }
            grams.push_back(std::move(gram));
        }
    }
    return grams;
}

namespace {

void check_ngram_range(int ngram_min, int ngram_max) {
    if (ngram_min != 1 || ngram_max < 1 || ngram_max > 3)
        throw ConfigError("ngram range (" + std::to_string(ngram_min) + "," +
                          std::to_string(ngram_max) + ") outside supported (1,1)..(1,3)");
}

}  // namespace

Vocabulary build_vocabulary(const Corpus& corpus, int ngram_min, int ngram_max,
                            const std::set<std::string>& stopwords, int min_df) {
    check_ngram_range(ngram_min, ngram_max);
    if (min_df < 1) throw ConfigError("min_df must be >= 1, got " + std::to_string(min_df));

    const std::size_t n_docs = corpus.records.size();
    std::vector<std::vector<std::string>> doc_grams(n_docs);
    parallel_for(n_docs, [&](std::size_t i) {
        std::vector<std::string> grams =
            word_ngrams(tokenize(corpus.records[i].text, stopwords), ngram_min, ngram_max);
        std::sort(grams.begin(), grams.end());
        grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
        doc_grams[i] = std::move(grams);
    });

    std::map<std::string, std::int64_t> df;
    for (const auto& grams : doc_grams)
        for (const auto& g : grams) ++df[g];

    Vocabulary vocab;
    vocab.ngram_min = ngram_min;
    vocab.ngram_max = ngram_max;
    vocab.stopwords = stopwords;
    vocab.min_df = min_df;
    for (const auto& [term, count] : df) {
        if (count < min_df) continue;
        vocab.index.emplace(term, static_cast<int>(vocab.terms.size()));
        vocab.terms.push_back(term);
        vocab.df.push_back(count);
    }
    if (vocab.terms.empty())
        throw ConfigError("vocabulary is empty after stopword/min_df filtering (min_df=" +
                          std::to_string(min_df) + ")");
    return vocab;
}

SparseRowMatrix tfidf(const Corpus& corpus, const Vocabulary& vocab) {
    const std::size_t n_docs = corpus.records.size();
    const std::size_t n_terms = vocab.size();
    std::vector<double> idf(n_terms);
    const double n = static_cast<double>(n_docs);
    for (std::size_t t = 0; t < n_terms; ++t)
        idf[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(vocab.df[t]))) + 1.0;

    using Triplet = Eigen::Triplet<double>;
    const std::size_t n_chunks = chunk_count(n_docs);
    std::vector<std::vector<Triplet>> chunk_triplets(n_chunks);
    parallel_chunks(n_docs, [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
        std::vector<Triplet>& triplets = chunk_triplets[chunk];
        std::map<int, double> counts;
        for (std::size_t i = lo; i < hi; ++i) {
            counts.clear();
            for (const std::string& gram :
                 word_ngrams(tokenize(corpus.records[i].text, vocab.stopwords), vocab.ngram_min,
                             vocab.ngram_max)) {
                auto it = vocab.index.find(gram);
                if (it != vocab.index.end()) counts[it->second] += 1.0;
            }
            double norm_sq = 0.0;
            for (auto& [col, tf] : counts) {
                tf *= idf[static_cast<std::size_t>(col)];
                norm_sq += tf * tf;
            }
            if (norm_sq == 0.0) continue;
            const double inv_norm = 1.0 / std::sqrt(norm_sq);
            for (const auto& [col, weight] : counts)
                triplets.emplace_back(static_cast<int>(i), col, weight * inv_norm);
        }
    });

    std::vector<Triplet> all;
    std::size_t total = 0;
    for (const auto& part : chunk_triplets) total += part.size();
    all.reserve(total);
    for (const auto& part : chunk_triplets) all.insert(all.end(), part.begin(), part.end());

    SparseRowMatrix m(static_cast<Eigen::Index>(n_docs), static_cast<Eigen::Index>(n_terms));
    m.setFromTriplets(all.begin(), all.end());
    m.makeCompressed();
    return m;
}

namespace {

double frobenius_norm(const SparseRowMatrix& m) {
    double sum = 0.0;
    for (int i = 0; i < m.outerSize(); ++i)
        for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) sum += it.value() * it.value();
    return std::sqrt(sum);
}

// ||M - HW||_F via ||M||^2 - 2<M,HW> + <H'H, WW'>, touching only M's nonzeros.
double reconstruction_error(const SparseRowMatrix& m, double m_norm_sq,
                            const Eigen::MatrixXd& h, const Eigen::MatrixXd& w) {
    double cross = 0.0;
    for (int i = 0; i < m.outerSize(); ++i)
        for (SparseRowMatrix::InnerIterator it(m, i); it; ++it)
            cross += it.value() * h.row(it.row()).dot(w.col(it.col()));
    const Eigen::MatrixXd hth = h.transpose() * h;
    const Eigen::MatrixXd wwt = w * w.transpose();
    const double approx_sq = hth.cwiseProduct(wwt).sum();
    return std::sqrt(std::max(0.0, m_norm_sq - 2.0 * cross + approx_sq));
}

}  // namespace

TopicModel nmf(const SparseRowMatrix& m, int k, std::uint64_t seed, double tol, int max_iter) {
    const Eigen::Index rows = m.rows();
    const Eigen::Index cols = m.cols();
    if (k < 1 || k > std::min(rows, cols))
        throw ConfigError("nmf: k=" + std::to_string(k) + " outside 1.." +
                          std::to_string(std::min(rows, cols)));
    if (max_iter < 1) throw ConfigError("nmf: max_iter must be >= 1");

    TopicModel model;
    model.k = k;
    model.seed = seed;
    model.tol = tol;

    const double m_sum = [&] {
        double s = 0.0;
        for (int i = 0; i < m.outerSize(); ++i)
            for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) s += it.value();
        return s;
    }();
    const double mean = m_sum / (static_cast<double>(rows) * static_cast<double>(cols));
    const double scale = std::sqrt(std::max(mean, 1e-12) / static_cast<double>(k));

    Rng rng(derive_seed(seed, "nmf-init"));
    model.h.resize(rows, k);
    model.w.resize(k, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (int j = 0; j < k; ++j) model.h(i, j) = scale * rng.uniform01();
    for (int i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) model.w(i, j) = scale * rng.uniform01();

    const double m_norm_sq = [&] {
        const double f = frobenius_norm(m);
        model.m_norm = f;
        return f * f;
    }();

    constexpr double kEps = 1e-12;
    model.error_history.push_back(reconstruction_error(m, m_norm_sq, model.h, model.w));

    for (int iter = 0; iter < max_iter; ++iter) {
        // H <- H .* (M W') ./ (H (W W') + eps)
        const Eigen::MatrixXd mwt = m * model.w.transpose();
        const Eigen::MatrixXd hwwt = model.h * (model.w * model.w.transpose());
        model.h = model.h.cwiseProduct(mwt).cwiseQuotient(
            hwwt + Eigen::MatrixXd::Constant(rows, k, kEps));

        // W <- W .* (H' M) ./ ((H' H) W + eps)
        const Eigen::MatrixXd htm = (m.transpose() * model.h).transpose();
        const Eigen::MatrixXd hthw = (model.h.transpose() * model.h) * model.w;
        model.w = model.w.cwiseProduct(htm).cwiseQuotient(
            hthw + Eigen::MatrixXd::Constant(k, cols, kEps));

        const double err = reconstruction_error(m, m_norm_sq, model.h, model.w);
        const double prev = model.error_history.back();
        model.error_history.push_back(err);
        if (prev > 0.0 && (prev - err) / prev < tol) break;
    }
    return model;
}

std::vector<SweepEntry> sweep_k(const SparseRowMatrix& m, const Vocabulary& vocab, int k_min,
                                int k_max, std::uint64_t seed, double tol, int max_iter,
                                int n_top_terms) {
    if (k_min > k_max)
        throw ConfigError("sweep_k: k_min " + std::to_string(k_min) + " > k_max " +
                          std::to_string(k_max));
    if (k_max > std::min(m.rows(), m.cols()))
        throw ConfigError("sweep_k: k_max " + std::to_string(k_max) +
                          " exceeds min(rows, cols) = " +
                          std::to_string(std::min(m.rows(), m.cols())));

    std::vector<SweepEntry> out;
    for (int k = k_min; k <= k_max; ++k) {
        TopicModel model = nmf(m, k, derive_seed(seed, "sweep-k", static_cast<std::uint64_t>(k)),
                               tol, max_iter);
        SweepEntry entry;
        entry.k = k;
        entry.relative_error = model.relative_error();
        for (int t = 0; t < k; ++t) entry.top_terms.push_back(top_terms(model.w, vocab, t, n_top_terms));
        out.push_back(std::move(entry));
    }
    return out;
}

std::map<std::string, UserTopicProfile> user_topic_profiles(const Corpus& corpus,
                                                            const Eigen::MatrixXd& h,
                                                            double min_membership) {
    if (h.rows() != static_cast<Eigen::Index>(corpus.records.size()))
        throw ContractViolation("user_topic_profiles: H has " + std::to_string(h.rows()) +
                                " rows for " + std::to_string(corpus.records.size()) +
                                " tweets");
    const int k = static_cast<int>(h.cols());

    std::map<std::string, UserTopicProfile> out;
    for (const auto& record : corpus.records)
        out.emplace(record.author_id, UserTopicProfile{std::vector<double>(k, 0.0), 0});

    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        int best = 0;
        for (int t = 1; t < k; ++t)
            if (h(i, t) > h(i, best)) best = t;
        if (h(i, best) <= min_membership) continue;
        UserTopicProfile& profile = out.at(corpus.records[static_cast<std::size_t>(i)].author_id);
        profile.fractions[static_cast<std::size_t>(best)] += 1.0;
        ++profile.tweets_counted;
    }
    for (auto& [user, profile] : out) {
        if (profile.tweets_counted == 0) continue;
        for (double& f : profile.fractions) f /= static_cast<double>(profile.tweets_counted);
    }
    return out;
}

std::vector<std::pair<std::string, double>> top_terms(const Eigen::MatrixXd& w,
                                                      const Vocabulary& vocab, int topic,
                                                      int n) {
    if (topic < 0 || topic >= w.rows())
        throw ContractViolation("top_terms: topic " + std::to_string(topic) + " outside 0.." +
                                std::to_string(w.rows() - 1));
    if (w.cols() != static_cast<Eigen::Index>(vocab.size()))
        throw ContractViolation("top_terms: W has " + std::to_string(w.cols()) +
                                " columns for a vocabulary of " + std::to_string(vocab.size()));
    std::vector<std::pair<std::string, double>> all;
    all.reserve(vocab.size());
    for (std::size_t t = 0; t < vocab.size(); ++t)
        all.emplace_back(vocab.terms[t], w(topic, static_cast<Eigen::Index>(t)));
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (n >= 0 && static_cast<std::size_t>(n) < all.size()) all.resize(static_cast<std::size_t>(n));
    return all;
}

std::set<std::string> read_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open stopword file " + path.string());
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) words.insert(ascii_lower(line));
    }
    return words;
}

void write_stopwords(const std::filesystem::path& path, const std::set<std::string>& words) {
    std::string body;
    for (const auto& w : words) {
        body += w;
        body.push_back('\n');
    }
    write_text_file(path, body);
}

void write_vocabulary_csv(const std::filesystem::path& path, const Vocabulary& vocab,
                          const std::string& provenance) {
    CsvTable table;
    table.header = {"term", "index", "df"};
    for (std::size_t t = 0; t < vocab.size(); ++t)
        table.rows.push_back({vocab.terms[t], std::to_string(t), std::to_string(vocab.df[t])});
    write_csv(path, table, provenance);
}

Vocabulary read_vocabulary_csv(const std::filesystem::path& path, int ngram_min, int ngram_max,
                               std::set<std::string> stopwords, int min_df) {
    CsvTable table = read_csv(path);
    Vocabulary vocab;
    vocab.ngram_min = ngram_min;
    vocab.ngram_max = ngram_max;
    vocab.stopwords = std::move(stopwords);
    vocab.min_df = min_df;
    vocab.terms.resize(table.rows.size());
    vocab.df.resize(table.rows.size());
    for (const auto& row : table.rows) {
        if (row.size() != 3) throw DataError("vocabulary csv: bad row width in " + path.string());
        const auto idx = static_cast<std::size_t>(std::stoul(row[1]));
        if (idx >= table.rows.size())
            throw DataError("vocabulary csv: index out of range in " + path.string());
        vocab.terms[idx] = row[0];
        vocab.df[idx] = std::stoll(row[2]);
        vocab.index.emplace(row[0], static_cast<int>(idx));
    }
    return vocab;
}

namespace {

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::string& provenance) {
    std::string body;
    if (!provenance.empty()) body += "# " + provenance + "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) body.push_back(',');
            body += format_double(m(i, j));
        }
        body.push_back('\n');
    }
    write_text_file(path, body);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, Eigen::Index rows,
                                Eigen::Index cols) {
    std::istringstream in(read_text_file(path));
    Eigen::MatrixXd m(rows, cols);
    std::string line;
    Eigen::Index i = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (i >= rows) throw DataError("matrix csv: too many rows in " + path.string());
        std::istringstream ls(line);
        std::string cell;
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (!std::getline(ls, cell, ','))
                throw DataError("matrix csv: short row in " + path.string());
            m(i, j) = parse_double(cell);
        }
        ++i;
    }
    if (i != rows) throw DataError("matrix csv: expected " + std::to_string(rows) +
                                   " rows in " + path.string());
    return m;
}

}  // namespace

void write_topic_model(const std::filesystem::path& dir, const TopicModel& model,
                       const std::string& provenance) {
    std::filesystem::create_directories(dir);
    nlohmann::json header;
    header["k"] = model.k;
    header["seed"] = model.seed;
    header["tol"] = model.tol;
    header["m_norm"] = model.m_norm;
    header["rows"] = model.h.rows();
    header["terms"] = model.w.cols();
    header["error_history"] = model.error_history;
    if (!provenance.empty()) header["provenance"] = provenance;
    write_text_file(dir / "header.json", header.dump(2) + "\n");
    write_matrix_csv(dir / "h.csv", model.h, provenance);
    write_matrix_csv(dir / "w.csv", model.w, provenance);
}

TopicModel read_topic_model(const std::filesystem::path& dir) {
    const nlohmann::json header = nlohmann::json::parse(read_text_file(dir / "header.json"));
    TopicModel model;
    model.k = header.at("k").get<int>();
    model.seed = header.at("seed").get<std::uint64_t>();
    model.tol = header.at("tol").get<double>();
    model.m_norm = header.at("m_norm").get<double>();
    model.error_history = header.at("error_history").get<std::vector<double>>();
    const auto rows = header.at("rows").get<Eigen::Index>();
    const auto terms = header.at("terms").get<Eigen::Index>();
    model.h = read_matrix_csv(dir / "h.csv", rows, model.k);
    model.w = read_matrix_csv(dir / "w.csv", model.k, terms);
    return model;
}

void write_profiles_csv(const std::filesystem::path& path,
                        const std::map<std::string, UserTopicProfile>& profiles, int k,
                        const std::string& provenance) {
    CsvTable table;
    table.header = {"user", "tweets_counted"};
    for (int t = 0; t < k; ++t) table.header.push_back("topic_" + std::to_string(t));
    for (const auto& [user, profile] : profiles) {
        std::vector<std::string> row{user, std::to_string(profile.tweets_counted)};
        for (double f : profile.fractions) row.push_back(format_double(f));
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table, provenance);
}

std::map<std::string, UserTopicProfile> read_profiles_csv(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    std::map<std::string, UserTopicProfile> out;
    for (const auto& row : table.rows) {
        if (row.size() < 2) throw DataError("profiles csv: bad row width in " + path.string());
        UserTopicProfile profile;
        profile.tweets_counted = std::stoll(row[1]);
        for (std::size_t j = 2; j < row.size(); ++j) profile.fractions.push_back(parse_double(row[j]));
        out.emplace(row[0], std::move(profile));
    }
    return out;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepEntry>& entries,
                     const std::string& provenance) {
    CsvTable table;
    table.header = {"k", "relative_error", "top_terms"};
    for (const auto& entry : entries) {
        std::string terms;
        for (std::size_t t = 0; t < entry.top_terms.size(); ++t) {
            if (t > 0) terms += " | ";
            terms += "topic " + std::to_string(t) + ":";
            for (const auto& [term, weight] : entry.top_terms[t]) terms += " " + term;
        }
        table.rows.push_back({std::to_string(entry.k), format_double(entry.relative_error), terms});
    }
    write_csv(path, table, provenance);
}

}  // namespace shiftscope
