#include "shiftscope/ingest.hpp"

#include <zlib.h>

#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"

namespace shiftscope {

using nlohmann::json;

void validate_windows(const PeriodWindow& w1, const PeriodWindow& w2) {
    if (w1.start >= w1.end || w2.start >= w2.end)
        throw ConfigError("period window must satisfy start < end");
    if (w1.end > w2.start)
        throw ConfigError("period windows overlap: period1 ends at " +
                          std::to_string(w1.end) + " but period2 starts at " +
                          std::to_string(w2.start));
}

namespace {

// Returns false (malformed) instead of throwing for per-line problems.
bool parse_one(const std::string& line, TweetRecord& out) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return false;

    auto str_field = [&](const char* key, std::string& dst, bool required) {
        auto it = j.find(key);
        if (it == j.end()) return !required;
        if (!it->is_string()) return false;
        dst = it->get<std::string>();
        return true;
    };

    if (!str_field("tweet_id", out.tweet_id, true) || out.tweet_id.empty()) return false;
    if (!str_field("author_id", out.author_id, true) || out.author_id.empty()) return false;
    if (!str_field("author_handle", out.author_handle, false)) return false;

    auto ts = j.find("timestamp");
    if (ts == j.end() || !ts->is_number_integer()) return false;
    out.timestamp = ts->get<std::int64_t>();
    if (out.timestamp <= 0) return false;

    auto text = j.find("text");
    if (text == j.end() || !text->is_string()) return false;
    out.text = text->get<std::string>();

    auto rt = j.find("retweet_of_author_id");
    if (rt != j.end() && !rt->is_null()) {
        if (!rt->is_string() || rt->get<std::string>().empty()) return false;
        out.retweet_of_author_id = rt->get<std::string>();
    }

    auto lang = j.find("lang");
    if (lang != j.end() && !lang->is_null()) {
        if (!lang->is_string() || lang->get<std::string>().size() != 2) return false;
        out.lang = lang->get<std::string>();
    }
    return true;
}

}  // namespace

ParseResult parse_records(std::istream& in) {
    if (!in) throw DataError("unreadable record stream");
    ParseResult result;
    std::set<std::string> seen_ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++result.stats.lines;
        TweetRecord rec;
        if (parse_one(line, rec) && seen_ids.insert(rec.tweet_id).second) {
            result.records.push_back(std::move(rec));
            ++result.stats.parsed;
        } else {
            ++result.stats.malformed;
        }
    }
    if (in.bad()) throw DataError("I/O error while reading record stream");
    if (result.stats.lines > 0 && result.stats.malformed * 2 > result.stats.lines)
        throw DataError("more than 50% of lines are malformed (" +
                        std::to_string(result.stats.malformed) + "/" +
                        std::to_string(result.stats.lines) +
                        "); this does not look like a record file");
    return result;
}

namespace {

bool is_gzip(const std::string& bytes) {
    return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
           static_cast<unsigned char>(bytes[1]) == 0x8b;
}

std::string gunzip(const std::string& compressed) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw DataError("zlib init failed");
    std::string out;
    out.resize(std::max<std::size_t>(compressed.size() * 4, 1 << 16));
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());
    std::size_t written = 0;
    int ret = Z_OK;
    do {
        if (written == out.size()) out.resize(out.size() * 2);
        zs.next_out = reinterpret_cast<Bytef*>(out.data() + written);
        zs.avail_out = static_cast<uInt>(out.size() - written);
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw DataError("gzip decompression failed");
        }
        written = out.size() - zs.avail_out;
    } while (ret != Z_STREAM_END);
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

}  // namespace

ParseResult parse_records_file(const std::filesystem::path& path) {
    std::string bytes = read_text_file(path);
    if (is_gzip(bytes)) bytes = gunzip(bytes);
    std::istringstream in(bytes);
    return parse_records(in);
}

std::string serialize_record(const TweetRecord& r) {
    json j;
    j["tweet_id"] = r.tweet_id;
    j["author_id"] = r.author_id;
    if (!r.author_handle.empty()) j["author_handle"] = r.author_handle;
    j["timestamp"] = r.timestamp;
    j["text"] = r.text;
    if (r.retweet_of_author_id) j["retweet_of_author_id"] = *r.retweet_of_author_id;
    if (r.lang) j["lang"] = *r.lang;
    return j.dump();
}

void write_records_file(const std::filesystem::path& path,
                        const std::vector<TweetRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) out << serialize_record(r) << '\n';
    write_text_file(path, out.str());
}

namespace {

Corpus make_corpus(const PeriodWindow& w) {
    Corpus c;
    c.period = w;
    return c;
}

void corpus_push(Corpus& c, const TweetRecord& r) {
    c.by_author[r.author_id].push_back(c.records.size());
    c.records.push_back(r);
}

}  // namespace

std::pair<Corpus, Corpus> split_periods(const std::vector<TweetRecord>& records,
                                        const PeriodWindow& w1, const PeriodWindow& w2,
                                        SplitStats* stats) {
    validate_windows(w1, w2);
    auto c1 = make_corpus(w1);
    auto c2 = make_corpus(w2);
    SplitStats s;
    for (const auto& r : records) {
        if (w1.contains(r.timestamp)) {
            corpus_push(c1, r);
            ++s.kept1;
        } else if (w2.contains(r.timestamp)) {
            corpus_push(c2, r);
            ++s.kept2;
        } else {
            ++s.dropped;
        }
    }
    if (stats) *stats = s;
    return {std::move(c1), std::move(c2)};
}

std::vector<TweetRecord> filter_lang(const std::vector<TweetRecord>& records,
                                     const std::string& lang, std::size_t* dropped) {
    std::vector<TweetRecord> kept;
    kept.reserve(records.size());
    for (const auto& r : records) {
        if (r.lang && *r.lang == lang) kept.push_back(r);
    }
    if (dropped) *dropped = records.size() - kept.size();
    return kept;
}

CorpusSummary corpus_summary(const Corpus& c) {
    CorpusSummary s;
    s.window = c.period;
    s.n_tweets = c.records.size();
    s.n_users = c.by_author.size();
    for (const auto& r : c.records) {
        if (r.is_retweet()) ++s.n_retweets;
    }
    return s;
}

}  // namespace shiftscope
