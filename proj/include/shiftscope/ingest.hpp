#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace shiftscope {

struct TweetRecord {
    std::string tweet_id;
    std::string author_id;
    std::string author_handle;
    std::int64_t timestamp = 0;  // UTC seconds
    std::string text;
    std::optional<std::string> retweet_of_author_id;
    std::optional<std::string> lang;

    bool is_retweet() const { return retweet_of_author_id.has_value(); }
    bool operator==(const TweetRecord&) const = default;
};

enum class PeriodLabel { Period1, Period2 };

struct PeriodWindow {
    PeriodLabel label = PeriodLabel::Period1;
    std::int64_t start = 0;  // inclusive
    std::int64_t end = 0;    // exclusive

    bool contains(std::int64_t t) const { return t >= start && t < end; }
};

// Validates start < end per window and Period1.end <= Period2.start.
void validate_windows(const PeriodWindow& w1, const PeriodWindow& w2);

struct Corpus {
    PeriodWindow period;
    std::vector<TweetRecord> records;
    std::map<std::string, std::vector<std::size_t>> by_author;  // author_id -> record rows
};

struct ParseStats {
    std::size_t lines = 0;
    std::size_t parsed = 0;
    std::size_t malformed = 0;
};

struct ParseResult {
    std::vector<TweetRecord> records;
    ParseStats stats;
};

// One JSON object per line; invalid lines are counted, not fatal. Throws
// DataError when more than half of a non-empty stream is malformed (wrong
// file) and on unreadable input.
ParseResult parse_records(std::istream& in);

// File variant; gzip input is detected by magic bytes and inflated.
ParseResult parse_records_file(const std::filesystem::path& path);

std::string serialize_record(const TweetRecord& r);  // one JSONL line, no newline
void write_records_file(const std::filesystem::path& path, const std::vector<TweetRecord>& records);

struct SplitStats {
    std::size_t kept1 = 0;
    std::size_t kept2 = 0;
    std::size_t dropped = 0;
};

std::pair<Corpus, Corpus> split_periods(const std::vector<TweetRecord>& records,
                                        const PeriodWindow& w1, const PeriodWindow& w2,
                                        SplitStats* stats = nullptr);

// Keeps only records whose lang matches; records without lang are dropped too.
std::vector<TweetRecord> filter_lang(const std::vector<TweetRecord>& records,
                                     const std::string& lang, std::size_t* dropped = nullptr);

struct CorpusSummary {
    std::size_t n_tweets = 0;
    std::size_t n_users = 0;
    std::size_t n_retweets = 0;
    PeriodWindow window;
};

CorpusSummary corpus_summary(const Corpus& c);

}  // namespace shiftscope
