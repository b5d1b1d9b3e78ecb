#include <sstream>
#include <zlib.h>

#include "doctest.h"
#include "helpers.hpp"
#include "shiftscope/csvio.hpp"
#include "shiftscope/errors.hpp"
#include "shiftscope/ingest.hpp"

using namespace shiftscope;
using namespace shiftscope::testing;

TEST_CASE("parse_records accepts a minimal valid record") {
    std::istringstream in(R"({"tweet_id":"1","author_id":"u1","timestamp":100,"text":"hola"})");
    const ParseResult result = parse_records(in);
    REQUIRE(result.records.size() == 1);
    const TweetRecord& r = result.records[0];
    CHECK(r.tweet_id == "1");
    CHECK(r.author_id == "u1");
    CHECK(r.timestamp == 100);
    CHECK(r.text == "hola");
    CHECK_FALSE(r.is_retweet());
    CHECK(result.stats.parsed == 1);
    CHECK(result.stats.malformed == 0);
}

TEST_CASE("parse_records skips a line missing the text field") {
    std::istringstream in(
        R"({"tweet_id":"1","author_id":"u1","timestamp":100,"text":"a"})"
        "\n"
        R"({"tweet_id":"2","author_id":"u2","timestamp":101})"
        "\n"
        R"({"tweet_id":"3","author_id":"u3","timestamp":102,"text":"b"})");
    const ParseResult result = parse_records(in);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].tweet_id == "1");
    CHECK(result.records[1].tweet_id == "3");
    CHECK(result.stats.malformed == 1);
}

TEST_CASE("parse_records rejects input where most lines are malformed") {
    std::istringstream in("not json at all");
    CHECK_THROWS_AS(parse_records(in), DataError);
}

TEST_CASE("parse_records keeps 3 of 4 lines in the mixed fixture") {
    std::istringstream in(
        R"({"tweet_id":"1","author_id":"u1","timestamp":100,"text":"a"})"
        "\n"
        R"({"tweet_id":"2","author_id":"u2","timestamp":110,"text":"b","retweet_of_author_id":"u1"})"
        "\n"
        "this is not json\n"
        R"({"tweet_id":"3","author_id":"u1","timestamp":120,"text":"c","lang":"es"})"
        "\n");
    const ParseResult result = parse_records(in);
    REQUIRE(result.records.size() == 3);
    CHECK(result.stats.lines == 4);
    CHECK(result.stats.parsed == 3);
    CHECK(result.stats.malformed == 1);
    CHECK(result.stats.parsed + result.stats.malformed == result.stats.lines);
    CHECK(result.records[1].retweet_of_author_id == "u1");
    CHECK(result.records[2].lang == "es");
}

TEST_CASE("parse_records rejects a stream that is mostly malformed") {
    std::istringstream in(
        "garbage one\n"
        "garbage two\n"
        R"({"tweet_id":"1","author_id":"u1","timestamp":100,"text":"a"})"
        "\n");
    CHECK_THROWS_AS(parse_records(in), DataError);
}

TEST_CASE("parse_records tolerates exactly half malformed") {
    std::istringstream in(
        R"({"tweet_id":"1","author_id":"u1","timestamp":100,"text":"a"})"
        "\n"
        "garbage\n");
    const ParseResult result = parse_records(in);
    CHECK(result.stats.parsed == 1);
    CHECK(result.stats.malformed == 1);
}

TEST_CASE("parse_records on an empty stream yields nothing") {
    std::istringstream in("");
    const ParseResult result = parse_records(in);
    CHECK(result.records.empty());
    CHECK(result.stats.lines == 0);
}

TEST_CASE("serialization round-trips records including unicode and optionals") {
    const std::vector<TweetRecord> originals = {
        record("1", "u1", 100, "hola señor ❤ \"quoted\""),
        record("2", "u2", 110, "rt body", "u1", "es"),
        record("3", "u3", 120, "", "u3"),
    };
    std::string lines;
    for (const auto& r : originals) lines += serialize_record(r) + "\n";
    std::istringstream in(lines);
    const ParseResult result = parse_records(in);
    REQUIRE(result.records.size() == originals.size());
    for (std::size_t i = 0; i < originals.size(); ++i) CHECK(result.records[i] == originals[i]);
}

TEST_CASE("parse_records_file reads plain and gzip-compressed input alike") {
    TempDir dir;
    const std::vector<TweetRecord> originals = {
        record("1", "u1", 100, "uno"),
        record("2", "u2", 110, "dos", "u1"),
    };
    const auto plain = dir / "records.jsonl";
    write_records_file(plain, originals);
    const ParseResult from_plain = parse_records_file(plain);
    CHECK(from_plain.records == originals);

    std::string payload;
    for (const auto& r : originals) payload += serialize_record(r) + "\n";
    const auto gz = dir / "records.jsonl.gz";
    gzFile file = gzopen(gz.string().c_str(), "wb");
    REQUIRE(file != nullptr);
    REQUIRE(gzwrite(file, payload.data(), static_cast<unsigned>(payload.size())) > 0);
    gzclose(file);
    const ParseResult from_gz = parse_records_file(gz);
    CHECK(from_gz.records == originals);
}

TEST_CASE("parse_records_file on a missing path reports an I/O problem") {
    CHECK_THROWS_AS(parse_records_file("/nonexistent/path/records.jsonl"), DataError);
}

TEST_CASE("validate_windows enforces ordering") {
    PeriodWindow w1{PeriodLabel::Period1, 100, 200};
    PeriodWindow w2{PeriodLabel::Period2, 300, 400};
    CHECK_NOTHROW(validate_windows(w1, w2));

    PeriodWindow touching{PeriodLabel::Period2, 200, 400};
    CHECK_NOTHROW(validate_windows(w1, touching));

    PeriodWindow degenerate{PeriodLabel::Period1, 200, 200};
    CHECK_THROWS_AS(validate_windows(degenerate, w2), ConfigError);

    PeriodWindow overlapping{PeriodLabel::Period2, 150, 400};
    CHECK_THROWS_AS(validate_windows(w1, overlapping), ConfigError);
}

TEST_CASE("split_periods routes t=150 to period 1 and drops t=250") {
    PeriodWindow w1{PeriodLabel::Period1, 100, 200};
    PeriodWindow w2{PeriodLabel::Period2, 300, 400};
    const std::vector<TweetRecord> records = {
        record("1", "u1", 150, "in period one"),
        record("2", "u1", 250, "between windows"),
        record("3", "u2", 300, "at period-two start"),
        record("4", "u2", 400, "at period-two end"),
    };
    SplitStats stats;
    const auto [c1, c2] = split_periods(records, w1, w2, &stats);
    REQUIRE(c1.records.size() == 1);
    CHECK(c1.records[0].tweet_id == "1");
    REQUIRE(c2.records.size() == 1);
    CHECK(c2.records[0].tweet_id == "3");
    CHECK(stats.kept1 == 1);
    CHECK(stats.kept2 == 1);
    CHECK(stats.dropped == 2);
}

TEST_CASE("split_periods conserves every record") {
    PeriodWindow w1{PeriodLabel::Period1, 100, 200};
    PeriodWindow w2{PeriodLabel::Period2, 300, 400};
    Rng rng(11);
    std::vector<TweetRecord> records;
    for (int i = 0; i < 10; ++i)
        records.push_back(
            record(std::to_string(i), "u" + std::to_string(i % 3),
                   static_cast<std::int64_t>(rng.uniform_int(0, 500)), "text"));
    SplitStats stats;
    const auto [c1, c2] = split_periods(records, w1, w2, &stats);
    CHECK(stats.kept1 + stats.kept2 + stats.dropped == records.size());
    CHECK(c1.records.size() == stats.kept1);
    CHECK(c2.records.size() == stats.kept2);
    for (const auto& r : c1.records) CHECK(w1.contains(r.timestamp));
    for (const auto& r : c2.records) CHECK(w2.contains(r.timestamp));
}

TEST_CASE("split_periods rejects overlapping windows") {
    PeriodWindow w1{PeriodLabel::Period1, 100, 300};
    PeriodWindow w2{PeriodLabel::Period2, 200, 400};
    CHECK_THROWS_AS(split_periods({}, w1, w2), ConfigError);
}

TEST_CASE("corpus per-user index is consistent with records") {
    const Corpus corpus = make_corpus({
        record("1", "u1", 100, "a"),
        record("2", "u2", 110, "b"),
        record("3", "u1", 120, "c"),
    });
    REQUIRE(corpus.by_author.count("u1") == 1);
    CHECK(corpus.by_author.at("u1") == std::vector<std::size_t>{0, 2});
    CHECK(corpus.by_author.at("u2") == std::vector<std::size_t>{1});
}

TEST_CASE("corpus_summary counts the 5-tweet 2-user 3-retweet fixture") {
    const Corpus corpus = make_corpus({
        record("1", "u1", 100, "a"),
        record("2", "u1", 110, "b", "u2"),
        record("3", "u2", 120, "c", "u1"),
        record("4", "u1", 130, "d", "u2"),
        record("5", "u2", 140, "e"),
    });
    const CorpusSummary summary = corpus_summary(corpus);
    CHECK(summary.n_tweets == 5);
    CHECK(summary.n_users == 2);
    CHECK(summary.n_retweets == 3);
}

TEST_CASE("corpus_summary of an empty corpus is all zeros") {
    const CorpusSummary summary = corpus_summary(make_corpus({}));
    CHECK(summary.n_tweets == 0);
    CHECK(summary.n_users == 0);
    CHECK(summary.n_retweets == 0);
}

TEST_CASE("filter_lang keeps matches and drops missing-language records") {
    const std::vector<TweetRecord> records = {
        record("1", "u1", 100, "a", std::nullopt, "es"),
        record("2", "u1", 110, "b", std::nullopt, "en"),
        record("3", "u2", 120, "c"),
        record("4", "u2", 130, "d", std::nullopt, "es"),
    };
    std::size_t dropped = 0;
    const auto kept = filter_lang(records, "es", &dropped);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].tweet_id == "1");
    CHECK(kept[1].tweet_id == "4");
    CHECK(dropped == 2);
}

TEST_CASE("format_double and parse_double round-trip every double, including subnormals") {
    for (double v : {0.0, 1.0, -2.5, 1e300, 5e-324, 3.5e-310, -7.2e-315, 0.1}) {
        CAPTURE(v);
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK_THROWS_AS(parse_double(""), DataError);
    CHECK_THROWS_AS(parse_double("1.5x"), DataError);
    CHECK_THROWS_AS(parse_double("pelota"), DataError);
}
