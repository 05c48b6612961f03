#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "mbti/corpus.hpp"

using namespace mbti;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mbti-corpus-tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::vector<LabeledRecord> synthetic_records(std::size_t n) {
  std::vector<LabeledRecord> recs;
  recs.reserve(n);
  const auto types = all_types();
  for (std::size_t i = 0; i < n; ++i) {
    LabeledRecord rec;
    rec.label = types[i % types.size()];
    rec.docs.documents = {"doc " + std::to_string(i)};
    rec.source_id = "rec-" + std::to_string(i);
    recs.push_back(std::move(rec));
  }
  return recs;
}

}  // namespace

TEST_CASE("parse_corpus_row splits on the ||| delimiter") {
  const auto rec = parse_corpus_row("INTJ", "a|||b|||c");
  CHECK(rec.label.code() == "INTJ");
  CHECK(rec.docs.documents == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("parse_corpus_row drops empty fragments") {
  const auto rec = parse_corpus_row("ENTP", "x||| |||y");
  CHECK(rec.docs.documents == std::vector<std::string>{"x", "y"});
}

TEST_CASE("parse_corpus_row rejects all-empty rows and bad labels") {
  CHECK_THROWS_AS(parse_corpus_row("INTJ", "||||||"), EmptyRecord);
  CHECK_THROWS_AS(parse_corpus_row("QQQQ", "a|||b"), InvalidLabel);
}

TEST_CASE("parse_corpus_row caps a row at 50 documents") {
  std::string field = "d0";
  for (int i = 1; i < 60; ++i) field += "|||d" + std::to_string(i);
  const auto rec = parse_corpus_row("INFP", field);
  CHECK(rec.docs.documents.size() == 50);
  CHECK(rec.docs.documents.front() == "d0");
  CHECK(rec.docs.documents.back() == "d49");
}

TEST_CASE("load_corpus reads the Kaggle-style CSV with quoted text fields") {
  const auto path = temp_file("fixture.csv");
  write_file(path,
             "type,posts\n"
             "ENTP,\"I am finding the lack of me in these posts very alarming|||This + Lack of "
             "Balance, and Hand-Eye Coordination.\"\n"
             "INTJ,\"2% still means about 1/50 people.|||I collect \"\"shoes\"\".\"\n");
  const auto records = load_corpus(path.string());
  REQUIRE(records.size() == 2);
  CHECK(records[0].label.code() == "ENTP");
  CHECK(records[1].label.code() == "INTJ");
  CHECK(records[0].docs.documents.size() == 2);
  CHECK(records[1].docs.documents[1] == "I collect \"shoes\".");
}

TEST_CASE("load_corpus reports malformed rows with line numbers") {
  const auto path = temp_file("bad.csv");
  write_file(path, "type,posts\nINTJ,\"ok|||fine\"\nWXYZ,\"oops\"\n");
  try {
    load_corpus(path.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 3);
  }
}

TEST_CASE("load_corpus on a missing file raises IoError") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.csv"), IoError);
}

TEST_CASE("split_corpus produces exact 81:9:10 sizes for N=100") {
  const auto split = split_corpus(synthetic_records(100), 7);
  CHECK(split.train.size() == 81);
  CHECK(split.eval.size() == 9);
  CHECK(split.test.size() == 10);
}

TEST_CASE("split_corpus floor rule at N=8675") {
  const auto split = split_corpus(synthetic_records(8675), 42);
  CHECK(split.train.size() == 7026);
  CHECK(split.eval.size() == 780);
  CHECK(split.test.size() == 869);
}

TEST_CASE("split_corpus rejects fewer than 10 records") {
  CHECK_THROWS_AS(split_corpus(synthetic_records(9), 1), TooFewRecords);
}

TEST_CASE("split_corpus is a deterministic partition") {
  const auto records = synthetic_records(137);
  const auto a = split_corpus(records, 99);
  const auto b = split_corpus(records, 99);

  auto ids = [](const CorpusSplit& s) {
    std::vector<std::string> out;
    for (const auto& r : s.train) out.push_back(r.source_id);
    for (const auto& r : s.eval) out.push_back(r.source_id);
    for (const auto& r : s.test) out.push_back(r.source_id);
    return out;
  };
  CHECK(ids(a) == ids(b));

  auto all = ids(a);
  CHECK(all.size() == records.size());
  std::set<std::string> unique(all.begin(), all.end());
  CHECK(unique.size() == records.size());
}

TEST_CASE("split_corpus is invariant to input order") {
  auto records = synthetic_records(64);
  const auto a = split_corpus(records, 5);
  std::mt19937 rng(123);
  std::shuffle(records.begin(), records.end(), rng);
  const auto b = split_corpus(records, 5);

  auto train_ids = [](const CorpusSplit& s) {
    std::vector<std::string> out;
    for (const auto& r : s.train) out.push_back(r.source_id);
    return out;
  };
  CHECK(train_ids(a) == train_ids(b));
}

TEST_CASE("text pool round-trips through the line-delimited format") {
  const auto path = temp_file("pool.jsonl");
  std::vector<GeneratedText> pool{
      {"g1", "post", "abc123", "mock", "hello world", "2026-01-01T00:00:00Z"},
      {"g2", "comment", "def456", "mock", "reply text", "2026-01-01T00:00:01Z"},
      {"g3", "post", "abc123", "mock", "another \"quoted\" one", "2026-01-01T00:00:02Z"},
  };
  save_text_pool(path.string(), pool);
  const auto loaded = load_text_pool(path.string());
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].id == "g1");
  CHECK(loaded[1].role == "comment");
  CHECK(loaded[2].text == "another \"quoted\" one");
}

TEST_CASE("load_text_pool flags a line missing the text field") {
  const auto path = temp_file("pool_bad.jsonl");
  std::ofstream out(path);
  out << R"({"id":"a","role":"post","source":"s","model":"m","text":"t","created_at":"c"})" << '\n';
  out << R"({"id":"b","role":"post","source":"s","model":"m","created_at":"c"})" << '\n';
  out.close();
  try {
    load_text_pool(path.string());
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line_number == 2);
  }
}

TEST_CASE("load_text_pool accepts an empty file") {
  const auto path = temp_file("pool_empty.jsonl");
  write_file(path, "");
  CHECK(load_text_pool(path.string()).empty());
}
