#pragma once
// Corpus ingestion: the Kaggle MBTI CSV (label + "|||"-separated posts),
// deterministic 81:9:10 splitting, and line-delimited generated-text pools.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbti/types.hpp"

namespace mbti {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct SchemaError : std::runtime_error {
  SchemaError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct EmptyRecord : std::runtime_error {
  explicit EmptyRecord(const std::string& what) : std::runtime_error(what) {}
};

struct TooFewRecords : std::runtime_error {
  explicit TooFewRecords(const std::string& what) : std::runtime_error(what) {}
};

// Up to 50 nonempty texts from one author.
struct DocumentSet {
  std::vector<std::string> documents;
};

inline constexpr std::size_t kMaxDocumentsPerSet = 50;

struct LabeledRecord {
  MbtiType label;
  DocumentSet docs;
  std::string source_id;
};

struct CorpusSplit {
  std::vector<LabeledRecord> train;
  std::vector<LabeledRecord> eval;
  std::vector<LabeledRecord> test;
  uint64_t seed = 0;
};

// Generated-text pool entry; also the output schema of the generation
// pipeline.
struct GeneratedText {
  std::string id;
  std::string role;  // "post" | "comment"
  std::string source;
  std::string model;
  std::string text;
  std::string created_at;  // RFC3339
};

// Splits text_field on the literal "|||", trims fragments, drops empty
// ones, and parses the label. Throws InvalidLabel or EmptyRecord.
LabeledRecord parse_corpus_row(const std::string& label_field, const std::string& text_field,
                               std::string source_id = {});

// Loads the two-column CSV (header: type,posts). Malformed rows raise
// ParseError carrying the 1-based line number.
std::vector<LabeledRecord> load_corpus(const std::string& path);

// Deterministic shuffle keyed on a stable sort of source_id, then
// floor(0.81 N) / floor(0.09 N) / remainder.
CorpusSplit split_corpus(std::vector<LabeledRecord> records, uint64_t seed);

std::vector<GeneratedText> load_text_pool(const std::string& path);
void save_text_pool(const std::string& path, const std::vector<GeneratedText>& pool);

// Minimal RFC4180-style reader used by load_corpus; exposed for tests.
// Returns one vector of fields per logical record (quoted fields may span
// physical lines).
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace mbti
