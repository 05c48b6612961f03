#include "mbti/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mbti/hash.hpp"

namespace mbti {

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

LabeledRecord parse_corpus_row(const std::string& label_field, const std::string& text_field,
                               std::string source_id) {
  LabeledRecord rec;
  rec.label = parse_type_label(label_field);
  rec.source_id = std::move(source_id);

  static const std::string kSep = "|||";
  std::size_t pos = 0;
  while (pos <= text_field.size()) {
    const std::size_t next = text_field.find(kSep, pos);
    const std::size_t end = (next == std::string::npos) ? text_field.size() : next;
    std::string frag = trim_copy(text_field.substr(pos, end - pos));
    if (!frag.empty() && rec.docs.documents.size() < kMaxDocumentsPerSet) {
      rec.docs.documents.push_back(std::move(frag));
    }
    if (next == std::string::npos) break;
    pos = next + kSep.size();
  }
  if (rec.docs.documents.empty()) {
    throw EmptyRecord("no nonempty document fragments in row '" + rec.source_id + "'");
  }
  return rec;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
      }
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  if (!any) return rows;
  return rows;
}

std::vector<LabeledRecord> load_corpus(const std::string& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw ParseError(1, "empty corpus file " + path);

  std::size_t start = 0;
  if (!rows[0].empty() && trim_copy(rows[0][0]) == "type") start = 1;  // header row

  std::vector<LabeledRecord> out;
  out.reserve(rows.size() - start);
  for (std::size_t i = start; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::size_t line = i + 1;
    if (row.size() != 2) {
      throw ParseError(line, "expected 2 fields, got " + std::to_string(row.size()));
    }
    try {
      out.push_back(parse_corpus_row(row[0], row[1], "row-" + std::to_string(line)));
    } catch (const std::runtime_error& e) {
      throw ParseError(line, e.what());
    }
  }
  return out;
}

CorpusSplit split_corpus(std::vector<LabeledRecord> records, uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 10) throw TooFewRecords("need at least 10 records, got " + std::to_string(n));

  // Stable ordering before the permutation so the split depends only on
  // the multiset of source_ids, not on file order.
  std::stable_sort(records.begin(), records.end(),
                   [](const LabeledRecord& a, const LabeledRecord& b) {
                     return a.source_id < b.source_id;
                   });

  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(bounded_draw(rng, i + 1));
    std::swap(records[i], records[j]);
  }

  const std::size_t n_train = static_cast<std::size_t>(0.81 * static_cast<double>(n));
  const std::size_t n_eval = static_cast<std::size_t>(0.09 * static_cast<double>(n));

  CorpusSplit split;
  split.seed = seed;
  split.train.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.eval.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train),
                    records.begin() + static_cast<std::ptrdiff_t>(n_train + n_eval));
  split.test.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train + n_eval), records.end());
  return split;
}

std::vector<GeneratedText> load_text_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::vector<GeneratedText> pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_copy(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw SchemaError(line_no, "not a JSON object");
    GeneratedText g;
    try {
      g.id = j.at("id").get<std::string>();
      g.role = j.at("role").get<std::string>();
      g.source = j.at("source").get<std::string>();
      g.model = j.at("model").get<std::string>();
      g.text = j.at("text").get<std::string>();
      g.created_at = j.at("created_at").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(line_no, e.what());
    }
    if (g.role != "post" && g.role != "comment") {
      throw SchemaError(line_no, "role must be 'post' or 'comment', got '" + g.role + "'");
    }
    pool.push_back(std::move(g));
  }
  return pool;
}

void save_text_pool(const std::string& path, const std::vector<GeneratedText>& pool) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& g : pool) {
    nlohmann::json j{{"id", g.id},       {"role", g.role}, {"source", g.source},
                     {"model", g.model}, {"text", g.text}, {"created_at", g.created_at}};
    out << j.dump() << '\n';
  }
}

}  // namespace mbti
