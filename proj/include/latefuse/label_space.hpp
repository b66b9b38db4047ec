#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latefuse/hash.hpp"

namespace latefuse {

// Multi-hot target row: one byte per class, 0 or 1.
using MultiHotVector = std::vector<std::uint8_t>;

inline std::size_t popcount(const MultiHotVector& bits) {
  std::size_t n = 0;
  for (auto b : bits) n += b != 0;
  return n;
}

inline std::string trim_copy(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

struct ProductRecord {
  std::string id;
  std::string title;
  std::string description;
  // Sorted, de-duplicated, surrounding whitespace trimmed. Label strings are
  // otherwise compared byte-exact; no case folding ("Men"/"Women" are proper
  // category names).
  std::vector<std::string> labels;
  std::map<std::string, std::vector<double>> external_scores;
};

inline void normalize_labels(std::vector<std::string>& labels) {
  for (auto& l : labels) l = trim_copy(l);
  labels.erase(std::remove_if(labels.begin(), labels.end(),
                              [](const std::string& l) { return l.empty(); }),
               labels.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
}

// The filtered, ordered label set. Index order is lexicographic and
// therefore identical across runs and machines.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  LabelVocabulary(std::vector<std::string> labels, std::vector<std::size_t> counts,
                  std::size_t min_count)
      : labels_(std::move(labels)), counts_(std::move(counts)), min_count_(min_count) {
    if (labels_.size() != counts_.size())
      throw std::runtime_error("label vocabulary: label/count size mismatch");
    if (!std::is_sorted(labels_.begin(), labels_.end()))
      throw std::runtime_error("label vocabulary: labels must be lexicographically sorted");
    if (std::adjacent_find(labels_.begin(), labels_.end()) != labels_.end())
      throw std::runtime_error("label vocabulary: duplicate label");
    for (std::size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]] = i;
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t min_count() const { return min_count_; }

  std::optional<std::size_t> index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const std::string& label) const { return index_.count(label) != 0; }

  std::uint64_t hash() const { return ordered_labels_hash(labels_); }

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> counts_;
  std::size_t min_count_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

// Keeps every label assigned to at least min_count products. Counting runs
// over the full corpus, before any train/test split.
inline LabelVocabulary build_vocabulary(const std::vector<ProductRecord>& records,
                                        std::size_t min_count) {
  std::map<std::string, std::size_t> tally;  // ordered map: lexicographic for free
  for (const auto& r : records) {
    std::vector<std::string> labels = r.labels;
    normalize_labels(labels);
    for (const auto& l : labels) ++tally[l];
  }
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;
  for (const auto& [label, count] : tally) {
    if (count >= min_count) {
      labels.push_back(label);
      counts.push_back(count);
    }
  }
  if (labels.empty())
    throw std::runtime_error("empty vocabulary: no label reaches min_count=" +
                             std::to_string(min_count));
  return LabelVocabulary(std::move(labels), std::move(counts), min_count);
}

// Intersects each record's labels with the vocabulary and drops records left
// with no label at all. Input order is preserved.
inline std::vector<ProductRecord> filter_records(const std::vector<ProductRecord>& records,
                                                 const LabelVocabulary& vocab) {
  if (vocab.size() == 0) throw std::runtime_error("filter_records: empty vocabulary");
  std::vector<ProductRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    ProductRecord kept = r;
    normalize_labels(kept.labels);
    kept.labels.erase(std::remove_if(kept.labels.begin(), kept.labels.end(),
                                     [&](const std::string& l) { return !vocab.contains(l); }),
                      kept.labels.end());
    if (!kept.labels.empty()) out.push_back(std::move(kept));
  }
  return out;
}

// Strict mode refuses an empty encoding; non-strict callers get an all-zero
// row. Unknown labels are an error either way.
inline MultiHotVector encode_labels(const std::vector<std::string>& labels,
                                    const LabelVocabulary& vocab, bool strict = true) {
  MultiHotVector bits(vocab.size(), 0);
  for (const auto& raw : labels) {
    const std::string label = trim_copy(raw);
    auto idx = vocab.index_of(label);
    if (!idx) throw std::runtime_error("encode_labels: unknown label '" + label + "'");
    bits[*idx] = 1;
  }
  if (strict && popcount(bits) == 0)
    throw std::runtime_error("encode_labels: empty label set in strict mode");
  return bits;
}

// The corpus is pre-sampled, so the split is a plain prefix cut: no shuffle.
inline std::pair<std::vector<ProductRecord>, std::vector<ProductRecord>> split_train_test(
    const std::vector<ProductRecord>& records, std::size_t n_train) {
  if (n_train > records.size())
    throw std::runtime_error("split_train_test: n_train=" + std::to_string(n_train) +
                             " exceeds record count " + std::to_string(records.size()));
  std::vector<ProductRecord> train(records.begin(),
                                   records.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<ProductRecord> test(records.begin() + static_cast<std::ptrdiff_t>(n_train),
                                  records.end());
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Dataset file: one JSON object per line, UTF-8.
//   {"id": "...", "title": "...", "description": "...", "labels": ["..."],
//    "scores": {"modality": [0.1, ...]}}
// ---------------------------------------------------------------------------

inline ProductRecord parse_record_line(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("dataset line " + std::to_string(line_no) +
                             ": invalid JSON: " + e.what());
  }
  if (!j.is_object())
    throw std::runtime_error("dataset line " + std::to_string(line_no) + ": expected an object");
  ProductRecord r;
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
    throw std::runtime_error("dataset line " + std::to_string(line_no) +
                             ": missing or empty 'id'");
  r.id = j["id"].get<std::string>();
  if (j.contains("title")) r.title = j["title"].get<std::string>();
  if (j.contains("description")) r.description = j["description"].get<std::string>();
  if (j.contains("labels")) {
    for (const auto& l : j["labels"]) r.labels.push_back(l.get<std::string>());
    normalize_labels(r.labels);
  }
  if (j.contains("scores")) {
    for (const auto& [name, arr] : j["scores"].items()) {
      std::vector<double> v;
      for (const auto& x : arr) v.push_back(x.get<double>());
      r.external_scores[name] = std::move(v);
    }
  }
  return r;
}

inline std::vector<ProductRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<ProductRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_copy(line).empty()) continue;
    ProductRecord r = parse_record_line(line, line_no);
    if (!seen.insert(r.id).second)
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": duplicate id '" +
                               r.id + "'");
    records.push_back(std::move(r));
  }
  return records;
}

inline void save_dataset(const std::string& path, const std::vector<ProductRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["title"] = r.title;
    j["description"] = r.description;
    j["labels"] = r.labels;
    if (!r.external_scores.empty()) {
      nlohmann::json scores = nlohmann::json::object();
      for (const auto& [name, v] : r.external_scores) scores[name] = v;
      j["scores"] = std::move(scores);
    }
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Vocabulary file: "#min_count=<n>" header, then "<count>\t<label>" lines in
// vocabulary (lexicographic) order.
// ---------------------------------------------------------------------------

inline void save_vocabulary(const std::string& path, const LabelVocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  out << "#min_count=" << vocab.min_count() << '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i)
    out << vocab.counts()[i] << '\t' << vocab.labels()[i] << '\n';
}

inline LabelVocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#min_count=", 0) != 0)
    throw std::runtime_error("vocabulary file " + path + ": missing #min_count header");
  std::size_t min_count = std::stoull(line.substr(std::string("#min_count=").size()));
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("vocabulary file " + path + " line " + std::to_string(line_no) +
                               ": expected <count>\\t<label>");
    counts.push_back(std::stoull(line.substr(0, tab)));
    labels.push_back(line.substr(tab + 1));
  }
  return LabelVocabulary(std::move(labels), std::move(counts), min_count);
}

}  // namespace latefuse
