#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "latefuse/hash.hpp"

namespace latefuse {

// One modality's probabilities: rows follow ids, columns follow the label
// vocabulary whose hash is carried in the header.
struct PredictionMatrix {
  std::string modality;
  std::uint64_t labels_hash = 0;
  std::size_t label_count = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return ids.size(); }
};

inline void validate_prediction_matrix(const PredictionMatrix& m) {
  if (m.modality.empty()) throw std::runtime_error("prediction matrix: empty modality name");
  if (m.modality.find(',') != std::string::npos || m.modality.find('\n') != std::string::npos)
    throw std::runtime_error("prediction matrix: modality name must not contain ',' or newline");
  if (m.label_count == 0) throw std::runtime_error("prediction matrix: label count must be > 0");
  if (m.ids.size() != m.rows.size())
    throw std::runtime_error("prediction matrix: id/row count mismatch");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    if (m.ids[i].empty()) throw std::runtime_error("prediction matrix: empty id");
    if (m.ids[i].find(',') != std::string::npos)
      throw std::runtime_error("prediction matrix: id must not contain ',': " + m.ids[i]);
    if (!seen.insert(m.ids[i]).second)
      throw std::runtime_error("prediction matrix: duplicate id: " + m.ids[i]);
    if (m.rows[i].size() != m.label_count)
      throw std::runtime_error("prediction matrix: row width mismatch for id " + m.ids[i]);
    for (double v : m.rows[i])
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw std::runtime_error("prediction matrix: value outside [0,1] for id " + m.ids[i]);
  }
}

inline std::string format_probability(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline void save_prediction_matrix(const std::string& path, const PredictionMatrix& m,
                                   const std::vector<std::string>& notes = {}) {
  validate_prediction_matrix(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "#modality=" << m.modality << ",labels_hash=" << hex16(m.labels_hash)
      << ",L=" << m.label_count << "\n";
  for (const auto& note : notes) out << "# " << note << "\n";
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    out << m.ids[i];
    for (double v : m.rows[i]) out << ',' << format_probability(v);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline PredictionMatrix load_prediction_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::string mod_key = "#modality=", hash_key = ",labels_hash=", l_key = ",L=";
  if (line.rfind(mod_key, 0) != 0)
    throw std::runtime_error(path + ": first line must start with #modality=");
  const std::size_t hash_at = line.find(hash_key);
  const std::size_t l_at = line.find(l_key, hash_at == std::string::npos ? 0 : hash_at + 1);
  if (hash_at == std::string::npos || l_at == std::string::npos)
    throw std::runtime_error(path + ": malformed header line");

  PredictionMatrix m;
  m.modality = line.substr(mod_key.size(), hash_at - mod_key.size());
  m.labels_hash = parse_hex64(line.substr(hash_at + hash_key.size(), l_at - hash_at - hash_key.size()));
  try {
    m.label_count = std::stoul(line.substr(l_at + l_key.size()));
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": malformed label count in header");
  }
  if (m.modality.empty() || m.label_count == 0)
    throw std::runtime_error(path + ": malformed header line");

  std::size_t line_no = 1;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != m.label_count + 1)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(m.label_count + 1) + " fields, got " +
                               std::to_string(fields.size()));
    if (fields[0].empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty id");
    if (!seen.insert(fields[0]).second)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": duplicate id: " + fields[0]);
    std::vector<double> row(m.label_count);
    for (std::size_t i = 0; i < m.label_count; ++i) {
      try {
        std::size_t used = 0;
        row[i] = std::stod(fields[i + 1], &used);
        if (used != fields[i + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed probability: " + fields[i + 1]);
      }
      if (!std::isfinite(row[i]) || row[i] < 0.0 || row[i] > 1.0)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": probability outside [0,1]: " + fields[i + 1]);
    }
    m.ids.push_back(fields[0]);
    m.rows.push_back(std::move(row));
  }
  return m;
}

}  // namespace latefuse
