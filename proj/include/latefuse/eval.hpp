#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "latefuse/hash.hpp"
#include "latefuse/label_space.hpp"
#include "latefuse/metrics.hpp"
#include "latefuse/rng.hpp"

namespace latefuse {

// ---------------------------------------------------------------------------
// Thresholding and per-class error analysis
// ---------------------------------------------------------------------------

inline std::vector<MultiHotVector> threshold_predictions(
    const std::vector<std::vector<double>>& rows, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::runtime_error("threshold: tau must lie strictly inside (0,1)");
  std::vector<MultiHotVector> bits(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bits[i].assign(rows[i].size(), 0);
    for (std::size_t j = 0; j < rows[i].size(); ++j) bits[i][j] = rows[i][j] >= tau ? 1 : 0;
  }
  return bits;
}

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t support = 0;  // truth positives
};

inline std::vector<ClassCounts> per_class_counts(const std::vector<MultiHotVector>& pred,
                                                 const std::vector<MultiHotVector>& truth,
                                                 std::size_t label_count) {
  if (pred.size() != truth.size())
    throw std::runtime_error("per_class_counts: prediction/truth row count mismatch");
  std::vector<ClassCounts> counts(label_count);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != label_count || truth[i].size() != label_count)
      throw std::runtime_error("per_class_counts: row width mismatch at row " +
                               std::to_string(i));
    for (std::size_t c = 0; c < label_count; ++c) {
      if (truth[i][c]) ++counts[c].support;
      if (pred[i][c] && truth[i][c]) ++counts[c].tp;
      else if (pred[i][c] && !truth[i][c]) ++counts[c].fp;
      else if (!pred[i][c] && truth[i][c]) ++counts[c].fn;
    }
  }
  return counts;
}

struct MissRankEntry {
  std::string label;
  std::size_t fn = 0;
  std::size_t support = 0;
  double ratio = 0.0;  // fn / support
};

// Classes ranked by miss ratio (false negatives over support), worst first;
// ties break on label. Classes with no positive instances are skipped.
inline std::vector<MissRankEntry> top_misclassified(const std::vector<ClassCounts>& counts,
                                                    const std::vector<std::string>& labels,
                                                    std::size_t k) {
  if (counts.size() != labels.size())
    throw std::runtime_error("top_misclassified: counts/labels size mismatch");
  std::vector<MissRankEntry> entries;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c].support == 0) continue;
    entries.push_back({labels[c], counts[c].fn, counts[c].support,
                       static_cast<double>(counts[c].fn) /
                           static_cast<double>(counts[c].support)});
  }
  std::sort(entries.begin(), entries.end(), [](const MissRankEntry& a, const MissRankEntry& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    return a.label < b.label;
  });
  if (entries.size() > k) entries.resize(k);
  return entries;
}

// ---------------------------------------------------------------------------
// Synthetic truth and synthetic modality scores
// ---------------------------------------------------------------------------

inline std::vector<MultiHotVector> generate_synthetic_truth(std::size_t instances,
                                                            std::size_t label_count,
                                                            double prevalence,
                                                            std::uint64_t seed) {
  if (!(prevalence > 0.0 && prevalence < 1.0))
    throw std::runtime_error("synthetic truth: prevalence must lie in (0,1)");
  RngStream stream(seed, "synth:truth");
  std::vector<MultiHotVector> truth(instances);
  for (std::size_t i = 0; i < instances; ++i) {
    truth[i].assign(label_count, 0);
    for (std::size_t c = 0; c < label_count; ++c)
      truth[i][c] = stream.uniform() < prevalence ? 1 : 0;
  }
  return truth;
}

// Per-class reliability of a simulated scorer: with probability skill[c] the
// emitted score lands on the correct side of 0.5, otherwise on the wrong
// side. temperature widens the scores' spread toward 0.5.
struct SkillProfile {
  std::string modality;
  std::vector<double> skill;
  double temperature = 0.0;
};

inline std::vector<std::vector<double>> generate_synthetic_modality(
    const std::vector<MultiHotVector>& truth, const SkillProfile& profile, std::uint64_t seed) {
  if (truth.empty()) throw std::runtime_error("synthetic modality: empty truth");
  const std::size_t label_count = truth[0].size();
  if (profile.skill.size() != label_count)
    throw std::runtime_error("synthetic modality: skill vector width " +
                             std::to_string(profile.skill.size()) + " != label count " +
                             std::to_string(label_count));
  for (double s : profile.skill)
    if (!(s >= 0.0 && s <= 1.0))
      throw std::runtime_error("synthetic modality: skills must lie in [0,1]");
  if (!(profile.temperature >= 0.0 && profile.temperature <= 1.0))
    throw std::runtime_error("synthetic modality: temperature must lie in [0,1]");

  RngStream stream(seed, "synth:" + profile.modality);
  std::vector<std::vector<double>> rows(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].size() != label_count)
      throw std::runtime_error("synthetic modality: ragged truth rows");
    rows[i].resize(label_count);
    for (std::size_t c = 0; c < label_count; ++c) {
      const double u1 = stream.uniform();
      const double u2 = stream.uniform();
      const bool correct = u1 < profile.skill[c];
      const bool side = correct ? truth[i][c] != 0 : truth[i][c] == 0;
      const double offset = 0.01 + 0.48 * profile.temperature * u2 * u2;
      rows[i][c] = side ? 1.0 - offset : offset;
    }
  }
  return rows;
}

inline std::string synthetic_id(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "syn-%06zu", index + 1);
  return buf;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

struct EvalRow {
  std::string policy;
  double micro_f1 = 0.0;
  MicroCounts counts;
  std::vector<MissRankEntry> worst;
};

inline std::string format_f1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

namespace detail {

inline std::string worst_cell(const std::vector<MissRankEntry>& worst) {
  std::string cell;
  for (std::size_t i = 0; i < worst.size(); ++i) {
    if (i) cell += "; ";
    cell += worst[i].label + " (" + std::to_string(worst[i].fn) + "/" +
            std::to_string(worst[i].support) + ")";
  }
  if (cell.empty()) cell = "-";
  return cell;
}

}  // namespace detail

inline std::string emit_report(const std::vector<EvalRow>& rows, const std::string& format,
                               double tau, std::uint64_t labels_hash) {
  char tau_buf[32];
  std::snprintf(tau_buf, sizeof(tau_buf), "%.10g", tau);
  std::ostringstream out;
  if (format == "tsv") {
    out << "# tau=" << tau_buf << ",labels_hash=" << hex16(labels_hash) << "\n";
    out << "policy\tmicro_f1\ttop_misclassified\n";
    for (const auto& row : rows)
      out << row.policy << '\t' << format_f1(row.micro_f1) << '\t'
          << detail::worst_cell(row.worst) << '\n';
  } else if (format == "markdown") {
    out << "Decision threshold tau = " << tau_buf << "; labels hash " << hex16(labels_hash)
        << ".\n\n";
    out << "| policy | micro_f1 | top misclassified |\n";
    out << "| --- | --- | --- |\n";
    for (const auto& row : rows)
      out << "| " << row.policy << " | " << format_f1(row.micro_f1) << " | "
          << detail::worst_cell(row.worst) << " |\n";
  } else {
    throw std::runtime_error("unknown report format: " + format + " (expected tsv or markdown)");
  }
  return out.str();
}

}  // namespace latefuse
