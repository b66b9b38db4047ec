#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "latefuse/label_space.hpp"

namespace latefuse {

struct MicroCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  // F1 pooled over all (product, class) pairs. The degenerate case with no
  // positives anywhere is defined as 1.0 so empty smoke tests do not divide
  // by zero; callers can detect it via degenerate().
  bool degenerate() const { return tp == 0 && fp == 0 && fn == 0; }
  double f1() const {
    if (degenerate()) return 1.0;
    return 2.0 * static_cast<double>(tp) /
           (2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn));
  }
};

inline MicroCounts micro_counts(const std::vector<MultiHotVector>& pred,
                                const std::vector<MultiHotVector>& truth) {
  if (pred.size() != truth.size())
    throw std::runtime_error("micro_counts: row count mismatch");
  MicroCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != truth[i].size())
      throw std::runtime_error("micro_counts: column count mismatch at row " + std::to_string(i));
    for (std::size_t j = 0; j < pred[i].size(); ++j) {
      const bool p = pred[i][j] != 0;
      const bool y = truth[i][j] != 0;
      if (p && y)
        ++c.tp;
      else if (p && !y)
        ++c.fp;
      else if (!p && y)
        ++c.fn;
    }
  }
  return c;
}

inline double micro_f1(const std::vector<MultiHotVector>& pred,
                       const std::vector<MultiHotVector>& truth) {
  return micro_counts(pred, truth).f1();
}

}  // namespace latefuse
