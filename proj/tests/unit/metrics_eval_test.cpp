#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "latefuse/eval.hpp"
#include "latefuse/hash.hpp"
#include "latefuse/metrics.hpp"
#include "latefuse/rng.hpp"

using namespace latefuse;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<MultiHotVector> random_bits(std::size_t n, std::size_t width, RngStream& stream,
                                        double p) {
  std::vector<MultiHotVector> rows(n);
  for (auto& row : rows) {
    row.assign(width, 0);
    for (auto& bit : row) bit = stream.uniform() < p ? 1 : 0;
  }
  return rows;
}

}  // namespace

TEST_CASE("micro_f1 matches a hand-worked 2x3 example") {
  const std::vector<MultiHotVector> pred = {{1, 1, 0}, {0, 1, 0}};
  const std::vector<MultiHotVector> truth = {{1, 0, 0}, {0, 1, 1}};
  const MicroCounts c = micro_counts(pred, truth);
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK_FALSE(c.degenerate());
  CHECK(micro_f1(pred, truth) == 2.0 / 3.0);
}

TEST_CASE("micro_f1 is 1.0 on the degenerate all-negative case") {
  const std::vector<MultiHotVector> zeros = {{0, 0}, {0, 0}};
  const MicroCounts c = micro_counts(zeros, zeros);
  CHECK(c.degenerate());
  CHECK(c.f1() == 1.0);
}

TEST_CASE("micro_f1 equals the pooled-sum oracle on random instances") {
  RngStream stream(2024, "micro-f1-oracle");
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + stream.below(40);
    const std::size_t width = 1 + stream.below(12);
    const auto pred = random_bits(n, width, stream, 0.3);
    const auto truth = random_bits(n, width, stream, 0.3);

    // Independent derivation: F1 = 2*dot(pred,truth) / (|pred| + |truth|).
    std::size_t dot = 0, sum_pred = 0, sum_truth = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        dot += pred[i][j] & truth[i][j];
        sum_pred += pred[i][j];
        sum_truth += truth[i][j];
      }
    const double expected = (sum_pred + sum_truth) == 0
                                ? 1.0
                                : 2.0 * static_cast<double>(dot) /
                                      static_cast<double>(sum_pred + sum_truth);
    CHECK(micro_f1(pred, truth) == expected);
  }
}

TEST_CASE("micro_f1 is invariant under row permutation") {
  RngStream stream(7, "micro-f1-perm");
  const auto pred = random_bits(25, 6, stream, 0.4);
  const auto truth = random_bits(25, 6, stream, 0.4);
  std::vector<std::size_t> order(pred.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  stream.shuffle(order);
  std::vector<MultiHotVector> pred2, truth2;
  for (std::size_t i : order) {
    pred2.push_back(pred[i]);
    truth2.push_back(truth[i]);
  }
  CHECK(micro_f1(pred, truth) == micro_f1(pred2, truth2));
}

TEST_CASE("micro_counts validates shapes") {
  CHECK_THROWS_WITH(micro_counts({{1}}, {{1}, {0}}), ContainsSubstring("row count mismatch"));
  CHECK_THROWS_WITH(micro_counts({{1, 0}}, {{1}}), ContainsSubstring("column count mismatch"));
}

TEST_CASE("threshold_predictions applies tau inclusively and validates it") {
  const std::vector<std::vector<double>> rows = {{0.0, 0.5, 0.500001, 0.4999, 1.0}};
  const auto bits = threshold_predictions(rows, 0.5);
  CHECK(bits == std::vector<MultiHotVector>{{0, 1, 1, 0, 1}});

  for (double bad : {0.0, 1.0, -0.5, 1.5})
    CHECK_THROWS_WITH(threshold_predictions(rows, bad),
                      ContainsSubstring("tau must lie strictly inside (0,1)"));
}

TEST_CASE("raising tau can only clear prediction bits") {
  RngStream stream(11, "tau-mono");
  std::vector<std::vector<double>> rows(30);
  for (auto& row : rows) {
    row.resize(8);
    for (auto& v : row) v = stream.uniform();
  }
  const auto lo = threshold_predictions(rows, 0.3);
  const auto hi = threshold_predictions(rows, 0.7);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      CHECK(hi[i][j] <= lo[i][j]);
}

TEST_CASE("per_class_counts books every cell consistently") {
  const std::vector<MultiHotVector> pred = {{1, 0, 1}, {1, 1, 0}, {0, 0, 0}};
  const std::vector<MultiHotVector> truth = {{1, 1, 0}, {1, 0, 0}, {0, 1, 0}};
  const auto counts = per_class_counts(pred, truth, 3);
  REQUIRE(counts.size() == 3);
  CHECK(counts[0].tp == 2);
  CHECK(counts[0].fp == 0);
  CHECK(counts[0].fn == 0);
  CHECK(counts[0].support == 2);
  CHECK(counts[1].tp == 0);
  CHECK(counts[1].fp == 1);
  CHECK(counts[1].fn == 2);
  CHECK(counts[1].support == 2);
  CHECK(counts[2].tp == 0);
  CHECK(counts[2].fp == 1);
  CHECK(counts[2].fn == 0);
  CHECK(counts[2].support == 0);

  // Per-class totals must agree with the pooled counts.
  const MicroCounts pooled = micro_counts(pred, truth);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& c : counts) {
    CHECK(c.tp + c.fn == c.support);
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  CHECK(tp == pooled.tp);
  CHECK(fp == pooled.fp);
  CHECK(fn == pooled.fn);

  CHECK_THROWS_WITH(per_class_counts(pred, truth, 4), ContainsSubstring("row width mismatch"));
  CHECK_THROWS_WITH(per_class_counts({{1}}, {{1}, {0}}, 1),
                    ContainsSubstring("row count mismatch"));
}

TEST_CASE("top_misclassified ranks by miss ratio with label tiebreak") {
  std::vector<ClassCounts> counts(4);
  std::vector<std::string> labels = {"a", "b", "c", "d"};
  counts[0].fn = 9;
  counts[0].support = 10;
  counts[1].fn = 5;
  counts[1].support = 10;
  counts[2].fn = 10;
  counts[2].support = 100;
  counts[3].fn = 0;
  counts[3].support = 0;  // no positives: skipped

  const auto top2 = top_misclassified(counts, labels, 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0].label == "a");
  CHECK(top2[0].ratio == 0.9);
  CHECK(top2[1].label == "b");
  CHECK(top2[1].ratio == 0.5);

  const auto all = top_misclassified(counts, labels, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[2].label == "c");

  // Equal ratios fall back to ascending label order.
  std::vector<ClassCounts> tied(3);
  for (auto& c : tied) {
    c.fn = 1;
    c.support = 2;
  }
  const auto order = top_misclassified(tied, {"zeta", "alpha", "mid"}, 3);
  REQUIRE(order.size() == 3);
  CHECK(order[0].label == "alpha");
  CHECK(order[1].label == "mid");
  CHECK(order[2].label == "zeta");

  CHECK_THROWS_WITH(top_misclassified(counts, {"a"}, 1),
                    ContainsSubstring("counts/labels size mismatch"));
}

TEST_CASE("emit_report renders tsv and markdown with identical numbers") {
  EvalRow good;
  good.policy = "fused_ridge";
  good.micro_f1 = 0.79236;
  good.worst = {{"toys", 3, 10, 0.3}, {"games", 1, 5, 0.2}};
  EvalRow bare;
  bare.policy = "title";
  bare.micro_f1 = 1.0 / 3.0;
  const std::uint64_t hash = fnv1a64("books\nmusic\n");

  const std::string tsv = emit_report({good, bare}, "tsv", 0.5, hash);
  CHECK(tsv == "# tau=0.5,labels_hash=" + hex16(hash) +
                   "\n"
                   "policy\tmicro_f1\ttop_misclassified\n"
                   "fused_ridge\t0.7924\ttoys (3/10); games (1/5)\n"
                   "title\t0.3333\t-\n");

  const std::string md = emit_report({good, bare}, "markdown", 0.5, hash);
  CHECK_THAT(md, ContainsSubstring("Decision threshold tau = 0.5; labels hash " + hex16(hash)));
  CHECK_THAT(md, ContainsSubstring("| policy | micro_f1 | top misclassified |"));
  CHECK_THAT(md, ContainsSubstring("| fused_ridge | 0.7924 | toys (3/10); games (1/5) |"));
  CHECK_THAT(md, ContainsSubstring("| title | 0.3333 | - |"));

  CHECK_THROWS_WITH(emit_report({good}, "xml", 0.5, hash),
                    ContainsSubstring("unknown report format: xml"));
}

TEST_CASE("synthetic truth hits the requested prevalence and is deterministic") {
  const auto truth = generate_synthetic_truth(2000, 20, 0.1, 4242);
  REQUIRE(truth.size() == 2000);
  std::size_t ones = 0;
  for (const auto& row : truth) {
    REQUIRE(row.size() == 20);
    for (auto bit : row) ones += bit;
  }
  const double rate = static_cast<double>(ones) / (2000.0 * 20.0);
  CHECK(rate > 0.08);
  CHECK(rate < 0.12);

  CHECK(generate_synthetic_truth(2000, 20, 0.1, 4242) == truth);
  CHECK(generate_synthetic_truth(2000, 20, 0.1, 4243) != truth);

  for (double bad : {0.0, 1.0, -0.1})
    CHECK_THROWS_WITH(generate_synthetic_truth(10, 3, bad, 1),
                      ContainsSubstring("prevalence must lie in (0,1)"));
}

TEST_CASE("synthetic modality saturates at temperature zero") {
  const auto truth = generate_synthetic_truth(200, 6, 0.25, 9);
  SkillProfile perfect{"img", std::vector<double>(6, 1.0), 0.0};
  const auto scores = generate_synthetic_modality(truth, perfect, 9);
  REQUIRE(scores.size() == truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(scores[i][c] == (truth[i][c] ? 0.99 : 0.01));

  SkillProfile hopeless{"img", std::vector<double>(6, 0.0), 0.0};
  const auto wrong = generate_synthetic_modality(truth, hopeless, 9);
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(wrong[i][c] == (truth[i][c] ? 0.01 : 0.99));
}

TEST_CASE("synthetic modality temperature widens scores toward 0.5") {
  const auto truth = generate_synthetic_truth(300, 4, 0.2, 17);
  SkillProfile warm{"img", std::vector<double>(4, 0.8), 1.0};
  const auto scores = generate_synthetic_modality(truth, warm, 17);
  bool saw_soft = false;
  for (const auto& row : scores)
    for (double v : row) {
      CHECK(v >= 0.01);
      CHECK(v <= 0.99);
      if (v > 0.1 && v < 0.9) saw_soft = true;
    }
  CHECK(saw_soft);

  CHECK(generate_synthetic_modality(truth, warm, 17) == scores);
  SkillProfile other = warm;
  other.modality = "audio";  // different stream purpose, different draws
  CHECK(generate_synthetic_modality(truth, other, 17) != scores);
}

TEST_CASE("synthetic modality validates its inputs") {
  const auto truth = generate_synthetic_truth(5, 3, 0.3, 1);
  CHECK_THROWS_WITH(generate_synthetic_modality({}, {"m", {0.5}, 0.0}, 1),
                    ContainsSubstring("empty truth"));
  CHECK_THROWS_WITH(generate_synthetic_modality(truth, {"m", {0.5, 0.5}, 0.0}, 1),
                    ContainsSubstring("skill vector width 2 != label count 3"));
  CHECK_THROWS_WITH(generate_synthetic_modality(truth, {"m", {0.5, 1.5, 0.5}, 0.0}, 1),
                    ContainsSubstring("skills must lie in [0,1]"));
  CHECK_THROWS_WITH(generate_synthetic_modality(truth, {"m", {0.5, 0.5, 0.5}, 2.0}, 1),
                    ContainsSubstring("temperature must lie in [0,1]"));
}

TEST_CASE("synthetic ids are one-based and zero-padded") {
  CHECK(synthetic_id(0) == "syn-000001");
  CHECK(synthetic_id(41) == "syn-000042");
  CHECK(synthetic_id(999999) == "syn-1000000");
}
