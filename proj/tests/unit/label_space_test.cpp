#include <catch_amalgamated.hpp>

#include "latefuse/label_space.hpp"
#include "support/test_util.hpp"

using namespace latefuse;

namespace {

ProductRecord rec(std::string id, std::vector<std::string> labels) {
  ProductRecord r;
  r.id = std::move(id);
  r.title = "t";
  r.description = "d";
  r.labels = std::move(labels);
  return r;
}

}  // namespace

TEST_CASE("normalize_labels trims, dedupes and sorts") {
  std::vector<std::string> labels = {" music ", "books", "music", "", "books"};
  normalize_labels(labels);
  CHECK(labels == std::vector<std::string>{"books", "music"});
}

TEST_CASE("vocabulary keeps labels meeting min_count in lexicographic order") {
  std::vector<ProductRecord> records = {
      rec("a", {"toys", "games"}), rec("b", {"toys"}),        rec("c", {"games"}),
      rec("d", {"garden"}),        rec("e", {"toys", "home"}), rec("f", {"home"}),
      rec("g", {"electronics"}),   rec("h", {"toys"})};
  const LabelVocabulary vocab = build_vocabulary(records, 2);
  CHECK(vocab.labels() == std::vector<std::string>{"games", "home", "toys"});
  CHECK(vocab.counts() == std::vector<std::size_t>{2, 2, 4});

  const LabelVocabulary all = build_vocabulary(records, 0);
  CHECK(all.size() == 5);

  CHECK_THROWS_WITH(build_vocabulary(records, 99),
                    Catch::Matchers::ContainsSubstring("empty vocabulary"));
}

TEST_CASE("vocabulary hash tracks the ordered label list") {
  std::vector<ProductRecord> records = {rec("a", {"x", "y"}), rec("b", {"x", "y"})};
  const LabelVocabulary vocab = build_vocabulary(records, 1);
  CHECK(vocab.hash() == ordered_labels_hash({"x", "y"}));
}

TEST_CASE("filter_records intersects labels and drops empty records in order") {
  std::vector<ProductRecord> records = {rec("a", {"keep", "drop"}), rec("b", {"drop"}),
                                        rec("c", {"keep"})};
  const LabelVocabulary vocab(std::vector<std::string>{"keep"}, {2}, 2);
  const auto filtered = filter_records(records, vocab);
  REQUIRE(filtered.size() == 2);
  CHECK(filtered[0].id == "a");
  CHECK(filtered[0].labels == std::vector<std::string>{"keep"});
  CHECK(filtered[1].id == "c");
}

TEST_CASE("encode_labels flags bits and rejects unknowns") {
  const LabelVocabulary vocab(std::vector<std::string>{"a", "b", "c"}, {1, 1, 1}, 1);
  CHECK(encode_labels({"c", "a"}, vocab) == MultiHotVector{1, 0, 1});
  CHECK_THROWS_WITH(encode_labels({"nope"}, vocab),
                    Catch::Matchers::ContainsSubstring("nope"));
  CHECK_THROWS_WITH(encode_labels({}, vocab),
                    Catch::Matchers::ContainsSubstring("empty label set"));
  CHECK(encode_labels({}, vocab, false) == MultiHotVector{0, 0, 0});
}

TEST_CASE("split_train_test is a prefix cut with range checking") {
  std::vector<ProductRecord> records = {rec("a", {"x"}), rec("b", {"x"}), rec("c", {"x"})};
  auto [train, test] = split_train_test(records, 2);
  REQUIRE(train.size() == 2);
  REQUIRE(test.size() == 1);
  CHECK(train[0].id == "a");
  CHECK(test[0].id == "c");
  CHECK_THROWS(split_train_test(records, 4));
}

TEST_CASE("dataset files round-trip and reject duplicates") {
  testutil::TempDir dir("dataset");
  std::vector<ProductRecord> records = {rec("p1", {"books"}), rec("p2", {"music", "books"})};
  records[0].external_scores["image"] = {0.25, 0.75};
  save_dataset(dir.file("d.jsonl"), records);
  const auto loaded = load_dataset(dir.file("d.jsonl"));
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].id == "p1");
  CHECK(loaded[0].external_scores.at("image") == std::vector<double>{0.25, 0.75});
  CHECK(loaded[1].labels == std::vector<std::string>{"books", "music"});

  testutil::write_file(dir.file("dup.jsonl"),
                       "{\"id\":\"x\",\"labels\":[\"a\"]}\n{\"id\":\"x\",\"labels\":[\"a\"]}\n");
  CHECK_THROWS_WITH(load_dataset(dir.file("dup.jsonl")),
                    Catch::Matchers::ContainsSubstring("line 2"));

  testutil::write_file(dir.file("bad.jsonl"), "not json\n");
  CHECK_THROWS_WITH(load_dataset(dir.file("bad.jsonl")),
                    Catch::Matchers::ContainsSubstring("line 1"));

  testutil::write_file(dir.file("noid.jsonl"), "{\"labels\":[\"a\"]}\n");
  CHECK_THROWS_WITH(load_dataset(dir.file("noid.jsonl")),
                    Catch::Matchers::ContainsSubstring("id"));
}

TEST_CASE("vocabulary files round-trip") {
  testutil::TempDir dir("vocab");
  const LabelVocabulary vocab(std::vector<std::string>{"alpha", "beta"}, {400, 512}, 400);
  save_vocabulary(dir.file("v.vocab"), vocab);
  const LabelVocabulary loaded = load_vocabulary(dir.file("v.vocab"));
  CHECK(loaded.labels() == vocab.labels());
  CHECK(loaded.counts() == vocab.counts());
  CHECK(loaded.min_count() == 400);
  CHECK(loaded.hash() == vocab.hash());

  testutil::write_file(dir.file("bad.vocab"), "no header\n");
  CHECK_THROWS_WITH(load_vocabulary(dir.file("bad.vocab")),
                    Catch::Matchers::ContainsSubstring("min_count"));
}
