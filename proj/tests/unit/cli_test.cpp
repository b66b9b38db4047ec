#include <catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "latefuse/label_space.hpp"
#include "latefuse/prediction_matrix.hpp"
#include "support/test_util.hpp"

using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

// Shared workspace: a marker dataset plus its label vocabulary.
struct Workspace {
  testutil::TempDir dir{"cli"};
  std::string dataset;
  std::string vocab;
  std::vector<latefuse::ProductRecord> records;

  explicit Workspace(std::size_t n = 60, std::size_t labels = 3, std::uint64_t seed = 3) {
    records = testutil::marker_corpus(n, labels, seed);
    dataset = dir.file("dataset.jsonl");
    latefuse::save_dataset(dataset, records);
    const auto outdir = dir.file("vocab-out");
    const auto r = testutil::run_cli({"vocab", "--dataset", dataset, "--out", outdir});
    REQUIRE(r.exit_code == 0);
    vocab = (fs::path(outdir) / "labels.vocab").string();
    REQUIRE(fs::exists(vocab));
  }
};

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

}  // namespace

TEST_CASE("vocab reports the kept labels and their hash") {
  Workspace w(40, 4, 11);
  const auto outdir = w.dir.file("v2");
  const auto r = testutil::run_cli({"vocab", "--dataset", w.dataset, "--out", outdir});
  CHECK(r.exit_code == 0);
  CHECK_THAT(r.out, ContainsSubstring("kept 4 labels (min_count=1)"));
  CHECK_THAT(r.out, ContainsSubstring("labels hash "));

  const auto vocab = latefuse::load_vocabulary((fs::path(outdir) / "labels.vocab").string());
  CHECK(vocab.labels() == std::vector<std::string>{"cat0", "cat1", "cat2", "cat3"});

  const auto rc = testutil::read_file((fs::path(outdir) / "run_config.txt").string());
  CHECK_THAT(rc, ContainsSubstring("command = vocab"));
  CHECK_THAT(rc, ContainsSubstring("min_count = 1"));
  CHECK_THAT(rc, ContainsSubstring("seed = 1"));
}

TEST_CASE("missing options and files fail with exit 1 and a clear message") {
  testutil::TempDir dir("cli-missing");
  auto r = testutil::run_cli({"vocab", "--out", dir.file("o")});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.err, ContainsSubstring("missing required option: --dataset"));

  r = testutil::run_cli({"vocab", "--dataset", dir.file("nope.jsonl"), "--out", dir.file("o")});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.err, ContainsSubstring("nope.jsonl"));

  Workspace w(10, 2, 5);
  r = testutil::run_cli({"train-text", "--dataset", w.dataset, "--vocab", w.vocab, "--modality",
                         "image", "--out", dir.file("o")});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.err, ContainsSubstring("unknown modality: image (expected title or description)"));
}

TEST_CASE("config file provides defaults and explicit flags override it") {
  Workspace w(20, 2, 7);
  const auto cfg_path = w.dir.file("run.cfg");
  testutil::write_file(cfg_path,
                       "# experiment defaults\n"
                       "seed = 5\n"
                       "min_count = 2\n");
  const auto outdir = w.dir.file("cfg-out");
  const auto r = testutil::run_cli({"--config", cfg_path, "vocab", "--dataset", w.dataset,
                                    "--min-count", "1", "--out", outdir});
  CHECK(r.exit_code == 0);
  const auto rc = testutil::read_file((fs::path(outdir) / "run_config.txt").string());
  CHECK_THAT(rc, ContainsSubstring("min_count = 1"));  // flag beat the file
  CHECK_THAT(rc, ContainsSubstring("seed = 5"));       // file beat the default

  const auto bad = w.dir.file("bad.cfg");
  testutil::write_file(bad, "bogus = 1\n");
  const auto rbad =
      testutil::run_cli({"--config", bad, "vocab", "--dataset", w.dataset, "--out", outdir});
  CHECK(rbad.exit_code == 1);
  CHECK_THAT(rbad.err, ContainsSubstring("unknown config key: bogus"));

  const auto mangled = w.dir.file("mangled.cfg");
  testutil::write_file(mangled, "seed 5\n");
  const auto rman =
      testutil::run_cli({"--config", mangled, "vocab", "--dataset", w.dataset, "--out", outdir});
  CHECK(rman.exit_code == 1);
  CHECK_THAT(rman.err, ContainsSubstring("expected key = value"));
}

TEST_CASE("rerunning a command rewrites run_config.txt byte-identically") {
  Workspace w(15, 2, 9);
  const auto outdir = w.dir.file("rc");
  REQUIRE(testutil::run_cli({"vocab", "--dataset", w.dataset, "--out", outdir}).exit_code == 0);
  const auto once = testutil::read_file((fs::path(outdir) / "run_config.txt").string());
  REQUIRE(testutil::run_cli({"vocab", "--dataset", w.dataset, "--out", outdir}).exit_code == 0);
  CHECK(testutil::read_file((fs::path(outdir) / "run_config.txt").string()) == once);
}

TEST_CASE("the full pipeline runs end to end") {
  Workspace w(60, 3, 3);
  const auto outdir = w.dir.file("pipe");

  // Train a small title CNN.
  const auto train = testutil::run_cli(
      {"train-text", "--dataset", w.dataset, "--vocab", w.vocab, "--modality", "title",
       "--epochs", "12", "--batch", "10", "--lr", "0.01", "--embedding-dim", "8", "--filters",
       "8", "--hidden", "10", "--kernel", "2", "--max-len", "12", "--dropout", "0.2", "--seed",
       "9", "--out", outdir});
  INFO(train.err);
  REQUIRE(train.exit_code == 0);
  CHECK_THAT(train.out, ContainsSubstring("epoch 1 loss"));
  CHECK_THAT(train.out, ContainsSubstring("train_micro_f1"));
  const auto model_path = (fs::path(outdir) / "model_title.bin").string();
  CHECK(fs::exists(model_path));
  CHECK(fs::exists(fs::path(outdir) / "tokens_title.vocab"));
  const auto train_log = testutil::read_file((fs::path(outdir) / "train_log_title.tsv").string());
  CHECK_THAT(first_line(train_log), ContainsSubstring("# labels_hash="));
  CHECK_THAT(train_log, ContainsSubstring("epoch\tloss\ttrain_micro_f1"));

  // Score every record with the trained model.
  const auto predict =
      testutil::run_cli({"predict", "--dataset", w.dataset, "--vocab", w.vocab, "--model",
                         model_path, "--out", outdir});
  INFO(predict.err);
  REQUIRE(predict.exit_code == 0);
  CHECK_THAT(predict.out, ContainsSubstring("wrote 60 rows to"));
  const auto pred_title = (fs::path(outdir) / "pred_title.csv").string();
  REQUIRE(fs::exists(pred_title));

  // Add a synthetic second modality, saturated at temperature zero.
  const auto profile_path = w.dir.file("skill.tsv");
  testutil::write_file(profile_path, "*\t0.9\n");
  const auto synth = testutil::run_cli({"synth", "--dataset", w.dataset, "--vocab", w.vocab,
                                        "--profile", profile_path, "--modality", "synthimg",
                                        "--seed", "9", "--out", outdir});
  INFO(synth.err);
  REQUIRE(synth.exit_code == 0);
  const auto pred_synth = (fs::path(outdir) / "pred_synthimg.csv").string();
  const auto synth_matrix = latefuse::load_prediction_matrix(pred_synth);
  REQUIRE(synth_matrix.size() == 60);
  for (const auto& row : synth_matrix.rows)
    for (double v : row) CHECK((v == 0.01 || v == 0.99));

  // Static fusion: notes record the policy and inputs.
  const auto fuse_max = testutil::run_cli({"fuse", "--pred", pred_title, "--pred", pred_synth,
                                           "--policy", "max", "--out", outdir});
  INFO(fuse_max.err);
  REQUIRE(fuse_max.exit_code == 0);
  CHECK_THAT(fuse_max.out, ContainsSubstring("wrote 60 fused rows"));
  const auto fused_max = testutil::read_file((fs::path(outdir) / "fused_max.csv").string());
  CHECK_THAT(fused_max, ContainsSubstring("#modality=fused_max,"));
  CHECK_THAT(fused_max, ContainsSubstring("# policy=max\n"));
  CHECK_THAT(fused_max, ContainsSubstring("# inputs=title+synthimg\n"));

  // Trained fusion: ridge on the training prefix, applied to the test split.
  const auto fuse_ridge = testutil::run_cli(
      {"fuse", "--dataset", w.dataset, "--vocab", w.vocab, "--pred", pred_title, "--pred",
       pred_synth, "--policy", "ridge", "--alpha", "0.1", "--n-train", "40", "--apply-split",
       "test", "--out", outdir});
  INFO(fuse_ridge.err);
  REQUIRE(fuse_ridge.exit_code == 0);
  CHECK_THAT(fuse_ridge.out, ContainsSubstring("wrote 20 fused rows"));
  CHECK(fs::exists(fs::path(outdir) / "fusion_ridge.bin"));
  const auto fused_ridge = testutil::read_file((fs::path(outdir) / "fused_ridge.csv").string());
  CHECK_THAT(fused_ridge, ContainsSubstring("# policy=ridge,alpha=0.1,intercept=false\n"));

  // A policy network over the same pair.
  const auto fuse_mlp = testutil::run_cli(
      {"fuse", "--dataset", w.dataset, "--vocab", w.vocab, "--pred", pred_title, "--pred",
       pred_synth, "--policy", "mlp", "--epochs", "8", "--batch", "16", "--lr", "0.02",
       "--n-train", "40", "--apply-split", "test", "--seed", "9", "--out", outdir});
  INFO(fuse_mlp.err);
  REQUIRE(fuse_mlp.exit_code == 0);
  CHECK(fs::exists(fs::path(outdir) / "fusion_mlp.bin"));
  const auto fused_mlp = testutil::read_file((fs::path(outdir) / "fused_mlp.csv").string());
  CHECK_THAT(fused_mlp,
             ContainsSubstring("# policy=mlp,arity=2,activations=sigmoid/sigmoid/sigmoid,"));

  // Evaluate everything on the held-out split.
  const auto eval = testutil::run_cli(
      {"eval", "--dataset", w.dataset, "--vocab", w.vocab, "--pred", pred_title, "--pred",
       pred_synth, "--pred", (fs::path(outdir) / "fused_ridge.csv").string(), "--split", "test",
       "--n-train", "40", "--out", outdir});
  INFO(eval.err);
  REQUIRE(eval.exit_code == 0);
  CHECK_THAT(eval.out, ContainsSubstring("title: skipped 40 rows outside split test"));
  CHECK_THAT(eval.out, ContainsSubstring("title micro_f1="));
  CHECK_THAT(eval.out, ContainsSubstring("synthimg micro_f1="));
  CHECK_THAT(eval.out, ContainsSubstring("fused_ridge micro_f1="));

  const auto report = testutil::read_file((fs::path(outdir) / "report.tsv").string());
  CHECK_THAT(first_line(report), ContainsSubstring("# tau=0.5,labels_hash="));
  CHECK_THAT(report, ContainsSubstring("policy\tmicro_f1\ttop_misclassified"));
  CHECK_THAT(report, ContainsSubstring("fused_ridge\t"));
  const auto report_md = testutil::read_file((fs::path(outdir) / "report.md").string());
  CHECK_THAT(report_md, ContainsSubstring("| policy | micro_f1 | top misclassified |"));
}

TEST_CASE("train-text warns when stop-word removal has no list to work with") {
  Workspace w(12, 2, 21);
  const auto outdir = w.dir.file("desc");
  const auto r = testutil::run_cli(
      {"train-text", "--dataset", w.dataset, "--vocab", w.vocab, "--modality", "description",
       "--epochs", "1", "--batch", "8", "--embedding-dim", "4", "--filters", "4", "--hidden",
       "4", "--kernel", "2", "--max-len", "10", "--out", outdir});
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK_THAT(r.err, ContainsSubstring("removal is a no-op"));
}

TEST_CASE("predict refuses artifacts from a different vocabulary") {
  Workspace w(30, 3, 13);
  const auto outdir = w.dir.file("m");
  REQUIRE(testutil::run_cli({"train-text", "--dataset", w.dataset, "--vocab", w.vocab,
                             "--modality", "title", "--epochs", "1", "--batch", "8",
                             "--embedding-dim", "4", "--filters", "4", "--hidden", "4",
                             "--kernel", "2", "--max-len", "10", "--out", outdir})
              .exit_code == 0);

  // A vocabulary built from a different corpus has a different hash.
  Workspace other(30, 4, 14);
  const auto r = testutil::run_cli({"predict", "--dataset", other.dataset, "--vocab", other.vocab,
                                    "--model", (fs::path(outdir) / "model_title.bin").string(),
                                    "--out", w.dir.file("clash")});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.err, ContainsSubstring("vocabulary hash mismatch"));
  CHECK_THAT(r.err, ContainsSubstring("stale artifacts are never silently recomputed"));
}

TEST_CASE("train-text and synth artifacts are byte-identical across reruns") {
  Workspace w(25, 2, 17);
  const auto a = w.dir.file("runA");
  const auto b = w.dir.file("runB");
  const std::vector<std::string> train_tail = {
      "--dataset", w.dataset, "--vocab", w.vocab, "--modality", "title", "--epochs", "3",
      "--batch", "8", "--embedding-dim", "4", "--filters", "4", "--hidden", "4", "--kernel",
      "2", "--max-len", "10", "--seed", "23"};

  for (const auto& outdir : {a, b}) {
    std::vector<std::string> args = {"train-text"};
    args.insert(args.end(), train_tail.begin(), train_tail.end());
    args.insert(args.end(), {"--out", outdir});
    REQUIRE(testutil::run_cli(args).exit_code == 0);
  }
  CHECK(testutil::read_file((fs::path(a) / "model_title.bin").string()) ==
        testutil::read_file((fs::path(b) / "model_title.bin").string()));
  CHECK(testutil::read_file((fs::path(a) / "train_log_title.tsv").string()) ==
        testutil::read_file((fs::path(b) / "train_log_title.tsv").string()));

  const auto profile_path = w.dir.file("skill.tsv");
  testutil::write_file(profile_path, "*\t0.8\n");
  for (const auto& outdir : {a, b}) {
    REQUIRE(testutil::run_cli({"synth", "--dataset", w.dataset, "--vocab", w.vocab, "--profile",
                               profile_path, "--modality", "img", "--temperature", "0.5",
                               "--seed", "23", "--out", outdir})
                .exit_code == 0);
  }
  CHECK(testutil::read_file((fs::path(a) / "pred_img.csv").string()) ==
        testutil::read_file((fs::path(b) / "pred_img.csv").string()));
  CHECK(testutil::read_file((fs::path(a) / "pred_img.csv").string()) !=
        testutil::read_file(w.dir.file("runA") + "/model_title.bin"));
}

TEST_CASE("import-scores validates, clamps, and filters external CSVs") {
  Workspace w(10, 3, 19);
  const auto outdir = w.dir.file("imp");

  // Well-formed import: 4 columns per row (id + 3 labels).
  std::ostringstream ok;
  for (std::size_t i = 0; i < 5; ++i)
    ok << w.records[i].id << ",0.5,0.25,0.75\n";
  const auto ok_path = w.dir.file("ok.csv");
  testutil::write_file(ok_path, ok.str());
  auto r = testutil::run_cli({"import-scores", "--vocab", w.vocab, "--external", ok_path,
                              "--modality", "ext", "--out", outdir});
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK_THAT(r.out, ContainsSubstring("imported 5 rows"));
  const auto matrix = latefuse::load_prediction_matrix((fs::path(outdir) / "pred_ext.csv").string());
  CHECK(matrix.size() == 5);
  CHECK(matrix.modality == "ext");

  // Wrong column count names the file and line.
  const auto short_path = w.dir.file("short.csv");
  testutil::write_file(short_path, w.records[0].id + ",0.5,0.5,0.5\n" + w.records[1].id + ",0.5,0.5\n");
  r = testutil::run_cli({"import-scores", "--vocab", w.vocab, "--external", short_path,
                         "--modality", "ext", "--out", outdir});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.err, ContainsSubstring(":2: expected 4 columns, got 3"));

  // Out-of-range scores are clamped with a warning.
  const auto clamp_path = w.dir.file("clamp.csv");
  testutil::write_file(clamp_path, w.records[0].id + ",1.3,-0.2,0.5\n");
  r = testutil::run_cli({"import-scores", "--vocab", w.vocab, "--external", clamp_path,
                         "--modality", "clamped", "--out", outdir});
  REQUIRE(r.exit_code == 0);
  CHECK_THAT(r.err, ContainsSubstring("warning: clamped 2 scores into [0,1]"));
  const auto clamped =
      latefuse::load_prediction_matrix((fs::path(outdir) / "pred_clamped.csv").string());
  CHECK(clamped.rows[0] == std::vector<double>{1.0, 0.0, 0.5});

  // With --dataset, rows with unknown ids are skipped and counted.
  const auto alien_path = w.dir.file("alien.csv");
  testutil::write_file(alien_path,
                       w.records[0].id + ",0.5,0.5,0.5\nno-such-id,0.5,0.5,0.5\n");
  r = testutil::run_cli({"import-scores", "--dataset", w.dataset, "--vocab", w.vocab,
                         "--external", alien_path, "--modality", "ext2", "--out", outdir});
  REQUIRE(r.exit_code == 0);
  CHECK_THAT(r.err, ContainsSubstring("warning: skipped 1 rows with unknown ids"));
  CHECK_THAT(r.out, ContainsSubstring("imported 1 rows"));

  // Duplicate ids are an error, not a warning.
  const auto dup_path = w.dir.file("dup.csv");
  testutil::write_file(dup_path, w.records[0].id + ",0.5,0.5,0.5\n" + w.records[0].id +
                                     ",0.6,0.6,0.6\n");
  r = testutil::run_cli({"import-scores", "--vocab", w.vocab, "--external", dup_path,
                         "--modality", "ext3", "--out", outdir});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.err, ContainsSubstring("duplicate id: " + w.records[0].id));
}

TEST_CASE("a perfect imported matrix evaluates to micro F1 1.0000") {
  Workspace w(20, 3, 29);
  const auto outdir = w.dir.file("perfect");
  const auto vocab = latefuse::load_vocabulary(w.vocab);

  std::ostringstream csv;
  for (const auto& rec : w.records) {
    const auto bits = latefuse::encode_labels(rec.labels, vocab, true);
    csv << rec.id;
    for (auto b : bits) csv << ',' << (b ? "1" : "0");
    csv << "\n";
  }
  const auto truth_path = w.dir.file("truth.csv");
  testutil::write_file(truth_path, csv.str());

  REQUIRE(testutil::run_cli({"import-scores", "--vocab", w.vocab, "--external", truth_path,
                             "--modality", "perfect", "--out", outdir})
              .exit_code == 0);
  const auto r = testutil::run_cli({"eval", "--dataset", w.dataset, "--vocab", w.vocab, "--pred",
                                    (fs::path(outdir) / "pred_perfect.csv").string(), "--out",
                                    outdir});
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK_THAT(r.out, ContainsSubstring("perfect micro_f1=1.0000"));
  CHECK_THAT(testutil::read_file((fs::path(outdir) / "report.tsv").string()),
             ContainsSubstring("perfect\t1.0000"));
}

TEST_CASE("eval rejects matrices with ids missing from the dataset") {
  Workspace w(10, 2, 31);
  const auto outdir = w.dir.file("alien-eval");
  const auto alien_path = w.dir.file("alien.csv");
  testutil::write_file(alien_path, "ghost-id,0.5,0.5\n");
  REQUIRE(testutil::run_cli({"import-scores", "--vocab", w.vocab, "--external", alien_path,
                             "--modality", "ghost", "--out", outdir})
              .exit_code == 0);
  const auto r = testutil::run_cli({"eval", "--dataset", w.dataset, "--vocab", w.vocab, "--pred",
                                    (fs::path(outdir) / "pred_ghost.csv").string(), "--out",
                                    outdir});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.err, ContainsSubstring("unknown id: ghost-id (evaluation must be exact)"));
}

TEST_CASE("split selection requires n-train and supports empty splits") {
  Workspace w(12, 2, 37);
  const auto outdir = w.dir.file("split");
  REQUIRE(testutil::run_cli({"train-text", "--dataset", w.dataset, "--vocab", w.vocab,
                             "--modality", "title", "--epochs", "1", "--batch", "8",
                             "--embedding-dim", "4", "--filters", "4", "--hidden", "4",
                             "--kernel", "2", "--max-len", "10", "--out", outdir})
              .exit_code == 0);
  const auto model_path = (fs::path(outdir) / "model_title.bin").string();

  auto r = testutil::run_cli({"predict", "--dataset", w.dataset, "--vocab", w.vocab, "--model",
                              model_path, "--split", "test", "--out", outdir});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.err, ContainsSubstring("--n-train is required when --split is train or test"));

  // n-train equal to the corpus size leaves an empty test split.
  r = testutil::run_cli({"predict", "--dataset", w.dataset, "--vocab", w.vocab, "--model",
                         model_path, "--split", "test", "--n-train", "12", "--out", outdir});
  REQUIRE(r.exit_code == 0);
  CHECK_THAT(r.out, ContainsSubstring("wrote 0 rows"));
  const auto content = testutil::read_file((fs::path(outdir) / "pred_title.csv").string());
  CHECK_THAT(first_line(content), ContainsSubstring("#modality=title,"));
  CHECK(content.find('\n') == content.size() - 1);  // header only
}

TEST_CASE("fuse drops ids missing from any modality and warns") {
  Workspace w(8, 2, 41);
  const auto outdir = w.dir.file("drop");

  std::ostringstream full, partial;
  for (const auto& rec : w.records) full << rec.id << ",0.5,0.5\n";
  for (std::size_t i = 0; i + 1 < w.records.size(); ++i)
    partial << w.records[i].id << ",0.5,0.5\n";
  const auto full_path = w.dir.file("full.csv");
  const auto partial_path = w.dir.file("partial.csv");
  testutil::write_file(full_path, full.str());
  testutil::write_file(partial_path, partial.str());

  REQUIRE(testutil::run_cli({"import-scores", "--vocab", w.vocab, "--external", full_path,
                             "--modality", "a", "--out", outdir})
              .exit_code == 0);
  REQUIRE(testutil::run_cli({"import-scores", "--vocab", w.vocab, "--external", partial_path,
                             "--modality", "b", "--out", outdir})
              .exit_code == 0);

  const auto r = testutil::run_cli({"fuse", "--pred", (fs::path(outdir) / "pred_a.csv").string(),
                                    "--pred", (fs::path(outdir) / "pred_b.csv").string(),
                                    "--policy", "mean", "--out", outdir});
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK_THAT(r.err, ContainsSubstring("warning: dropped 1 ids absent from at least one modality"));
  CHECK_THAT(r.out, ContainsSubstring("wrote 7 fused rows"));

  const auto one = testutil::run_cli({"fuse", "--pred",
                                      (fs::path(outdir) / "pred_a.csv").string(), "--policy",
                                      "mean", "--out", outdir});
  CHECK(one.exit_code == 1);
  CHECK_THAT(one.err, ContainsSubstring("fuse needs at least two --pred matrices, got 1"));
}

TEST_CASE("gradcheck writes its report and the negative control fails") {
  testutil::TempDir dir("cli-gc");
  const auto outdir = dir.file("gc");
  auto r = testutil::run_cli({"gradcheck", "--gc-configs", "3", "--out", outdir});
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK_THAT(r.out, ContainsSubstring("gradient checks passed"));
  const auto text = testutil::read_file((fs::path(outdir) / "gradcheck.txt").string());
  for (const char* kind : {"embedding", "conv1d", "global_max_pool", "dense_relu",
                           "dense_sigmoid", "dense_tanh", "multilabel_xent"})
    CHECK_THAT(text, ContainsSubstring(std::string(kind) + " max_rel_err="));
  CHECK_THAT(text, ContainsSubstring("gradient checks passed"));

  r = testutil::run_cli({"gradcheck", "--gc-configs", "3", "--corrupt-kind", "conv1d", "--out",
                         outdir});
  CHECK(r.exit_code == 1);
  CHECK_THAT(r.out, ContainsSubstring("conv1d"));
  CHECK_THAT(r.out, ContainsSubstring("FAIL"));
  CHECK_THAT(r.out, ContainsSubstring("gradient checks FAILED"));
}
