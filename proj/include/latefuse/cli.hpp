#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "latefuse/eval.hpp"
#include "latefuse/fusion.hpp"
#include "latefuse/gradcheck.hpp"
#include "latefuse/hash.hpp"
#include "latefuse/label_space.hpp"
#include "latefuse/metrics.hpp"
#include "latefuse/model_file.hpp"
#include "latefuse/nn_engine.hpp"
#include "latefuse/prediction_matrix.hpp"
#include "latefuse/text_prep.hpp"

namespace latefuse {

// Everything a command can consume; a flat key=value config file seeds these
// fields and command-line flags override them.
struct RunConfig {
  std::string config_path;
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out = ".";

  std::string dataset;
  std::string embeddings;
  std::string stopwords;
  std::string vocab;
  std::string model;
  std::string external;
  std::string profile_path;
  std::vector<std::string> preds;

  std::string modality;
  std::string policy = "max";
  std::string split = "all";
  std::string apply_split = "all";
  std::size_t n_train = 0;

  std::size_t min_count = 1;
  std::size_t min_token_freq = 1;
  std::size_t epochs = 5;
  std::size_t batch = 64;
  double lr = 1e-3;
  double dropout = 0.5;
  std::size_t embedding_dim = 100;
  std::size_t kernel = 5;
  std::size_t filters = 200;
  std::size_t hidden = 170;
  std::size_t max_len = 0;  // 0 keeps the modality profile's default
  bool freeze_embeddings = false;

  double alpha = 1.0;
  bool intercept = false;
  double tau = 0.5;
  std::size_t top_k = 15;
  double temperature = 0.0;

  std::string corrupt_kind;  // gradcheck negative-control hook
  std::size_t gc_configs = 20;
};

namespace cli_detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not an unsigned integer: " + value);
  }
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not a number: " + value);
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::runtime_error("config key " + key + ": expected true/false: " + value);
}

inline std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    const std::string part =
        trim_copy(value.substr(start, comma == std::string::npos ? comma : comma - start));
    if (!part.empty()) parts.push_back(part);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

// Flat `key = value` lines; '#' starts a comment; blank lines ignored.
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash_at = line.find('#');
    if (hash_at != std::string::npos) line.resize(hash_at);
    const std::string trimmed = trim_copy(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key = value");
    const std::string key = trim_copy(trimmed.substr(0, eq));
    const std::string value = trim_copy(trimmed.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
    if (!entries.emplace(key, value).second)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate key " + key);
  }
  return entries;
}

inline void apply_config_entries(const std::map<std::string, std::string>& entries,
                                 RunConfig& cfg) {
  for (const auto& [key, value] : entries) {
    if (key == "seed") {
      cfg.seed = parse_u64(key, value);
      cfg.seed_set = true;
    } else if (key == "out") cfg.out = value;
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "embeddings") cfg.embeddings = value;
    else if (key == "stopwords") cfg.stopwords = value;
    else if (key == "vocab") cfg.vocab = value;
    else if (key == "model") cfg.model = value;
    else if (key == "external") cfg.external = value;
    else if (key == "profile") cfg.profile_path = value;
    else if (key == "pred") cfg.preds = split_commas(value);
    else if (key == "modality") cfg.modality = value;
    else if (key == "policy") cfg.policy = value;
    else if (key == "split") cfg.split = value;
    else if (key == "apply_split") cfg.apply_split = value;
    else if (key == "n_train") cfg.n_train = parse_u64(key, value);
    else if (key == "min_count") cfg.min_count = parse_u64(key, value);
    else if (key == "min_token_freq") cfg.min_token_freq = parse_u64(key, value);
    else if (key == "epochs") cfg.epochs = parse_u64(key, value);
    else if (key == "batch") cfg.batch = parse_u64(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "dropout") cfg.dropout = parse_double(key, value);
    else if (key == "embedding_dim") cfg.embedding_dim = parse_u64(key, value);
    else if (key == "kernel") cfg.kernel = parse_u64(key, value);
    else if (key == "filters") cfg.filters = parse_u64(key, value);
    else if (key == "hidden") cfg.hidden = parse_u64(key, value);
    else if (key == "max_len") cfg.max_len = parse_u64(key, value);
    else if (key == "freeze_embeddings") cfg.freeze_embeddings = parse_bool(key, value);
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "intercept") cfg.intercept = parse_bool(key, value);
    else if (key == "tau") cfg.tau = parse_double(key, value);
    else if (key == "k") cfg.top_k = parse_u64(key, value);
    else if (key == "temperature") cfg.temperature = parse_double(key, value);
    else if (key == "corrupt_kind") cfg.corrupt_kind = value;
    else if (key == "gc_configs") cfg.gc_configs = parse_u64(key, value);
    else throw std::runtime_error("unknown config key: " + key);
  }
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// The fully resolved configuration is echoed into the output directory so a
// run can be reproduced from its artifacts alone. No timestamps: reruns must
// be byte-identical.
inline void write_run_config(const RunConfig& cfg, const std::string& command,
                             std::uint64_t resolved_seed) {
  const std::filesystem::path path = std::filesystem::path(cfg.out) / "run_config.txt";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "alpha = " << fmt_double(cfg.alpha) << "\n"
      << "apply_split = " << cfg.apply_split << "\n"
      << "batch = " << cfg.batch << "\n"
      << "command = " << command << "\n"
      << "config = " << cfg.config_path << "\n"
      << "corrupt_kind = " << cfg.corrupt_kind << "\n"
      << "dataset = " << cfg.dataset << "\n"
      << "dropout = " << fmt_double(cfg.dropout) << "\n"
      << "embedding_dim = " << cfg.embedding_dim << "\n"
      << "embeddings = " << cfg.embeddings << "\n"
      << "epochs = " << cfg.epochs << "\n"
      << "external = " << cfg.external << "\n"
      << "filters = " << cfg.filters << "\n"
      << "freeze_embeddings = " << (cfg.freeze_embeddings ? "true" : "false") << "\n"
      << "gc_configs = " << cfg.gc_configs << "\n"
      << "hidden = " << cfg.hidden << "\n"
      << "intercept = " << (cfg.intercept ? "true" : "false") << "\n"
      << "k = " << cfg.top_k << "\n"
      << "kernel = " << cfg.kernel << "\n"
      << "lr = " << fmt_double(cfg.lr) << "\n"
      << "max_len = " << cfg.max_len << "\n"
      << "min_count = " << cfg.min_count << "\n"
      << "min_token_freq = " << cfg.min_token_freq << "\n"
      << "modality = " << cfg.modality << "\n"
      << "model = " << cfg.model << "\n"
      << "n_train = " << cfg.n_train << "\n"
      << "out = " << cfg.out << "\n"
      << "policy = " << cfg.policy << "\n"
      << "pred = " << join(cfg.preds, ",") << "\n"
      << "profile = " << cfg.profile_path << "\n"
      << "seed = " << resolved_seed << "\n"
      << "split = " << cfg.split << "\n"
      << "stopwords = " << cfg.stopwords << "\n"
      << "tau = " << fmt_double(cfg.tau) << "\n"
      << "temperature = " << fmt_double(cfg.temperature) << "\n";
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("missing required option: " + what);
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out) / name;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline const std::string& modality_text(const ProductRecord& r, const std::string& modality) {
  if (modality == "title") return r.title;
  if (modality == "description") return r.description;
  throw std::runtime_error("unknown modality: " + modality + " (expected title or description)");
}

struct SplitSets {
  std::unordered_set<std::string> train;
  std::unordered_set<std::string> test;
};

inline void check_split_name(const std::string& split) {
  if (split != "all" && split != "train" && split != "test")
    throw std::runtime_error("unknown split: " + split + " (expected all, train or test)");
}

// Prefix split over the filtered record order: the first n_train records are
// the training part, the rest the test part.
inline SplitSets split_sets(const std::vector<ProductRecord>& filtered, std::size_t n_train) {
  if (n_train > filtered.size())
    throw std::runtime_error("n_train " + std::to_string(n_train) + " exceeds dataset size " +
                             std::to_string(filtered.size()));
  SplitSets sets;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    if (i < n_train) sets.train.insert(filtered[i].id);
    else sets.test.insert(filtered[i].id);
  }
  return sets;
}

inline std::vector<ProductRecord> select_split(const std::vector<ProductRecord>& filtered,
                                               const std::string& split, std::size_t n_train) {
  check_split_name(split);
  if (split == "all") return filtered;
  if (n_train == 0)
    throw std::runtime_error("--n-train is required when --split is train or test");
  auto [train, test] = split_train_test(filtered, n_train);
  return split == "train" ? train : test;
}

inline StopwordSet load_stopwords_if_needed(const RunConfig& cfg, const PrepProfile& profile,
                                            std::ostream& err) {
  if (!profile.remove_stopwords) return {};
  if (cfg.stopwords.empty()) {
    err << "warning: profile removes stop words but no --stopwords file was given; "
           "removal is a no-op\n";
    return {};
  }
  return load_stopwords(cfg.stopwords);
}

inline std::vector<std::vector<std::size_t>> encode_corpus(
    const std::vector<ProductRecord>& records, const std::string& modality,
    const PrepProfile& profile, const StopwordSet& stopwords, const TokenVocab& token_vocab,
    std::size_t max_len) {
  std::vector<std::vector<std::size_t>> sequences;
  sequences.reserve(records.size());
  for (const auto& r : records)
    sequences.push_back(
        encode_sequence(clean_text(modality_text(r, modality), profile, stopwords), token_vocab,
                        max_len));
  return sequences;
}

inline std::vector<MultiHotVector> encode_corpus_targets(
    const std::vector<ProductRecord>& records, const LabelVocabulary& vocab) {
  std::vector<MultiHotVector> targets;
  targets.reserve(records.size());
  for (const auto& r : records) targets.push_back(encode_labels(r.labels, vocab));
  return targets;
}

inline void check_hash(std::uint64_t artifact, std::uint64_t vocab, const std::string& what) {
  if (artifact != vocab)
    throw std::runtime_error("vocabulary hash mismatch: " + what + " carries " + hex16(artifact) +
                             " but the vocabulary is " + hex16(vocab) +
                             " (stale artifacts are never silently recomputed)");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_vocab(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  require(!cfg.dataset.empty(), "--dataset");
  const std::vector<ProductRecord> records = load_dataset(cfg.dataset);
  const LabelVocabulary vocab = build_vocabulary(records, cfg.min_count);
  const std::vector<ProductRecord> filtered = filter_records(records, vocab);
  save_vocabulary(out_path(cfg, "labels.vocab").string(), vocab);
  out << "kept " << vocab.size() << " labels (min_count=" << cfg.min_count << "); dropped "
      << records.size() - filtered.size() << " of " << records.size() << " products\n";
  out << "labels hash " << hex16(vocab.hash()) << "\n";
  return 0;
}

inline int cmd_train_text(const RunConfig& cfg, std::uint64_t seed, std::ostream& out,
                          std::ostream& err) {
  require(!cfg.dataset.empty(), "--dataset");
  require(!cfg.vocab.empty(), "--vocab");
  require(!cfg.modality.empty(), "--modality");
  if (cfg.modality != "title" && cfg.modality != "description")
    throw std::runtime_error("unknown modality: " + cfg.modality +
                             " (expected title or description)");

  const LabelVocabulary vocab = load_vocabulary(cfg.vocab);
  const std::vector<ProductRecord> filtered =
      filter_records(load_dataset(cfg.dataset), vocab);
  const std::vector<ProductRecord> train =
      cfg.n_train > 0 ? split_train_test(filtered, cfg.n_train).first : filtered;
  if (train.empty()) throw std::runtime_error("empty training split");

  PrepProfile profile = cfg.modality == "title" ? title_profile() : description_profile();
  if (cfg.max_len > 0) profile.max_len = cfg.max_len;
  const StopwordSet stopwords = load_stopwords_if_needed(cfg, profile, err);

  std::vector<std::vector<std::string>> docs;
  docs.reserve(train.size());
  for (const auto& r : train)
    docs.push_back(clean_text(modality_text(r, cfg.modality), profile, stopwords));
  const TokenVocab token_vocab = build_token_vocab(docs, cfg.min_token_freq);

  PretrainedVectors pretrained;
  if (!cfg.embeddings.empty()) {
    pretrained = load_pretrained_vectors(cfg.embeddings, cfg.embedding_dim);
    if (pretrained.malformed_lines > 0)
      err << "warning: skipped " << pretrained.malformed_lines
          << " malformed embedding lines\n";
  }
  char cov[16];
  std::snprintf(cov, sizeof(cov), "%.4f", coverage_ratio(token_vocab, pretrained));
  out << "embedding coverage " << cov << " over " << token_vocab.real_token_count()
      << " tokens\n";

  TextCnnModel model = init_text_cnn(
      token_vocab, init_embedding_table(token_vocab, pretrained, cfg.embedding_dim, seed),
      text_cnn_layers(cfg.kernel, cfg.filters, cfg.hidden, cfg.dropout, vocab.size()),
      profile.max_len, seed);
  model.modality = cfg.modality;
  model.labels_hash = vocab.hash();
  model.profile = profile;
  model.freeze_embeddings = cfg.freeze_embeddings;

  std::vector<std::vector<std::size_t>> sequences;
  sequences.reserve(train.size());
  for (const auto& doc : docs)
    sequences.push_back(encode_sequence(doc, token_vocab, profile.max_len));
  const std::vector<MultiHotVector> targets = encode_corpus_targets(train, vocab);

  const std::vector<EpochLog> log =
      train_text_cnn(model, sequences, targets, TrainConfig{cfg.lr, cfg.batch, cfg.epochs, seed});

  std::ostringstream log_text;
  log_text << "# labels_hash=" << hex16(vocab.hash()) << "\n";
  log_text << "epoch\tloss\ttrain_micro_f1\n";
  for (const auto& entry : log) {
    char line[96];
    std::snprintf(line, sizeof(line), "%zu\t%.6f\t%.6f\n", entry.epoch, entry.loss,
                  entry.train_micro_f1);
    log_text << line;
    out << "epoch " << entry.epoch << " loss " << fmt_double(entry.loss) << " train_micro_f1 "
        << format_f1(entry.train_micro_f1) << "\n";
  }
  write_text_file(out_path(cfg, "train_log_" + cfg.modality + ".tsv"), log_text.str());
  save_text_cnn(out_path(cfg, "model_" + cfg.modality + ".bin").string(), model);
  save_token_vocab(out_path(cfg, "tokens_" + cfg.modality + ".vocab").string(),
                   model.token_vocab);
  return 0;
}

inline int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require(!cfg.model.empty(), "--model");
  require(!cfg.dataset.empty(), "--dataset");
  require(!cfg.vocab.empty(), "--vocab");
  const TextCnnModel model = load_text_cnn(cfg.model);
  const LabelVocabulary vocab = load_vocabulary(cfg.vocab);
  check_hash(model.labels_hash, vocab.hash(), "model " + cfg.model);

  const std::vector<ProductRecord> records =
      select_split(filter_records(load_dataset(cfg.dataset), vocab), cfg.split, cfg.n_train);
  const StopwordSet stopwords = load_stopwords_if_needed(cfg, model.profile, err);

  PredictionMatrix matrix;
  matrix.modality = model.modality;
  matrix.labels_hash = vocab.hash();
  matrix.label_count = vocab.size();
  for (const auto& r : records) matrix.ids.push_back(r.id);
  matrix.rows = text_cnn_predict(
      model, encode_corpus(records, model.modality, model.profile, stopwords, model.token_vocab,
                           model.max_len));
  const std::string path = out_path(cfg, "pred_" + model.modality + ".csv").string();
  save_prediction_matrix(path, matrix);
  out << "wrote " << matrix.size() << " rows to " << path << "\n";
  return 0;
}

inline int cmd_import_scores(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require(!cfg.external.empty(), "--external");
  require(!cfg.vocab.empty(), "--vocab");
  require(!cfg.modality.empty(), "--modality");
  const LabelVocabulary vocab = load_vocabulary(cfg.vocab);

  std::unordered_set<std::string> known;
  bool validate_ids = false;
  if (!cfg.dataset.empty()) {
    validate_ids = true;
    for (const auto& r : filter_records(load_dataset(cfg.dataset), vocab)) known.insert(r.id);
  }

  std::ifstream in(cfg.external);
  if (!in) throw std::runtime_error("cannot open: " + cfg.external);
  PredictionMatrix matrix;
  matrix.modality = cfg.modality;
  matrix.labels_hash = vocab.hash();
  matrix.label_count = vocab.size();

  std::string line;
  std::size_t line_no = 0, clamped = 0, skipped = 0;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != vocab.size() + 1)
      throw std::runtime_error(cfg.external + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(vocab.size() + 1) + " columns, got " +
                               std::to_string(fields.size()));
    if (fields[0].empty())
      throw std::runtime_error(cfg.external + ":" + std::to_string(line_no) + ": empty id");
    if (!seen.insert(fields[0]).second)
      throw std::runtime_error(cfg.external + ":" + std::to_string(line_no) +
                               ": duplicate id: " + fields[0]);
    if (validate_ids && !known.count(fields[0])) {
      ++skipped;
      continue;
    }
    std::vector<double> row(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      double v;
      try {
        std::size_t used = 0;
        v = std::stod(fields[i + 1], &used);
        if (used != fields[i + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw std::runtime_error(cfg.external + ":" + std::to_string(line_no) +
                                 ": malformed score: " + fields[i + 1]);
      }
      if (!std::isfinite(v))
        throw std::runtime_error(cfg.external + ":" + std::to_string(line_no) +
                                 ": non-finite score");
      if (v < 0.0 || v > 1.0) {
        v = v < 0.0 ? 0.0 : 1.0;
        ++clamped;
      }
      row[i] = v;
    }
    matrix.ids.push_back(fields[0]);
    matrix.rows.push_back(std::move(row));
  }
  if (clamped > 0) err << "warning: clamped " << clamped << " scores into [0,1]\n";
  if (skipped > 0) err << "warning: skipped " << skipped << " rows with unknown ids\n";

  const std::string path = out_path(cfg, "pred_" + cfg.modality + ".csv").string();
  save_prediction_matrix(path, matrix);
  out << "imported " << matrix.size() << " rows to " << path << "\n";
  return 0;
}

// Skill profile file: `label<TAB>skill` lines; a `*<TAB>p` line sets the
// default for every class not named explicitly.
inline std::vector<double> parse_skill_profile(const std::string& path,
                                               const LabelVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open skill profile: " + path);
  double default_skill = -1.0;
  std::map<std::string, double> explicit_skills;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected label<TAB>skill");
    const std::string label = trim_copy(line.substr(0, tab));
    const double skill = parse_double("skill", trim_copy(line.substr(tab + 1)));
    if (label == "*") {
      default_skill = skill;
    } else {
      if (!vocab.contains(label))
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": label not in vocabulary: " + label);
      explicit_skills[label] = skill;
    }
  }
  std::vector<double> skills(vocab.size());
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    const auto it = explicit_skills.find(vocab.labels()[c]);
    if (it != explicit_skills.end()) skills[c] = it->second;
    else if (default_skill >= 0.0) skills[c] = default_skill;
    else
      throw std::runtime_error(path + ": no skill for label " + vocab.labels()[c] +
                               " and no `*` default line");
  }
  return skills;
}

inline int cmd_synth(const RunConfig& cfg, std::uint64_t seed, std::ostream& out, std::ostream&) {
  require(!cfg.dataset.empty(), "--dataset");
  require(!cfg.vocab.empty(), "--vocab");
  require(!cfg.profile_path.empty(), "--profile");
  require(!cfg.modality.empty(), "--modality");
  const LabelVocabulary vocab = load_vocabulary(cfg.vocab);
  const std::vector<ProductRecord> records =
      select_split(filter_records(load_dataset(cfg.dataset), vocab), cfg.split, cfg.n_train);

  SkillProfile profile;
  profile.modality = cfg.modality;
  profile.skill = parse_skill_profile(cfg.profile_path, vocab);
  profile.temperature = cfg.temperature;

  PredictionMatrix matrix;
  matrix.modality = cfg.modality;
  matrix.labels_hash = vocab.hash();
  matrix.label_count = vocab.size();
  matrix.rows = generate_synthetic_modality(encode_corpus_targets(records, vocab), profile, seed);
  for (const auto& r : records) matrix.ids.push_back(r.id);

  const std::string path = out_path(cfg, "pred_" + cfg.modality + ".csv").string();
  save_prediction_matrix(path, matrix);
  out << "wrote " << matrix.size() << " rows to " << path << "\n";
  return 0;
}

inline int cmd_fuse(const RunConfig& cfg, std::uint64_t seed, std::ostream& out,
                    std::ostream& err) {
  if (cfg.preds.size() < 2)
    throw std::runtime_error("fuse needs at least two --pred matrices, got " +
                             std::to_string(cfg.preds.size()));
  if (cfg.policy != "max" && cfg.policy != "mean" && cfg.policy != "ridge" &&
      cfg.policy != "mlp")
    throw std::runtime_error("unknown policy: " + cfg.policy +
                             " (expected max, mean, ridge or mlp)");
  const bool trainable = cfg.policy == "ridge" || cfg.policy == "mlp";

  std::vector<PredictionMatrix> matrices;
  for (const auto& path : cfg.preds) matrices.push_back(load_prediction_matrix(path));
  const AlignmentResult aligned = align_matrices(matrices);
  if (!aligned.dropped_ids.empty())
    err << "warning: dropped " << aligned.dropped_ids.size()
        << " ids absent from at least one modality\n";

  // Split membership (train part for trainable policies, apply subset).
  check_split_name(cfg.apply_split);
  std::unordered_map<std::string, MultiHotVector> truth;
  SplitSets sets;
  const bool need_dataset = trainable || cfg.apply_split != "all";
  if (need_dataset) {
    require(!cfg.dataset.empty(), "--dataset");
    require(!cfg.vocab.empty(), "--vocab");
  }
  if (!cfg.vocab.empty()) {
    const LabelVocabulary vocab = load_vocabulary(cfg.vocab);
    check_hash(aligned.labels_hash, vocab.hash(), "prediction matrices");
    if (!cfg.dataset.empty()) {
      const std::vector<ProductRecord> filtered =
          filter_records(load_dataset(cfg.dataset), vocab);
      sets = split_sets(filtered, cfg.n_train);
      for (const auto& r : filtered) truth.emplace(r.id, encode_labels(r.labels, vocab));
    }
  }

  std::vector<std::size_t> apply_idx;
  for (std::size_t i = 0; i < aligned.ids.size(); ++i) {
    if (cfg.apply_split == "all" || (cfg.apply_split == "train" && sets.train.count(aligned.ids[i])) ||
        (cfg.apply_split == "test" && sets.test.count(aligned.ids[i])))
      apply_idx.push_back(i);
  }
  if (apply_idx.empty()) throw std::runtime_error("fuse: no rows in the requested apply split");

  auto subset = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::vector<std::vector<double>>> stacks(aligned.rows.size());
    for (std::size_t k = 0; k < aligned.rows.size(); ++k) {
      stacks[k].reserve(idx.size());
      for (std::size_t i : idx) stacks[k].push_back(aligned.rows[k][i]);
    }
    return stacks;
  };
  const auto apply_stacks = subset(apply_idx);

  PredictionMatrix fused;
  fused.modality = "fused_" + cfg.policy;
  fused.labels_hash = aligned.labels_hash;
  fused.label_count = aligned.label_count;
  for (std::size_t i : apply_idx) fused.ids.push_back(aligned.ids[i]);

  std::vector<std::string> notes;
  if (cfg.policy == "max") {
    fused.rows = fuse_max(apply_stacks);
    notes.push_back("policy=max");
  } else if (cfg.policy == "mean") {
    fused.rows = fuse_mean(apply_stacks);
    notes.push_back("policy=mean");
  } else {
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < aligned.ids.size(); ++i)
      if (sets.train.count(aligned.ids[i])) train_idx.push_back(i);
    if (train_idx.empty())
      throw std::runtime_error("fuse: trainable policy " + cfg.policy +
                               " has no training rows (set --n-train)");
    std::vector<MultiHotVector> targets;
    targets.reserve(train_idx.size());
    for (std::size_t i : train_idx) targets.push_back(truth.at(aligned.ids[i]));
    const auto train_stacks = subset(train_idx);

    if (cfg.policy == "ridge") {
      RidgeModel model = train_ridge(train_stacks, targets, RidgeOptions{cfg.alpha, cfg.intercept});
      model.labels_hash = aligned.labels_hash;
      model.modalities = aligned.modalities;
      save_ridge(out_path(cfg, "fusion_ridge.bin").string(), model);
      fused.rows = apply_ridge(model, apply_stacks);
      notes.push_back("policy=ridge,alpha=" + fmt_double(cfg.alpha) +
                      ",intercept=" + (cfg.intercept ? std::string("true") : std::string("false")));
    } else {
      PolicyNetworkModel model = train_policy_network(
          train_stacks, targets, TrainConfig{cfg.lr, cfg.batch, cfg.epochs, seed});
      model.labels_hash = aligned.labels_hash;
      model.modalities = aligned.modalities;
      save_policy_network(out_path(cfg, "fusion_mlp.bin").string(), model);
      fused.rows = apply_policy_network(model, apply_stacks);
      std::string acts;
      for (std::size_t i = 0; i < model.mlp.layers.size(); ++i) {
        if (i) acts += "/";
        acts += activation_name(model.mlp.layers[i].activation);
      }
      notes.push_back("policy=mlp,arity=" + std::to_string(aligned.modalities.size()) +
                      ",activations=" + acts + ",epochs=" + std::to_string(cfg.epochs) +
                      ",batch=" + std::to_string(cfg.batch) + ",lr=" + fmt_double(cfg.lr) +
                      ",seed=" + std::to_string(seed));
    }
  }
  notes.push_back("inputs=" + join(aligned.modalities, "+"));

  const std::string path = out_path(cfg, "fused_" + cfg.policy + ".csv").string();
  save_prediction_matrix(path, fused, notes);
  out << "wrote " << fused.size() << " fused rows to " << path << "\n";
  return 0;
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.preds.empty()) throw std::runtime_error("eval needs at least one --pred matrix");
  require(!cfg.dataset.empty(), "--dataset");
  require(!cfg.vocab.empty(), "--vocab");
  check_split_name(cfg.split);
  const LabelVocabulary vocab = load_vocabulary(cfg.vocab);
  const std::vector<ProductRecord> filtered = filter_records(load_dataset(cfg.dataset), vocab);
  if (cfg.split != "all" && cfg.n_train == 0)
    throw std::runtime_error("--n-train is required when --split is train or test");
  const SplitSets sets = split_sets(filtered, cfg.n_train);

  std::unordered_map<std::string, MultiHotVector> truth;
  for (const auto& r : filtered) truth.emplace(r.id, encode_labels(r.labels, vocab));
  auto in_split = [&](const std::string& id) {
    if (cfg.split == "all") return true;
    return cfg.split == "train" ? sets.train.count(id) > 0 : sets.test.count(id) > 0;
  };

  std::vector<EvalRow> report_rows;
  for (const auto& path : cfg.preds) {
    const PredictionMatrix matrix = load_prediction_matrix(path);
    check_hash(matrix.labels_hash, vocab.hash(), "matrix " + path);
    if (matrix.label_count != vocab.size())
      throw std::runtime_error(path + ": label count mismatch with the vocabulary");

    std::vector<std::vector<double>> kept_rows;
    std::vector<MultiHotVector> kept_truth;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < matrix.ids.size(); ++i) {
      const auto it = truth.find(matrix.ids[i]);
      if (it == truth.end())
        throw std::runtime_error(path + ": unknown id: " + matrix.ids[i] +
                                 " (evaluation must be exact)");
      if (!in_split(matrix.ids[i])) {
        ++skipped;
        continue;
      }
      kept_rows.push_back(matrix.rows[i]);
      kept_truth.push_back(it->second);
    }
    if (skipped > 0)
      out << matrix.modality << ": skipped " << skipped << " rows outside split " << cfg.split
          << "\n";
    if (kept_rows.empty())
      throw std::runtime_error(path + ": no rows fall inside split " + cfg.split);

    const std::vector<MultiHotVector> bits = threshold_predictions(kept_rows, cfg.tau);
    const MicroCounts counts = micro_counts(bits, kept_truth);
    if (counts.degenerate())
      err << "warning: " << matrix.modality
          << ": no positives anywhere; micro-F1 is 1.0 by definition\n";
    const std::vector<ClassCounts> per_class =
        per_class_counts(bits, kept_truth, vocab.size());
    report_rows.push_back({matrix.modality, counts.f1(), counts,
                           top_misclassified(per_class, vocab.labels(), cfg.top_k)});
  }

  write_text_file(out_path(cfg, "report.tsv"),
                  emit_report(report_rows, "tsv", cfg.tau, vocab.hash()));
  write_text_file(out_path(cfg, "report.md"),
                  emit_report(report_rows, "markdown", cfg.tau, vocab.hash()));
  for (const auto& row : report_rows)
    out << row.policy << " micro_f1=" << format_f1(row.micro_f1) << "\n";
  return 0;
}

inline int cmd_gradcheck(const RunConfig& cfg, std::uint64_t seed, std::ostream& out,
                         std::ostream&) {
  GradCheckOptions options;
  options.seed = seed;
  options.configs = cfg.gc_configs;
  options.corrupt_kind = cfg.corrupt_kind;
  const std::vector<GradCheckResult> results = run_gradient_checks(options);
  std::ostringstream text;
  bool all_pass = true;
  for (const auto& r : results) {
    char line[96];
    std::snprintf(line, sizeof(line), "%s max_rel_err=%.3e %s\n", r.kind.c_str(),
                  r.max_rel_error, r.pass ? "pass" : "FAIL");
    text << line;
    all_pass = all_pass && r.pass;
  }
  text << (all_pass ? "gradient checks passed\n" : "gradient checks FAILED\n");
  write_text_file(out_path(cfg, "gradcheck.txt"), text.str());
  out << text.str();
  return all_pass ? 0 : 1;
}

}  // namespace cli_detail

// args excludes the program name. Returns the process exit code; errors are
// reported on err, never thrown.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    // The config file is applied first so that explicit flags override it.
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg.config_path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0)
        cfg.config_path = args[i].substr(std::string("--config=").size());
    }
    if (!cfg.config_path.empty())
      cli_detail::apply_config_entries(cli_detail::parse_config_file(cfg.config_path), cfg);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"late-fusion multi-label classification toolkit"};
  app.require_subcommand(1);
  std::string config_dummy;
  app.add_option("--config", config_dummy, "flat key = value config file; flags override it");
  auto* seed_opt = app.add_option("--seed", cfg.seed, "master seed for all random streams");
  app.add_option("--out", cfg.out, "output directory");

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--dataset", cfg.dataset, "JSONL product dataset");
    sub->add_option("--vocab", cfg.vocab, "label vocabulary file");
  };
  auto add_split = [&](CLI::App* sub) {
    sub->add_option("--split", cfg.split, "record subset: all, train or test");
    sub->add_option("--n-train", cfg.n_train, "size of the training prefix");
  };

  CLI::App* vocab_cmd = app.add_subcommand("vocab", "build the label vocabulary");
  vocab_cmd->add_option("--dataset", cfg.dataset, "JSONL product dataset");
  vocab_cmd->add_option("--min-count", cfg.min_count, "drop labels with fewer products");

  CLI::App* train_cmd = app.add_subcommand("train-text", "train a per-modality text CNN");
  add_data(train_cmd);
  train_cmd->add_option("--modality", cfg.modality, "title or description");
  train_cmd->add_option("--stopwords", cfg.stopwords, "stop word list (one per line)");
  train_cmd->add_option("--embeddings", cfg.embeddings, "pretrained word vectors");
  train_cmd->add_option("--epochs", cfg.epochs, "training epochs");
  train_cmd->add_option("--batch", cfg.batch, "batch size");
  train_cmd->add_option("--lr", cfg.lr, "Adam learning rate");
  train_cmd->add_option("--dropout", cfg.dropout, "dropout rate before the output layer");
  train_cmd->add_option("--embedding-dim", cfg.embedding_dim, "embedding width");
  train_cmd->add_option("--kernel", cfg.kernel, "convolution kernel width");
  train_cmd->add_option("--filters", cfg.filters, "convolution filter count");
  train_cmd->add_option("--hidden", cfg.hidden, "hidden dense width");
  train_cmd->add_option("--max-len", cfg.max_len, "override the profile's max length");
  train_cmd->add_option("--min-token-freq", cfg.min_token_freq,
                        "minimum token frequency for the token vocabulary");
  train_cmd->add_flag("--freeze-embeddings", cfg.freeze_embeddings,
                      "keep the embedding table fixed");
  train_cmd->add_option("--n-train", cfg.n_train, "train on the first N filtered records");

  CLI::App* predict_cmd = app.add_subcommand("predict", "score a split with a trained model");
  add_data(predict_cmd);
  predict_cmd->add_option("--model", cfg.model, "trained text model file");
  predict_cmd->add_option("--stopwords", cfg.stopwords, "stop word list (one per line)");
  add_split(predict_cmd);

  CLI::App* import_cmd =
      app.add_subcommand("import-scores", "re-emit external scores as a canonical matrix");
  add_data(import_cmd);
  import_cmd->add_option("--external", cfg.external, "external id,score,... CSV");
  import_cmd->add_option("--modality", cfg.modality, "modality name for the output");

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic modality");
  add_data(synth_cmd);
  synth_cmd->add_option("--profile", cfg.profile_path, "label<TAB>skill profile file");
  synth_cmd->add_option("--modality", cfg.modality, "modality name for the output");
  synth_cmd->add_option("--temperature", cfg.temperature, "score spread in [0,1]");
  add_split(synth_cmd);

  CLI::App* fuse_cmd = app.add_subcommand("fuse", "fuse prediction matrices");
  add_data(fuse_cmd);
  fuse_cmd->add_option("--pred", cfg.preds, "input matrix file (repeat per modality)");
  fuse_cmd->add_option("--policy", cfg.policy, "max, mean, ridge or mlp");
  fuse_cmd->add_option("--alpha", cfg.alpha, "ridge regularization strength");
  fuse_cmd->add_flag("--intercept", cfg.intercept, "add a non-regularized ridge intercept");
  fuse_cmd->add_option("--epochs", cfg.epochs, "policy network epochs");
  fuse_cmd->add_option("--batch", cfg.batch, "policy network batch size");
  fuse_cmd->add_option("--lr", cfg.lr, "policy network learning rate");
  fuse_cmd->add_option("--n-train", cfg.n_train, "size of the training prefix");
  fuse_cmd->add_option("--apply-split", cfg.apply_split,
                       "emit fused rows for: all, train or test");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate matrices against the truth");
  add_data(eval_cmd);
  eval_cmd->add_option("--pred", cfg.preds, "matrix file to evaluate (repeatable)");
  eval_cmd->add_option("--tau", cfg.tau, "decision threshold in (0,1)");
  eval_cmd->add_option("--k", cfg.top_k, "rows in the top-misclassified table");
  add_split(eval_cmd);

  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck_cmd->add_option("--gc-configs", cfg.gc_configs, "random configurations per kind");
  gradcheck_cmd->add_option("--corrupt-kind", cfg.corrupt_kind,
                            "negative control: corrupt this kind's analytic gradient");

  for (CLI::App* sub : {vocab_cmd, train_cmd, predict_cmd, import_cmd, synth_cmd, fuse_cmd,
                        eval_cmd, gradcheck_cmd})
    sub->fallthrough();

  std::vector<const char*> argv;
  argv.push_back("latefuse");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  cfg.seed_set = cfg.seed_set || seed_opt->count() > 0;

  try {
    std::filesystem::create_directories(cfg.out);
    const std::string command = app.get_subcommands().front()->get_name();
    const std::uint64_t seed =
        cfg.seed_set ? cfg.seed : (command == "gradcheck" ? std::uint64_t{42} : cfg.seed);
    cli_detail::write_run_config(cfg, command, seed);
    if (command == "vocab") return cli_detail::cmd_vocab(cfg, out, err);
    if (command == "train-text") return cli_detail::cmd_train_text(cfg, seed, out, err);
    if (command == "predict") return cli_detail::cmd_predict(cfg, out, err);
    if (command == "import-scores") return cli_detail::cmd_import_scores(cfg, out, err);
    if (command == "synth") return cli_detail::cmd_synth(cfg, seed, out, err);
    if (command == "fuse") return cli_detail::cmd_fuse(cfg, seed, out, err);
    if (command == "eval") return cli_detail::cmd_eval(cfg, out, err);
    if (command == "gradcheck") return cli_detail::cmd_gradcheck(cfg, seed, out, err);
    err << "error: unknown command: " << command << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace latefuse
