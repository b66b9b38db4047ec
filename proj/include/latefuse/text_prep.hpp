#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "latefuse/rng.hpp"
#include "latefuse/tensor.hpp"

namespace latefuse {

struct PrepProfile {
  bool remove_stopwords = false;
  std::size_t max_len = 0;       // tokens kept per document
  bool strip_digits = true;
  bool strip_punct = true;
  std::size_t max_word_len = 30;  // longer tokens are dropped outright
};

inline PrepProfile description_profile() {
  return PrepProfile{true, 300, true, true, 30};
}

// Titles keep their stop words; they are short and every word carries signal.
inline PrepProfile title_profile() {
  return PrepProfile{false, 57, true, true, 30};
}

using StopwordSet = std::unordered_set<std::string>;

inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword file: " + path);
  StopwordSet words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

// lowercase -> strip punctuation/digits to spaces -> whitespace split ->
// drop stop words -> drop over-long tokens -> truncate to max_len.
// Idempotent: cleaning the re-joined output changes nothing.
inline std::vector<std::string> clean_text(std::string_view text, const PrepProfile& profile,
                                           const StopwordSet& stopwords = {}) {
  std::string buf;
  buf.reserve(text.size());
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (c < 128) {
      c = static_cast<unsigned char>(std::tolower(c));
      if (profile.strip_punct && std::ispunct(c)) c = ' ';
      if (profile.strip_digits && std::isdigit(c)) c = ' ';
      if (std::isspace(c)) c = ' ';
    }
    buf.push_back(static_cast<char>(c));
  }
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < buf.size() && tokens.size() < profile.max_len) {
    while (i < buf.size() && buf[i] == ' ') ++i;
    std::size_t start = i;
    while (i < buf.size() && buf[i] != ' ') ++i;
    if (i == start) break;
    std::string tok = buf.substr(start, i - start);
    if (profile.remove_stopwords && stopwords.count(tok)) continue;
    if (tok.size() > profile.max_word_len) continue;
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

// Token index space. 0 and 1 are reserved; real tokens start at 2 and are
// assigned in lexicographic order.
struct TokenVocab {
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  std::vector<std::string> tokens{"<pad>", "<unk>"};
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return tokens.size(); }
  std::size_t real_token_count() const { return tokens.size() - 2; }

  std::size_t lookup(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? kUnk : it->second;
  }
};

inline TokenVocab build_token_vocab(const std::vector<std::vector<std::string>>& corpus,
                                    std::size_t min_freq = 1) {
  if (min_freq < 1) throw std::runtime_error("build_token_vocab: min_freq must be >= 1");
  std::map<std::string, std::size_t> tally;
  for (const auto& doc : corpus)
    for (const auto& tok : doc) ++tally[tok];
  TokenVocab vocab;
  for (const auto& [tok, count] : tally) {
    if (count >= min_freq) {
      vocab.index[tok] = vocab.tokens.size();
      vocab.tokens.push_back(tok);
    }
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Pretrained word vectors: plain text, "token v1 v2 ... vD" per line.
// ---------------------------------------------------------------------------

struct PretrainedVectors {
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::size_t dim = 0;
  std::size_t malformed_lines = 0;

  bool empty() const { return vectors.empty(); }
};

inline PretrainedVectors load_pretrained_vectors(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word vector file: " + path);
  PretrainedVectors result;
  result.dim = dim;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::string token;
    iss >> token;
    std::vector<double> v;
    v.reserve(dim);
    double x;
    while (iss >> x) v.push_back(x);
    if (token.empty() || v.size() != dim) {
      ++result.malformed_lines;
      continue;
    }
    // Uncased matching maximizes coverage; first occurrence wins.
    for (auto& c : token)
      if (static_cast<unsigned char>(c) < 128)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    result.vectors.emplace(std::move(token), std::move(v));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Embedding table: V x D, padding row pinned to zero.
// ---------------------------------------------------------------------------

struct EmbeddingTable {
  std::size_t dim = 0;
  Tensor matrix;                       // [V, D]
  std::vector<std::uint8_t> covered;   // per row: copied from pretrained vectors

  std::size_t vocab_size() const { return matrix.rank() == 2 ? matrix.dim(0) : 0; }
};

// Covered tokens copy their pretrained rows; everything else (including the
// unknown token) draws i.i.d. uniform from [-0.25, 0.25] on the "init"
// stream of the given seed. The padding row stays all zero.
inline EmbeddingTable init_embedding_table(const TokenVocab& vocab,
                                           const PretrainedVectors& pretrained, std::size_t dim,
                                           std::uint64_t seed) {
  if (dim == 0) throw std::runtime_error("init_embedding_table: dim must be positive");
  if (!pretrained.empty() && pretrained.dim != dim)
    throw std::runtime_error("init_embedding_table: pretrained dimension " +
                             std::to_string(pretrained.dim) + " != requested dim " +
                             std::to_string(dim));
  EmbeddingTable table;
  table.dim = dim;
  table.matrix = Tensor({vocab.size(), dim});
  table.covered.assign(vocab.size(), 0);
  RngStream stream(seed, "embedding-init");
  for (std::size_t row = 0; row < vocab.size(); ++row) {
    if (row == TokenVocab::kPad) continue;  // stays zero
    auto it = pretrained.vectors.find(vocab.tokens[row]);
    if (row != TokenVocab::kUnk && it != pretrained.vectors.end()) {
      for (std::size_t d = 0; d < dim; ++d) table.matrix.at2(row, d) = it->second[d];
      table.covered[row] = 1;
    } else {
      for (std::size_t d = 0; d < dim; ++d)
        table.matrix.at2(row, d) = stream.uniform(-0.25, 0.25);
    }
  }
  return table;
}

// Fraction of real tokens (padding and unknown excluded) with a pretrained
// vector. Zero for an empty real vocabulary.
inline double coverage_ratio(const TokenVocab& vocab, const PretrainedVectors& pretrained) {
  if (vocab.real_token_count() == 0) return 0.0;
  std::size_t covered = 0;
  for (std::size_t row = 2; row < vocab.size(); ++row)
    if (pretrained.vectors.count(vocab.tokens[row])) ++covered;
  return static_cast<double>(covered) / static_cast<double>(vocab.real_token_count());
}

// Fixed-length index row: unknown for out-of-vocab tokens, right-padded or
// truncated to max_len.
inline std::vector<std::size_t> encode_sequence(const std::vector<std::string>& tokens,
                                                const TokenVocab& vocab, std::size_t max_len) {
  if (max_len == 0) throw std::runtime_error("encode_sequence: max_len must be positive");
  std::vector<std::size_t> out(max_len, TokenVocab::kPad);
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) out[i] = vocab.lookup(tokens[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Token vocab file: "<index>\t<token>" per line.
// ---------------------------------------------------------------------------

inline void save_token_vocab(const std::string& path, const TokenVocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write token vocab file: " + path);
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i)
    out << i << '\t' << vocab.tokens[i] << '\n';
}

inline TokenVocab load_token_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open token vocab file: " + path);
  TokenVocab vocab;
  vocab.tokens.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("token vocab file " + path + " line " + std::to_string(line_no) +
                               ": expected <index>\\t<token>");
    if (std::stoull(line.substr(0, tab)) != vocab.tokens.size())
      throw std::runtime_error("token vocab file " + path + " line " + std::to_string(line_no) +
                               ": indices must be contiguous from 0");
    vocab.tokens.push_back(line.substr(tab + 1));
  }
  if (vocab.tokens.size() < 2 || vocab.tokens[0] != "<pad>" || vocab.tokens[1] != "<unk>")
    throw std::runtime_error("token vocab file " + path +
                             ": first two entries must be <pad> and <unk>");
  for (std::size_t i = 2; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
  return vocab;
}

}  // namespace latefuse
