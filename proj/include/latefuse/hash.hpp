#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace latefuse {

// 64-bit FNV-1a over raw bytes. Stable across platforms; used for the
// vocabulary hashes embedded in artifact headers.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t state = 14695981039346656037ULL) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 1099511628211ULL;
  }
  return state;
}

inline std::string hex16(std::uint64_t v) {
  const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline std::uint64_t parse_hex64(std::string_view s) {
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9')
      v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f')
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F')
      v |= static_cast<std::uint64_t>(c - 'A' + 10);
    else
      return 0;
  }
  return v;
}

// Hash of an ordered label list: each label's bytes followed by '\n'.
inline std::uint64_t ordered_labels_hash(const std::vector<std::string>& labels) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& label : labels) {
    h = fnv1a64(label, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

}  // namespace latefuse
