#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bridgest/textkit/utf8.hpp"

namespace bridgest::text {

using Tokens = std::vector<std::string>;

/// Splits on Unicode whitespace; runs of whitespace never produce empty tokens.
inline Tokens tokenize(std::string_view s) {
  Tokens out;
  std::vector<char32_t> cur;
  for (char32_t c : decode_utf8(s)) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(encode_utf8(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(encode_utf8(cur));
  return out;
}

inline std::string detokenize(const Tokens& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

/// Collapses whitespace runs to one ASCII space and trims the ends.
inline std::string normalize_whitespace(std::string_view s) { return detokenize(tokenize(s)); }

}  // namespace bridgest::text
