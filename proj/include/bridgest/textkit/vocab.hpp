#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "bridgest/errors.hpp"
#include "bridgest/numerics/ops.hpp"
#include "bridgest/textkit/tokenize.hpp"

namespace bridgest::text {

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr std::size_t kNumSpecials = 4;

class Vocab {
 public:
  Vocab() : id_to_token_{"<pad>", "<s>", "</s>", "<sep>"} {
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) token_to_id_[id_to_token_[i]] = static_cast<TokenId>(i);
  }

  /// Builds a vocabulary from whitespace tokens of `texts`, in first-seen order.
  static Vocab from_texts(const std::vector<std::string>& texts) {
    Vocab v;
    for (const auto& t : texts) {
      for (auto& tok : tokenize(t)) {
        if (v.contains(tok) && v.id(tok) < static_cast<TokenId>(kNumSpecials)) {
          throw ValidationError("vocab: corpus token '" + tok + "' collides with a reserved special");
        }
        v.add(tok);
      }
    }
    return v;
  }

  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    if (tokens.size() < kNumSpecials) throw ValidationError("vocab: token list shorter than the special set");
    for (std::size_t i = 0; i < kNumSpecials; ++i) {
      if (tokens[i] != v.id_to_token_[i]) throw ValidationError("vocab: special token mismatch at id " + std::to_string(i));
    }
    for (std::size_t i = kNumSpecials; i < tokens.size(); ++i) {
      if (v.contains(tokens[i])) throw ValidationError("vocab: duplicate token '" + tokens[i] + "'");
      v.add(tokens[i]);
    }
    return v;
  }

  TokenId add(const std::string& tok) {
    auto it = token_to_id_.find(tok);
    if (it != token_to_id_.end()) return it->second;
    const auto id = static_cast<TokenId>(id_to_token_.size());
    id_to_token_.push_back(tok);
    token_to_id_.emplace(tok, id);
    return id;
  }

  bool contains(const std::string& tok) const { return token_to_id_.count(tok) != 0; }
  std::size_t size() const { return id_to_token_.size(); }

  TokenId id(const std::string& tok) const {
    auto it = token_to_id_.find(tok);
    if (it == token_to_id_.end()) throw IndexError("vocab: unknown token '" + tok + "'");
    return it->second;
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
      throw IndexError("vocab: id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& tok : tokenize(text)) out.push_back(id(tok));
    return out;
  }

  /// Specials are dropped from the decoded text.
  std::string decode(const std::vector<TokenId>& ids) const {
    Tokens toks;
    for (TokenId i : ids) {
      if (i >= 0 && static_cast<std::size_t>(i) < kNumSpecials) continue;
      toks.push_back(token(i));
    }
    return detokenize(toks);
  }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

}  // namespace bridgest::text
