// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "laha/data/corpus.hpp"
#include "laha/numeric/matrix.hpp"

namespace laha {

/// Token <-> id mapping with reserved PAD (0) and UNK (1).
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() : tokens_{kPadToken, kUnkToken} {}

  // Rebuilds from an id-ordered token list whose first two entries are the reserved tokens.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
      throw FormatError("vocabulary must start with <pad>, <unk>");
    }
    Vocabulary v;
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      if (!v.add(tokens[i])) throw FormatError("duplicate vocabulary token '" + tokens[i] + "'");
    }
    return v;
  }

  // Returns false if the token is already present or reserved.
  bool add(const std::string& token) {
    if (token == kPadToken || token == kUnkToken || ids_.count(token)) return false;
    ids_.emplace(token, tokens_.size());
    tokens_.push_back(token);
    return true;
  }

  std::size_t id(const std::string& token) const {
    if (token == kPadToken) return kPad;
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Keeps tokens seen at least `min_freq` times, most frequent first with
/// lexicographic tie-breaking, at most `max_size` of them (reserved ids excluded).
inline Vocabulary build_vocab(const Corpus& corpus, std::size_t min_freq = 1,
                              std::size_t max_size = std::numeric_limits<std::size_t>::max()) {
  if (min_freq < 1) throw ValidationError("build_vocab: min_freq must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& d : corpus)
    for (const auto& t : d.tokens) ++counts[t];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_freq && tok != Vocabulary::kPadToken && tok != Vocabulary::kUnkToken) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (kept.size() > max_size) kept.resize(max_size);

  Vocabulary v;
  for (const auto& [tok, n] : kept) v.add(tok);
  return v;
}

struct EncodedDocument {
  std::vector<std::size_t> ids;
  Mask mask;

  std::size_t valid_length() const {
    std::size_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
  }
};

/// Truncates to the first `max_len` tokens or right-pads with PAD.
inline EncodedDocument encode_document(const Document& doc, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw ValidationError("encode_document: max_len must be >= 1");
  EncodedDocument enc;
  enc.ids.assign(max_len, Vocabulary::kPad);
  enc.mask.assign(max_len, 0);
  const std::size_t n = std::min(doc.tokens.size(), max_len);
  for (std::size_t t = 0; t < n; ++t) {
    enc.ids[t] = vocab.id(doc.tokens[t]);
    enc.mask[t] = 1;
  }
  return enc;
}

// Tokens of the valid positions; OOV positions come back as <unk>.
inline std::vector<std::string> decode_document(const EncodedDocument& enc, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (std::size_t t = 0; t < enc.ids.size(); ++t)
    if (enc.mask[t]) out.push_back(vocab.token(enc.ids[t]));
  return out;
}

}  // namespace laha
