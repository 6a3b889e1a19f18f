// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "laha/data/vocabulary.hpp"
#include "laha/io.hpp"
#include "laha/numeric/matrix.hpp"
#include "laha/random.hpp"

namespace laha {

struct WordVectors {
  Matrix table;  // vocab_size x d, row i = vector of token id i
  std::size_t dim = 0;
  std::size_t from_file = 0;  // rows taken from the input file
};

// Range of the seeded initialization for tokens missing from the vector file.
inline constexpr double kOovInitRange = 0.25;

/// Reads GloVe-style text vectors ("token v_1 ... v_d" per line, no header).
///
/// Every row starts from a uniform(-0.25, 0.25) draw taken in id order from
/// a seeded generator; rows for tokens present in the file are then
/// overwritten, and the PAD row is zeroed. File tokens outside the vocabulary
/// are ignored. The first occurrence of a duplicated token wins.
inline WordVectors load_word_vectors(std::istream& in, const Vocabulary& vocab, std::size_t d, std::uint64_t seed) {
  if (d == 0) throw ValidationError("load_word_vectors: dimension must be positive");
  WordVectors wv;
  wv.dim = d;
  wv.table = Matrix(vocab.size(), d);
  Rng rng(seed);
  for (std::size_t i = 0; i < wv.table.size(); ++i) wv.table[i] = rng.uniform(-kOovInitRange, kOovInitRange);

  std::vector<bool> seen(vocab.size(), false);
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    while (!rest.empty() && (rest.back() == '\r' || rest.back() == ' ')) rest.remove_suffix(1);
    if (rest.empty()) continue;

    auto next_field = [&rest]() {
      const auto start = rest.find_first_not_of(' ');
      if (start == std::string_view::npos) {
        rest = {};
        return std::string_view{};
      }
      rest.remove_prefix(start);
      const auto end = rest.find(' ');
      auto field = rest.substr(0, end);
      rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
      return field;
    };

    const std::string token(next_field());
    values.clear();
    for (auto f = next_field(); !f.empty(); f = next_field()) {
      auto v = parse_double(f);
      if (!v) throw FormatError("line " + std::to_string(line_no) + ": '" + std::string(f) + "' is not a number");
      values.push_back(*v);
    }
    if (values.size() != d) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(d) + " values, found " +
                        std::to_string(values.size()));
    }
    const std::size_t id = vocab.id(token);
    if (id == Vocabulary::kUnk && token != Vocabulary::kUnkToken) continue;
    if (id == Vocabulary::kPad || seen[id]) continue;
    seen[id] = true;
    ++wv.from_file;
    std::copy(values.begin(), values.end(), wv.table.row_span(id).begin());
  }
  for (auto& x : wv.table.row_span(Vocabulary::kPad)) x = 0.0;
  return wv;
}

}  // namespace laha
