// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "laha/error.hpp"

namespace laha {

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
  // Sorted, unique label indices.
  std::vector<std::size_t> labels;

  bool has_label(std::size_t label) const { return std::binary_search(labels.begin(), labels.end(), label); }
};

using Corpus = std::vector<Document>;

// Lowercase (ASCII) and split on whitespace.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Parses one JSON-lines corpus record. `line_no` is 1-based and only used in messages.
inline Document parse_document(std::string_view line, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(where + "malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw FormatError(where + "expected a JSON object");
  for (const char* key : {"id", "labels", "text"}) {
    if (!j.contains(key)) throw FormatError(where + "missing field '" + key + "'");
  }
  if (!j["id"].is_string()) throw FormatError(where + "'id' must be a string");
  if (!j["text"].is_string()) throw FormatError(where + "'text' must be a string");
  if (!j["labels"].is_array()) throw FormatError(where + "'labels' must be an array");

  Document doc;
  doc.doc_id = j["id"].get<std::string>();
  for (const auto& v : j["labels"]) {
    if (!v.is_number_integer()) throw FormatError(where + "label " + v.dump() + " is not an integer");
    const auto label = v.get<long long>();
    if (label < 0) throw ValidationError(where + "negative label index " + std::to_string(label));
    doc.labels.push_back(static_cast<std::size_t>(label));
  }
  std::sort(doc.labels.begin(), doc.labels.end());
  doc.labels.erase(std::unique(doc.labels.begin(), doc.labels.end()), doc.labels.end());
  if (doc.labels.empty()) throw ValidationError(where + "document '" + doc.doc_id + "' has no labels");
  doc.tokens = tokenize(j["text"].get<std::string>());
  if (doc.tokens.empty()) throw ValidationError(where + "document '" + doc.doc_id + "' has empty text");
  return doc;
}

/// Reads a JSON-lines corpus; blank lines are skipped.
inline Corpus load_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    corpus.push_back(parse_document(line, line_no));
  }
  return corpus;
}

inline Corpus load_corpus_string(const std::string& text) {
  std::istringstream in(text);
  return load_corpus(in);
}

// One JSON-lines record; tokens are joined with single spaces.
inline std::string to_jsonl(const Document& doc) {
  std::string text;
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    if (i) text.push_back(' ');
    text += doc.tokens[i];
  }
  nlohmann::json j = {{"id", doc.doc_id}, {"labels", doc.labels}, {"text", text}};
  return j.dump();
}

// Smallest k covering every label index in the corpus.
inline std::size_t infer_label_count(const Corpus& corpus) {
  std::size_t k = 0;
  for (const auto& d : corpus)
    if (!d.labels.empty()) k = std::max(k, d.labels.back() + 1);
  return k;
}

// Number of documents carrying each label.
inline std::vector<std::size_t> label_frequencies(const Corpus& corpus, std::size_t k) {
  std::vector<std::size_t> freq(k, 0);
  for (const auto& d : corpus) {
    for (auto l : d.labels) {
      if (l >= k) throw ValidationError("label " + std::to_string(l) + " out of range for k=" + std::to_string(k));
      ++freq[l];
    }
  }
  return freq;
}

}  // namespace laha
