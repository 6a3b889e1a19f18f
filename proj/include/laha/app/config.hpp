// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "laha/error.hpp"
#include "laha/io.hpp"
#include "laha/labelgraph/skipgram.hpp"
#include "laha/labelgraph/walks.hpp"
#include "laha/metrics/evaluate.hpp"
#include "laha/model/params.hpp"
#include "laha/training/trainer.hpp"

namespace laha::app {

namespace fs = std::filesystem;

// A required input file is absent.
struct MissingInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An artifact produced by an earlier command is absent.
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunPaths {
  fs::path train, test, word_vectors, label_embedding, graph, checkpoint, label_names;
  fs::path out = "out";
};

struct RunConfig {
  RunPaths paths;
  ModelConfig model;              // vocab_size and k are filled from data
  std::size_t label_count = 0;    // 0: infer from the training corpus
  std::size_t min_freq = 1;
  std::size_t max_vocab = std::numeric_limits<std::size_t>::max();
  Variant variant = Variant::kFused;
  std::uint64_t seed = 1;
  TrainConfig train;
  bool resume = false;
  WalkConfig walk;
  SkipGramConfig skipgram;
  std::vector<std::size_t> taus = {1, 3, 5};
  LabelGroupSpec groups;
  std::size_t topk = 5;

  RunConfig() {
    model.d = 300;
    model.r = 256;
    model.d_a = 256;
    model.max_len = 500;
  }

  // Artifact locations that default into the output directory.
  fs::path graph_path() const { return paths.graph.empty() ? paths.out / "label_graph.txt" : paths.graph; }
  fs::path embedding_path() const {
    return paths.label_embedding.empty() ? paths.out / "label_embedding.txt" : paths.label_embedding;
  }
  fs::path checkpoint_path() const { return paths.checkpoint.empty() ? paths.out / "model.ckpt" : paths.checkpoint; }
  fs::path test_path() const { return paths.test.empty() ? paths.train : paths.test; }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::size_t to_size(const std::string& v) {
  auto n = parse_int(v);
  if (!n || *n < 0) throw ValidationError("expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(*n);
}

inline double to_real(const std::string& v) {
  auto x = parse_double(v);
  if (!x) throw ValidationError("expected a number, got '" + v + "'");
  return *x;
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("expected true or false, got '" + v + "'");
}

inline std::vector<std::size_t> to_size_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_size(item));
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& value, const fs::path& base)>;

inline fs::path resolve(const std::string& v, const fs::path& base) {
  if (v.empty()) return {};
  fs::path p(v);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

inline const std::map<std::string, std::map<std::string, Setter>>& schema() {
  using C = RunConfig;
  using P = const fs::path&;
  using V = const std::string&;
  static const std::map<std::string, std::map<std::string, Setter>> s = {
      {"run",
       {{"seed", [](C& c, V v, P) { c.seed = to_size(v); }},
        {"variant", [](C& c, V v, P) { c.variant = parse_variant(v); }}}},
      {"paths",
       {{"train", [](C& c, V v, P b) { c.paths.train = resolve(v, b); }},
        {"test", [](C& c, V v, P b) { c.paths.test = resolve(v, b); }},
        {"word_vectors", [](C& c, V v, P b) { c.paths.word_vectors = resolve(v, b); }},
        {"label_embedding", [](C& c, V v, P b) { c.paths.label_embedding = resolve(v, b); }},
        {"graph", [](C& c, V v, P b) { c.paths.graph = resolve(v, b); }},
        {"checkpoint", [](C& c, V v, P b) { c.paths.checkpoint = resolve(v, b); }},
        {"label_names", [](C& c, V v, P b) { c.paths.label_names = resolve(v, b); }},
        {"out", [](C& c, V v, P b) { c.paths.out = resolve(v, b); }}}},
      {"model",
       {{"d", [](C& c, V v, P) { c.model.d = to_size(v); }},
        {"r", [](C& c, V v, P) { c.model.r = to_size(v); }},
        {"d_a", [](C& c, V v, P) { c.model.d_a = to_size(v); }},
        {"k", [](C& c, V v, P) { c.label_count = to_size(v); }},
        {"max_len", [](C& c, V v, P) { c.model.max_len = to_size(v); }},
        {"min_freq", [](C& c, V v, P) { c.min_freq = to_size(v); }},
        {"max_vocab", [](C& c, V v, P) { c.max_vocab = to_size(v); }}}},
      {"train",
       {{"learning_rate", [](C& c, V v, P) { c.train.learning_rate = to_real(v); }},
        {"batch_size", [](C& c, V v, P) { c.train.batch_size = to_size(v); }},
        {"epochs", [](C& c, V v, P) { c.train.epochs = to_size(v); }},
        {"negatives_per_doc", [](C& c, V v, P) { c.train.negatives_per_doc = to_size(v); }},
        {"finetune_word_vectors", [](C& c, V v, P) { c.train.finetune_word_vectors = to_bool(v); }},
        {"resume", [](C& c, V v, P) { c.resume = to_bool(v); }}}},
      {"walk",
       {{"p", [](C& c, V v, P) { c.walk.p = to_real(v); }},
        {"q", [](C& c, V v, P) { c.walk.q = to_real(v); }},
        {"walk_length", [](C& c, V v, P) { c.walk.walk_length = to_size(v); }},
        {"walks_per_node", [](C& c, V v, P) { c.walk.walks_per_node = to_size(v); }}}},
      {"skipgram",
       {{"window", [](C& c, V v, P) { c.skipgram.window = to_size(v); }},
        {"negatives", [](C& c, V v, P) { c.skipgram.negatives = to_size(v); }},
        {"epochs", [](C& c, V v, P) { c.skipgram.epochs = to_size(v); }},
        {"learning_rate", [](C& c, V v, P) { c.skipgram.learning_rate = to_real(v); }}}},
      {"eval",
       {{"taus", [](C& c, V v, P) { c.taus = to_size_list(v); }},
        {"group_boundaries", [](C& c, V v, P) { c.groups.boundaries = to_size_list(v); }},
        {"topk", [](C& c, V v, P) { c.topk = to_size(v); }}}},
  };
  return s;
}

}  // namespace detail

/// Parses `[section]` / `key = value` text; `#` and `;` start comments.
/// Unknown sections or keys and unparsable values are FormatErrors that name
/// the line. Relative paths are taken relative to `base`.
inline RunConfig parse_config(const std::string& text, const fs::path& base = {}) {
  RunConfig cfg;
  const auto& schema = detail::schema();
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cut = line.find_first_of("#;");
    const std::string s = detail::trim(cut == std::string::npos ? line : line.substr(0, cut));
    if (s.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') throw FormatError(where + "unterminated section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (!schema.count(section)) throw FormatError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw FormatError(where + "expected key = value");
    if (section.empty()) throw FormatError(where + "key outside of any [section]");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    const auto& keys = schema.at(section);
    auto it = keys.find(key);
    if (it == keys.end()) throw FormatError(where + "unknown key '" + key + "' in [" + section + "]");
    try {
      it->second(cfg, value, base);
    } catch (const std::invalid_argument& e) {
      throw FormatError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInputError("config file not found: " + path.string());
  return parse_config(read_file(path), path.parent_path());
}

// Rejects values no command could run with.
inline void validate(const RunConfig& c) {
  if (c.model.d == 0 || c.model.r == 0 || c.model.d_a == 0 || c.model.max_len == 0) {
    throw ValidationError("config: model dimensions must be positive");
  }
  if (c.min_freq < 1) throw ValidationError("config: min_freq must be >= 1");
  if (c.taus.empty()) throw ValidationError("config: taus must list at least one cutoff");
  for (auto t : c.taus)
    if (t == 0) throw ValidationError("config: taus must be >= 1");
  if (c.topk == 0) throw ValidationError("config: topk must be >= 1");
  c.train.validate();
  c.walk.validate();
  c.groups.validate();
}

// Documented key list, printed by `laha config-keys`.
inline std::string config_keys() {
  std::string out;
  for (const auto& [section, keys] : detail::schema()) {
    out += "[" + section + "]\n";
    for (const auto& [k, _] : keys) out += "  " + k + "\n";
  }
  return out;
}

}  // namespace laha::app
