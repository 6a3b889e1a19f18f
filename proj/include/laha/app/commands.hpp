// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pipeline commands. Each cmd_* throws on failure; run_command maps the
// exception type to a stable exit code.

#include <algorithm>
#include <cctype>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "laha/app/config.hpp"
#include "laha/data/corpus.hpp"
#include "laha/data/synthetic.hpp"
#include "laha/data/vocabulary.hpp"
#include "laha/data/word_vectors.hpp"
#include "laha/io.hpp"
#include "laha/labelgraph/graph.hpp"
#include "laha/labelgraph/skipgram.hpp"
#include "laha/labelgraph/walks.hpp"
#include "laha/metrics/evaluate.hpp"
#include "laha/metrics/ranking.hpp"
#include "laha/model/attention_export.hpp"
#include "laha/model/forward.hpp"
#include "laha/training/checkpoint.hpp"
#include "laha/training/trainer.hpp"

namespace laha::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitMissingInput = 2,
  kExitMalformed = 3,
  kExitMissingArtifact = 4,
  kExitIncompatible = 5,
};

// Sub-seeds so that components sharing the run seed draw independent streams.
inline constexpr std::uint64_t kInitStream = 11;
inline constexpr std::uint64_t kWordVectorStream = 12;
inline constexpr std::uint64_t kWalkStream = 13;
inline constexpr std::uint64_t kSkipGramStream = 14;

namespace detail {

inline Corpus read_corpus(const fs::path& path, const std::string& what, const std::string& key) {
  if (path.empty()) throw MissingInputError("no " + what + " configured (set [paths] " + key + ")");
  if (!fs::exists(path)) throw MissingInputError(what + " not found: " + path.string());
  try {
    return load_corpus_string(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline std::size_t label_count(const RunConfig& cfg, const Corpus& train) {
  const std::size_t inferred = infer_label_count(train);
  if (cfg.label_count == 0) return inferred;
  if (cfg.label_count < inferred) {
    throw ValidationError("[model] k = " + std::to_string(cfg.label_count) + " but the training corpus uses label " +
                          std::to_string(inferred - 1));
  }
  return cfg.label_count;
}

inline std::vector<std::string> read_label_names(const RunConfig& cfg) {
  if (cfg.paths.label_names.empty()) return {};
  if (!fs::exists(cfg.paths.label_names)) {
    throw MissingInputError("label names file not found: " + cfg.paths.label_names.string());
  }
  std::vector<std::string> names;
  std::istringstream in(read_file(cfg.paths.label_names));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    names.push_back(line);
  }
  return names;
}

inline std::string embed_hint(const RunConfig& cfg) {
  return "run `laha embed-labels` with the same config first, or use --variant sa (variant " +
         to_string(cfg.variant) + " needs a label embedding)";
}

// The label matrix for variants that need one, checked against r and k.
inline Matrix load_label_matrix(const RunConfig& cfg, std::size_t k) {
  if (!uses_label_embedding(cfg.variant)) return {};
  const fs::path path = cfg.embedding_path();
  if (!fs::exists(path)) {
    throw MissingArtifactError("label embedding not found: " + path.string() + "; " + embed_hint(cfg));
  }
  LabelEmbedding e = load_embedding(path);
  if (e.dim() != cfg.model.r || e.label_count() != k) {
    throw IncompatibleCheckpointError("label embedding " + path.string() + " is " + e.vectors.shape() +
                                      " but the config needs r x k = " + Matrix::shape_string(cfg.model.r, k) +
                                      "; re-run `laha embed-labels`");
  }
  return std::move(e.vectors);
}

inline Checkpoint read_checkpoint(const RunConfig& cfg, const std::string& command) {
  const fs::path path = cfg.checkpoint_path();
  if (!fs::exists(path)) {
    throw MissingArtifactError("checkpoint not found: " + path.string() + "; run `laha train` before `laha " +
                               command + "`");
  }
  return load_checkpoint(path);
}

// Fails with IncompatibleCheckpointError listing every field that differs.
inline void check_compatible(const Checkpoint& cp, const RunConfig& cfg) {
  std::vector<std::string> diffs;
  auto cmp = [&](const char* name, std::size_t have, std::size_t want) {
    if (have != want) diffs.push_back(std::string(name) + " " + std::to_string(have) + " vs " + std::to_string(want));
  };
  const ModelConfig& m = cp.model.config;
  cmp("d", m.d, cfg.model.d);
  cmp("r", m.r, cfg.model.r);
  cmp("d_a", m.d_a, cfg.model.d_a);
  cmp("max_len", m.max_len, cfg.model.max_len);
  if (cfg.label_count != 0) cmp("k", m.k, cfg.label_count);
  if (cp.model.variant != cfg.variant) {
    diffs.push_back("variant " + to_string(cp.model.variant) + " vs " + to_string(cfg.variant));
  }
  if (!diffs.empty()) {
    std::string msg = "checkpoint " + cfg.checkpoint_path().string() + " does not match the config (checkpoint vs config):";
    for (const auto& d : diffs) msg += " " + d + ";";
    throw IncompatibleCheckpointError(msg);
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

inline std::string loss_csv(const std::vector<double>& losses) {
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) csv += std::to_string(e + 1) + "," + format_double(losses[e]) + "\n";
  return csv;
}

inline const Document& find_document(const Corpus& corpus, const std::string& id) {
  for (const auto& d : corpus)
    if (d.doc_id == id) return d;
  throw MissingInputError("document '" + id + "' not found");
}

}  // namespace detail

struct GraphSummary {
  std::size_t nodes = 0, edges = 0, isolated = 0;
};

inline nlohmann::json to_json(const GraphSummary& s) {
  return {{"nodes", s.nodes}, {"edges", s.edges}, {"isolated", s.isolated}};
}

/// Writes the co-occurrence graph and graph_summary.json.
inline GraphSummary cmd_build_graph(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const Corpus train = detail::read_corpus(cfg.paths.train, "train corpus", "train");
  const std::size_t k = detail::label_count(cfg, train);
  const LabelGraph g = build_cooccurrence_graph(train, k);
  const GraphSummary s{k, g.edge_count(), g.isolated_count()};
  detail::write_text(cfg.graph_path(), serialize_graph(g));
  detail::write_text(cfg.paths.out / "graph_summary.json", to_json(s).dump(2) + "\n");
  log << "graph: " << s.nodes << " nodes, " << s.edges << " edges, " << s.isolated << " isolated -> "
      << cfg.graph_path().string() << "\n";
  return s;
}

/// node2vec walks plus skip-gram over the label graph. Reads the graph file
/// when present, otherwise builds it from the training corpus.
inline LabelEmbedding cmd_embed_labels(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  LabelGraph g;
  const fs::path gpath = cfg.graph_path();
  if (fs::exists(gpath)) {
    std::istringstream in(read_file(gpath));
    try {
      g = parse_graph(in);
    } catch (const FormatError& e) {
      throw FormatError(gpath.string() + ": " + e.what());
    }
  } else {
    if (cfg.paths.train.empty() || !fs::exists(cfg.paths.train)) {
      throw MissingInputError("neither a label graph (" + gpath.string() + ") nor a train corpus (" +
                              (cfg.paths.train.empty() ? std::string("unset") : cfg.paths.train.string()) +
                              ") is available");
    }
    const Corpus train = detail::read_corpus(cfg.paths.train, "train corpus", "train");
    g = build_cooccurrence_graph(train, detail::label_count(cfg, train));
  }
  WalkConfig walk = cfg.walk;
  walk.seed = derive_seed(cfg.seed, {kWalkStream});
  SkipGramConfig sg = cfg.skipgram;
  sg.dim = cfg.model.r;
  sg.seed = derive_seed(cfg.seed, {kSkipGramStream});
  const auto walks = sample_walks(g, walk);
  LabelEmbedding e = train_skipgram(walks, g.node_count(), sg);
  const fs::path out = cfg.embedding_path();
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_embedding(e, out);
  log << "label embedding: " << e.label_count() << " labels x " << e.dim() << " dims from " << walks.size()
      << " walks -> " << out.string() << "\n";
  return e;
}

/// Trains from scratch, or continues the checkpoint when resume is set and
/// the checkpoint exists. Saves the checkpoint after every epoch and writes
/// loss_history.csv at the end.
inline Checkpoint cmd_train(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const Corpus train = detail::read_corpus(cfg.paths.train, "train corpus", "train");
  const std::size_t k = detail::label_count(cfg, train);
  const Vocabulary vocab = build_vocab(train, cfg.min_freq, cfg.max_vocab);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const fs::path ckpt_path = cfg.checkpoint_path();

  Checkpoint cp;
  if (cfg.resume && fs::exists(ckpt_path)) {
    cp = load_checkpoint(ckpt_path);
    detail::check_compatible(cp, cfg);
    if (!(cp.vocab == vocab)) {
      throw IncompatibleCheckpointError("checkpoint vocabulary differs from the one built from " +
                                        cfg.paths.train.string());
    }
    TrainConfig saved = cp.train;
    saved.epochs = tc.epochs;  // only the epoch budget may change on resume
    if (!(saved == tc)) {
      throw IncompatibleCheckpointError("checkpoint training settings (learning rate, batch size, negatives, seed, "
                                        "finetune) differ from the config; resuming would not be reproducible");
    }
    log << "resuming from epoch " << cp.state.epoch << "\n";
  } else {
    cp.model.config = cfg.model;
    cp.model.config.vocab_size = vocab.size();
    cp.model.config.k = k;
    cp.model.config.validate();
    cp.model.variant = cfg.variant;
    cp.model.label_matrix = detail::load_label_matrix(cfg, k);
    std::optional<WordVectors> wv;
    if (!cfg.paths.word_vectors.empty()) {
      if (!fs::exists(cfg.paths.word_vectors)) {
        throw MissingInputError("word vectors not found: " + cfg.paths.word_vectors.string());
      }
      std::istringstream in(read_file(cfg.paths.word_vectors));
      try {
        wv = load_word_vectors(in, vocab, cfg.model.d, derive_seed(cfg.seed, {kWordVectorStream}));
      } catch (const FormatError& e) {
        throw FormatError(cfg.paths.word_vectors.string() + ": " + e.what());
      }
      log << "word vectors: " << wv->from_file << " of " << vocab.size() << " vocabulary rows from file\n";
    }
    cp.model.params = init_params(cp.model.config, derive_seed(cfg.seed, {kInitStream}), wv ? &wv->table : nullptr);
    cp.vocab = vocab;
  }
  cp.train = tc;

  const auto examples = make_examples(train, vocab, cp.model.config.max_len);
  if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
  bool saved = false;
  train_epochs(cp.model, examples, tc, cp.state, [&](const Model& m, const TrainingState& st) {
    save_checkpoint(ckpt_path, Checkpoint{m, cp.vocab, tc, st});
    saved = true;
    log << "epoch " << st.epoch << "/" << tc.epochs << " loss " << format_double(st.loss_history.back()) << "\n";
  });
  if (!saved) save_checkpoint(ckpt_path, cp);  // no epoch ran; the checkpoint still reflects this config
  detail::write_text(cfg.paths.out / "loss_history.csv", detail::loss_csv(cp.state.loss_history));
  return cp;
}

/// Scores the test corpus (train corpus when no test corpus is set) and
/// writes eval_report.json. Label groups come from train frequencies.
inline EvalReport cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const Corpus test = detail::read_corpus(cfg.test_path(), "test corpus", "test");
  const Corpus train = detail::read_corpus(cfg.paths.train, "train corpus", "train");
  const Checkpoint cp = detail::read_checkpoint(cfg, "evaluate");
  detail::check_compatible(cp, cfg);
  const EvalReport rep = evaluate(cp.model, test, cp.vocab, train, {cfg.taus, cfg.groups, true});
  const std::string json = to_json(rep).dump(2) + "\n";
  detail::write_text(cfg.paths.out / "eval_report.json", json);
  for (const auto& m : rep.overall) {
    log << "P@" << m.tau << " " << format_double(m.precision) << "  nDCG@" << m.tau << " " << format_double(m.ndcg)
        << "\n";
  }
  return rep;
}

struct Prediction {
  std::string doc_id;
  std::vector<std::pair<std::size_t, double>> labels;  // score descending
};

inline nlohmann::json to_json(const Prediction& p, const std::vector<std::string>& names = {}) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& [l, s] : p.labels) {
    nlohmann::json e = {{"label", l}, {"score", s}};
    if (l < names.size()) e["name"] = names[l];
    labels.push_back(std::move(e));
  }
  return {{"doc_id", p.doc_id}, {"labels", labels}};
}

/// Top-`topk` labels per document of the test corpus, or only of `doc_ids`
/// when given. Writes predictions.jsonl, one document per line.
inline std::vector<Prediction> cmd_predict(const RunConfig& cfg, const std::vector<std::string>& doc_ids,
                                           std::ostream& log) {
  validate(cfg);
  const Corpus test = detail::read_corpus(cfg.test_path(), "test corpus", "test");
  const Checkpoint cp = detail::read_checkpoint(cfg, "predict");
  detail::check_compatible(cp, cfg);
  const auto names = detail::read_label_names(cfg);

  std::vector<const Document*> docs;
  if (doc_ids.empty()) {
    for (const auto& d : test) docs.push_back(&d);
  } else {
    for (const auto& id : doc_ids) docs.push_back(&detail::find_document(test, id));
  }
  const std::size_t tau = std::min(cfg.topk, cp.model.config.k);
  std::vector<Prediction> out;
  std::string lines;
  for (const Document* d : docs) {
    const auto scores = score_all(cp.model, encode_document(*d, cp.vocab, cp.model.config.max_len));
    const auto ranked = rank_labels(scores);
    Prediction p{d->doc_id, {}};
    for (std::size_t i = 0; i < tau; ++i) p.labels.emplace_back(ranked[i], scores[ranked[i]]);
    lines += to_json(p, names).dump() + "\n";
    out.push_back(std::move(p));
  }
  detail::write_text(cfg.paths.out / "predictions.jsonl", lines);
  log << "predictions for " << out.size() << " documents -> " << (cfg.paths.out / "predictions.jsonl").string()
      << "\n";
  return out;
}

/// Per-token fused attention for the document's top-`topk` predicted labels.
/// The document is looked up in the test corpus, then in the train corpus.
inline AttentionReport cmd_export_attention(const RunConfig& cfg, const std::string& doc_id, std::ostream& log) {
  validate(cfg);
  const Checkpoint cp = detail::read_checkpoint(cfg, "export-attention");
  detail::check_compatible(cp, cfg);
  const auto names = detail::read_label_names(cfg);

  std::optional<Document> doc;
  for (const fs::path& p : {cfg.test_path(), cfg.paths.train}) {
    if (p.empty() || !fs::exists(p)) continue;
    for (const auto& d : detail::read_corpus(p, "corpus", "test"))
      if (d.doc_id == doc_id) doc = d;
    if (doc) break;
  }
  if (!doc) throw MissingInputError("document '" + doc_id + "' not found in the test or train corpus");

  const EncodedDocument enc = encode_document(*doc, cp.vocab, cp.model.config.max_len);
  const auto ranked = rank_labels(score_all(cp.model, enc));
  std::vector<std::size_t> labels(ranked.begin(), ranked.begin() + std::min(cfg.topk, ranked.size()));
  const ForwardTrace trace = forward(cp.model, enc, labels);
  const AttentionReport rep = export_attention(trace, doc->doc_id, doc->tokens, names);

  std::string file = "attention_";
  for (char c : doc_id) file += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  const fs::path path = cfg.paths.out / (file + ".json");
  detail::write_text(path, to_json(rep).dump(2) + "\n");
  log << "attention for '" << doc_id << "' over " << labels.size() << " labels -> " << path.string() << "\n";
  return rep;
}

/// Writes a seeded synthetic corpus as train.jsonl / test.jsonl plus
/// label_names.txt into `dir`. The test split uses the next seed and
/// its own id prefix.
inline void cmd_generate_synthetic(const SyntheticConfig& train_cfg, std::size_t test_docs, const fs::path& dir,
                                   std::ostream& log) {
  auto dump = [&](const SyntheticConfig& c, const fs::path& path, const std::string& id_prefix) {
    std::string text;
    Corpus docs = generate_synthetic(c);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!id_prefix.empty()) docs[i].doc_id = id_prefix + std::to_string(i);
      text += to_jsonl(docs[i]) + "\n";
    }
    detail::write_text(path, text);
  };
  dump(train_cfg, dir / "train.jsonl", "");
  if (test_docs > 0) {
    SyntheticConfig tc = train_cfg;
    tc.docs = test_docs;
    tc.seed = train_cfg.seed + 1;
    dump(tc, dir / "test.jsonl", "syn-test-");
  }
  std::string names;
  for (std::size_t l = 0; l < train_cfg.labels; ++l) names += "label" + std::to_string(l) + "\n";
  detail::write_text(dir / "label_names.txt", names);
  log << "synthetic corpus: " << train_cfg.docs << " train, " << test_docs << " test documents -> " << dir.string()
      << "\n";
}

struct AblationEntry {
  Variant variant;
  EvalReport report;
  std::vector<double> loss_history;
};

/// Trains and evaluates all four variants from the same seed. Each variant
/// gets its own output directory; ablation.json collects the reports.
inline std::vector<AblationEntry> cmd_ablate(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const Corpus train = detail::read_corpus(cfg.paths.train, "train corpus", "train");
  const Corpus test = detail::read_corpus(cfg.test_path(), "test corpus", "test");
  std::vector<AblationEntry> out;
  nlohmann::json all = nlohmann::json::array();
  for (Variant v : {Variant::kSelfOnly, Variant::kInteractionOnly, Variant::kAveraged, Variant::kFused}) {
    RunConfig vc = cfg;
    vc.variant = v;
    vc.resume = false;
    vc.paths.out = cfg.paths.out / "ablation" / to_string(v);
    vc.paths.checkpoint.clear();
    vc.paths.label_embedding = cfg.embedding_path();
    log << "== " << to_string(v) << "\n";
    const Checkpoint cp = cmd_train(vc, log);
    EvalReport rep = evaluate(cp.model, test, cp.vocab, train, {cfg.taus, cfg.groups, true});
    detail::write_text(vc.paths.out / "eval_report.json", to_json(rep).dump(2) + "\n");
    all.push_back({{"variant", to_string(v)}, {"loss_history", cp.state.loss_history}, {"report", to_json(rep)}});
    out.push_back({v, std::move(rep), cp.state.loss_history});
  }
  detail::write_text(cfg.paths.out / "ablation.json", all.dump(2) + "\n");

  log << "variant";
  for (auto t : out.front().report.overall) log << "  P@" << t.tau << "  nDCG@" << t.tau;
  log << "\n";
  for (const auto& e : out) {
    log << to_string(e.variant);
    for (const auto& m : e.report.overall) log << "  " << format_double(m.precision) << "  " << format_double(m.ndcg);
    log << "\n";
  }
  return out;
}

/// Runs `fn`, reporting any failure on `err` and translating it to an exit code.
inline int run_command(const std::function<void()>& fn, std::ostream& err) {
  try {
    fn();
    return kExitOk;
  } catch (const MissingInputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const MissingArtifactError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const IncompatibleCheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIncompatible;
  } catch (const FormatError& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const std::invalid_argument& e) {  // ValidationError, DimensionError, DegenerateInputError
    err << "error: invalid input: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace laha::app
