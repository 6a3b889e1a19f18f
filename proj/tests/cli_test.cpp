// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "laha/app/commands.hpp"
#include "laha/app/config.hpp"

namespace laha::app {
namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("laha_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Small model on the default synthetic corpus so every command runs in well under a second.
RunConfig small_config(const fs::path& dir) {
  std::string text;
  for (const auto& d : generate_synthetic({})) text += to_jsonl(d) + "\n";
  write(dir / "train.jsonl", text);
  RunConfig c = parse_config(R"(
[paths]
train = train.jsonl
out = out
[model]
d = 6
r = 5
d_a = 4
max_len = 20
[train]
learning_rate = 0.01
batch_size = 10
epochs = 3
[walk]
walk_length = 10
walks_per_node = 4
)",
                             dir);
  return c;
}

int run(const std::function<void()>& fn, std::string* err_text = nullptr) {
  std::ostringstream err;
  const int code = run_command(fn, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::ostringstream sink;

TEST(Config, ParsesSectionsCommentsAndRelativePaths) {
  const RunConfig c = parse_config(
      "# comment\n[run]\nseed = 9 ; trailing\nvariant = sa+ia\n[paths]\ntrain = a/b.jsonl\n[eval]\ntaus = 1, 2\n",
      "/base");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.variant, Variant::kAveraged);
  EXPECT_EQ(c.paths.train, fs::path("/base/a/b.jsonl"));
  EXPECT_EQ(c.taus, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(c.checkpoint_path(), fs::path("out") / "model.ckpt");
  EXPECT_EQ(c.test_path(), c.paths.train);
}

TEST(Config, UnknownKeysAndBadValuesAreRejectedWithLine) {
  for (const char* text : {"[model]\nd = 3\nwidth = 4\n", "[nope]\n", "[model]\nd = three\n", "d = 3\n",
                           "[run]\nvariant = big\n", "[train]\nfinetune_word_vectors = maybe\n"}) {
    EXPECT_THROW(parse_config(text), FormatError) << text;
  }
  try {
    parse_config("[model]\nd = 3\nwidth = 4\n");
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(run([] { parse_config("[x]\n"); }), kExitMalformed);
  EXPECT_EQ(run([] { load_config("/nonexistent/laha.ini"); }), kExitMissingInput);
}

TEST(Config, EveryListedKeyIsAccepted) {
  std::istringstream in(config_keys());
  std::string line, section, text;
  while (std::getline(in, line)) {
    if (line.front() == '[') {
      text += line + "\n";
    } else {
      const std::string key = line.substr(2);
      std::string value = "1";
      if (key == "variant") value = "laha";
      if (key == "taus" || key == "group_boundaries") value = "1,2";
      text += key + " = " + value + "\n";
    }
  }
  EXPECT_NO_THROW(parse_config(text));
}

TEST(BuildGraph, WritesGraphAndSummary) {
  TempDir t("graph");
  const RunConfig c = small_config(t.path());
  GraphSummary s;
  EXPECT_EQ(run([&] { s = cmd_build_graph(c, sink); }), kExitOk);
  EXPECT_TRUE(fs::exists(c.graph_path()));
  EXPECT_EQ(s.nodes, 8u);
  const auto j = nlohmann::json::parse(read_file(c.paths.out / "graph_summary.json"));
  EXPECT_EQ(j["nodes"], 8);
  EXPECT_EQ(j["edges"], s.edges);
}

TEST(BuildGraph, MissingCorpusIsExit2WithPath) {
  TempDir t("nocorpus");
  RunConfig c = small_config(t.path());
  c.paths.train = t.path() / "missing.jsonl";
  std::string err;
  EXPECT_EQ(run([&] { cmd_build_graph(c, sink); }, &err), kExitMissingInput);
  EXPECT_NE(err.find("missing.jsonl"), std::string::npos) << err;
}

TEST(BuildGraph, MalformedCorpusIsExit3WithLine) {
  TempDir t("malformed");
  RunConfig c = small_config(t.path());
  write(c.paths.train, "{\"id\":\"a\",\"labels\":[0],\"text\":\"x\"}\n{broken\n");
  std::string err;
  EXPECT_EQ(run([&] { cmd_build_graph(c, sink); }, &err), kExitMalformed);
  EXPECT_NE(err.find("line 2"), std::string::npos) << err;
}

TEST(BuildGraph, SingleLabelDocsGiveNoEdges) {
  TempDir t("single");
  RunConfig c = small_config(t.path());
  write(c.paths.train,
        "{\"id\":\"a\",\"labels\":[0],\"text\":\"x\"}\n{\"id\":\"b\",\"labels\":[1],\"text\":\"y\"}\n"
        "{\"id\":\"c\",\"labels\":[2],\"text\":\"z\"}\n");
  GraphSummary s;
  ASSERT_EQ(run([&] { s = cmd_build_graph(c, sink); }), kExitOk);
  EXPECT_EQ(s.edges, 0u);
  EXPECT_EQ(s.isolated, 3u);
  EXPECT_EQ(s.nodes, 3u);
}

TEST(BuildGraph, IdempotentAndLeavesInputsUntouched) {
  TempDir t("idem");
  const RunConfig c = small_config(t.path());
  const std::string before = read_file(c.paths.train);
  ASSERT_EQ(run([&] { cmd_build_graph(c, sink); }), kExitOk);
  const std::string g1 = read_file(c.graph_path());
  ASSERT_EQ(run([&] { cmd_build_graph(c, sink); }), kExitOk);
  EXPECT_EQ(read_file(c.graph_path()), g1);
  EXPECT_EQ(read_file(c.paths.train), before);
}

TEST(EmbedLabels, DeterministicBytesAndHeaderHonoursR) {
  TempDir t("embed");
  const RunConfig c = small_config(t.path());
  ASSERT_EQ(run([&] { cmd_embed_labels(c, sink); }), kExitOk);
  const std::string a = read_file(c.embedding_path());
  fs::remove(c.embedding_path());
  ASSERT_EQ(run([&] { cmd_embed_labels(c, sink); }), kExitOk);
  EXPECT_EQ(read_file(c.embedding_path()), a);
  EXPECT_EQ(a.substr(0, a.find('\n')), "5 8");

  RunConfig other = c;
  other.seed = 2;
  other.paths.label_embedding = t.path() / "other.emb";
  ASSERT_EQ(run([&] { cmd_embed_labels(other, sink); }), kExitOk);
  EXPECT_NE(read_file(other.paths.label_embedding), a);
}

TEST(EmbedLabels, UsesGraphFileWhenCorpusIsGone) {
  TempDir t("embedgraph");
  RunConfig c = small_config(t.path());
  ASSERT_EQ(run([&] { cmd_build_graph(c, sink); }), kExitOk);
  c.paths.train = t.path() / "gone.jsonl";
  EXPECT_EQ(run([&] { cmd_embed_labels(c, sink); }), kExitOk);
}

TEST(EmbedLabels, MissingGraphAndCorpusIsExit2) {
  TempDir t("embedmissing");
  RunConfig c = small_config(t.path());
  c.paths.train = t.path() / "gone.jsonl";
  EXPECT_EQ(run([&] { cmd_embed_labels(c, sink); }), kExitMissingInput);
}

TEST(Train, InteractionVariantWithoutEmbeddingIsExit4WithHint) {
  TempDir t("noemb");
  RunConfig c = small_config(t.path());
  c.variant = Variant::kInteractionOnly;
  std::string err;
  EXPECT_EQ(run([&] { cmd_train(c, sink); }, &err), kExitMissingArtifact);
  EXPECT_NE(err.find("embed-labels"), std::string::npos) << err;
  c.variant = Variant::kSelfOnly;
  EXPECT_EQ(run([&] { cmd_train(c, sink); }), kExitOk);
}

TEST(Train, EmbeddingWithWrongRIsExit5) {
  TempDir t("wrongr");
  RunConfig c = small_config(t.path());
  ASSERT_EQ(run([&] { cmd_embed_labels(c, sink); }), kExitOk);
  c.model.r = 7;
  EXPECT_EQ(run([&] { cmd_train(c, sink); }), kExitIncompatible);
}

TEST(Train, MissingWordVectorsIsExit2AndBadOnesExit3) {
  TempDir t("wv");
  RunConfig c = small_config(t.path());
  c.variant = Variant::kSelfOnly;
  c.paths.word_vectors = t.path() / "vectors.txt";
  EXPECT_EQ(run([&] { cmd_train(c, sink); }), kExitMissingInput);
  write(c.paths.word_vectors, "w1 1 2\n");  // d = 6 expected
  EXPECT_EQ(run([&] { cmd_train(c, sink); }), kExitMalformed);
  write(c.paths.word_vectors, "w1 1 2 3 4 5 6\n");
  EXPECT_EQ(run([&] { cmd_train(c, sink); }), kExitOk);
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("pipeline");
    cfg_ = small_config(dir_->path());
    ASSERT_EQ(run([] { cmd_build_graph(cfg_, sink); }), kExitOk);
    ASSERT_EQ(run([] { cmd_embed_labels(cfg_, sink); }), kExitOk);
    ASSERT_EQ(run([] { cmd_train(cfg_, sink); }), kExitOk);
  }
  static void TearDownTestSuite() { delete dir_; }
  static inline TempDir* dir_ = nullptr;
  static inline RunConfig cfg_;
};

TEST_F(Pipeline, TrainWritesCheckpointAndLossCsv) {
  EXPECT_TRUE(fs::exists(cfg_.checkpoint_path()));
  std::istringstream csv(read_file(cfg_.paths.out / "loss_history.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,loss");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, cfg_.train.epochs);
  EXPECT_EQ(load_checkpoint(cfg_.checkpoint_path()).state.epoch, cfg_.train.epochs);
}

TEST_F(Pipeline, EvaluateReportHasEveryTau) {
  EvalReport rep;
  ASSERT_EQ(run([&] { rep = cmd_evaluate(cfg_, sink); }), kExitOk);
  const auto j = nlohmann::json::parse(read_file(cfg_.paths.out / "eval_report.json"));
  for (const char* key : {"P@1", "P@3", "P@5", "nDCG@1", "nDCG@3", "nDCG@5"}) {
    ASSERT_TRUE(j["overall"].contains(key)) << key;
    const double v = j["overall"][key];
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(j["doc_count"], 50);
  EXPECT_FALSE(j["histograms"].is_null());
}

TEST_F(Pipeline, PredictTopThreeDescending) {
  RunConfig c = cfg_;
  c.topk = 3;
  c.paths.checkpoint = cfg_.checkpoint_path();
  c.paths.out = dir_->path() / "predict";
  ASSERT_EQ(run([&] { cmd_predict(c, {}, sink); }), kExitOk);
  std::istringstream in(read_file(c.paths.out / "predictions.jsonl"));
  std::size_t docs = 0;
  for (std::string line; std::getline(in, line); ++docs) {
    const auto j = nlohmann::json::parse(line);
    ASSERT_EQ(j["labels"].size(), 3u) << line;
    for (std::size_t i = 1; i < 3; ++i) {
      EXPECT_GE(j["labels"][i - 1]["score"].get<double>(), j["labels"][i]["score"].get<double>());
    }
  }
  EXPECT_EQ(docs, 50u);

  std::vector<Prediction> some;
  ASSERT_EQ(run([&] { some = cmd_predict(c, {"syn-4", "syn-1"}, sink); }), kExitOk);
  ASSERT_EQ(some.size(), 2u);
  EXPECT_EQ(some[0].doc_id, "syn-4");
  EXPECT_EQ(run([&] { cmd_predict(c, {"nope"}, sink); }), kExitMissingInput);
}

TEST_F(Pipeline, ExportAttentionWritesNormalisedWeights) {
  AttentionReport rep;
  ASSERT_EQ(run([&] { rep = cmd_export_attention(cfg_, "syn-2", sink); }), kExitOk);
  EXPECT_TRUE(fs::exists(cfg_.paths.out / "attention_syn-2.json"));
  ASSERT_EQ(rep.labels.size(), cfg_.topk);
  for (const auto& la : rep.labels) {
    double sum = 0.0;
    for (const auto& [tok, w] : la.tokens) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  EXPECT_EQ(run([&] { cmd_export_attention(cfg_, "absent", sink); }), kExitMissingInput);
}

TEST_F(Pipeline, ShapeOrVariantMismatchIsExit5) {
  RunConfig c = cfg_;
  c.model.d = 7;
  std::string err;
  EXPECT_EQ(run([&] { cmd_evaluate(c, sink); }, &err), kExitIncompatible);
  EXPECT_NE(err.find("d 6 vs 7"), std::string::npos) << err;
  c = cfg_;
  c.variant = Variant::kSelfOnly;
  EXPECT_EQ(run([&] { cmd_predict(c, {}, sink); }), kExitIncompatible);
}

TEST_F(Pipeline, MissingOrCorruptCheckpoint) {
  RunConfig c = cfg_;
  c.paths.checkpoint = dir_->path() / "none.ckpt";
  EXPECT_EQ(run([&] { cmd_evaluate(c, sink); }), kExitMissingArtifact);
  std::string bytes = read_file(cfg_.checkpoint_path());
  bytes[bytes.size() / 2] ^= 0x5a;
  write(c.paths.checkpoint, bytes);
  EXPECT_EQ(run([&] { cmd_evaluate(c, sink); }), kExitMalformed);
  bytes = read_file(cfg_.checkpoint_path());
  bytes[8] = 9;  // version field
  write(c.paths.checkpoint, bytes);
  EXPECT_EQ(run([&] { cmd_evaluate(c, sink); }), kExitIncompatible);
}

TEST(Train, ResumeMatchesUninterruptedRunByteForByte) {
  TempDir t("resume");
  RunConfig full = small_config(t.path());
  full.variant = Variant::kSelfOnly;
  full.train.epochs = 4;
  full.paths.out = t.path() / "full";
  ASSERT_EQ(run([&] { cmd_train(full, sink); }), kExitOk);

  RunConfig split = full;
  split.paths.out = t.path() / "split";
  split.train.epochs = 2;
  ASSERT_EQ(run([&] { cmd_train(split, sink); }), kExitOk);
  split.train.epochs = 4;
  split.resume = true;
  ASSERT_EQ(run([&] { cmd_train(split, sink); }), kExitOk);

  EXPECT_EQ(read_file(split.checkpoint_path()), read_file(full.checkpoint_path()));
  EXPECT_EQ(read_file(split.paths.out / "loss_history.csv"), read_file(full.paths.out / "loss_history.csv"));

  split.train.learning_rate *= 2;
  EXPECT_EQ(run([&] { cmd_train(split, sink); }), kExitIncompatible);
}

TEST(Ablate, AllFourVariantsReport) {
  TempDir t("ablate");
  RunConfig c = small_config(t.path());
  c.train.epochs = 1;
  std::vector<AblationEntry> entries;
  ASSERT_EQ(run([&] { cmd_embed_labels(c, sink); }), kExitOk);
  ASSERT_EQ(run([&] { entries = cmd_ablate(c, sink); }), kExitOk);
  ASSERT_EQ(entries.size(), 4u);
  const auto j = nlohmann::json::parse(read_file(c.paths.out / "ablation.json"));
  ASSERT_EQ(j.size(), 4u);
  for (const auto& e : j) {
    EXPECT_TRUE(e["report"]["overall"].contains("P@1"));
    EXPECT_TRUE(fs::exists(c.paths.out / "ablation" / e["variant"].get<std::string>() / "eval_report.json"));
  }
}

TEST(GenerateSynthetic, WritesSplitsWithDistinctIds) {
  TempDir t("synth");
  ASSERT_EQ(run([&] { cmd_generate_synthetic({}, 5, t.path(), sink); }), kExitOk);
  const Corpus train = load_corpus_string(read_file(t.path() / "train.jsonl"));
  const Corpus test = load_corpus_string(read_file(t.path() / "test.jsonl"));
  EXPECT_EQ(train.size(), 50u);
  ASSERT_EQ(test.size(), 5u);
  EXPECT_EQ(test[0].doc_id, "syn-test-0");
  EXPECT_EQ(train[0].doc_id, "syn-0");
}

#ifdef LAHA_CLI_PATH
// Exercises argument parsing and flag precedence through the real executable.
int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Executable, ExitCodesAndFlagOverrides) {
  TempDir t("exe");
  small_config(t.path());
  write(t.path() / "run.ini",
        "[paths]\ntrain = train.jsonl\nout = out\n[model]\nd = 6\nr = 5\nd_a = 4\nmax_len = 20\n"
        "[train]\nepochs = 1\n[run]\nvariant = laha\n");
  const std::string exe = std::string(LAHA_CLI_PATH) + " --config " + (t.path() / "run.ini").string();
  EXPECT_EQ(shell(exe + " build-graph"), 0);
  EXPECT_EQ(shell(exe + " train"), 4);                   // laha needs the embedding
  EXPECT_EQ(shell(exe + " --variant sa train"), 0);      // flag wins over the file
  EXPECT_EQ(shell(exe + " --variant sa evaluate"), 0);
  EXPECT_EQ(shell(exe + " evaluate"), 5);                 // checkpoint is sa, config says laha
  EXPECT_EQ(shell(exe + " --out " + (t.path() / "elsewhere").string() + " --variant sa evaluate"), 4);
  EXPECT_TRUE(fs::exists(t.path() / "out" / "eval_report.json"));
  EXPECT_EQ(shell(std::string(LAHA_CLI_PATH) + " --config " + (t.path() / "nope.ini").string() + " train"), 2);
  write(t.path() / "bad.ini", "[model]\ncolour = red\n");
  EXPECT_EQ(shell(std::string(LAHA_CLI_PATH) + " --config " + (t.path() / "bad.ini").string() + " train"), 3);
}
#endif

}  // namespace
}  // namespace laha::app
