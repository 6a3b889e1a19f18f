// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Options given on the command line override the
// config file.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "laha/app/commands.hpp"
#include "laha/app/config.hpp"

namespace {

using namespace laha;
using namespace laha::app;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> topk;
  std::optional<std::string> out;
  bool resume = false;
};

RunConfig effective_config(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.variant) cfg.variant = parse_variant(*o.variant);
  if (o.topk) cfg.topk = *o.topk;
  if (o.out) cfg.paths.out = *o.out;
  if (o.resume) cfg.resume = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-graph attention model for multi-label text classification"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "config file (INI style; see `laha config-keys`)");
  app.add_option("--seed", o.seed, "run seed");
  app.add_option("--variant", o.variant, "model variant")->check(CLI::IsMember({"sa", "ia", "sa+ia", "laha"}));
  app.add_option("--topk", o.topk, "labels per document for predict and export-attention")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "output directory");

  auto* build_graph = app.add_subcommand("build-graph", "build the label co-occurrence graph");
  auto* embed = app.add_subcommand("embed-labels", "node2vec label embedding from the graph");
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_flag("--resume", o.resume, "continue from an existing checkpoint");
  auto* evaluate = app.add_subcommand("evaluate", "P@k / nDCG@k report for the test corpus");
  auto* predict = app.add_subcommand("predict", "top-k labels per document as JSON lines");
  std::vector<std::string> doc_ids;
  predict->add_option("doc_ids", doc_ids, "restrict to these document ids");
  auto* attention = app.add_subcommand("export-attention", "per-token attention for one document");
  std::string doc_id;
  attention->add_option("doc_id", doc_id, "document id")->required();
  auto* ablate = app.add_subcommand("ablate", "train and evaluate all four variants");
  auto* synth = app.add_subcommand("generate-synthetic", "write the seeded synthetic corpus");
  SyntheticConfig sc;
  std::size_t test_docs = 20;
  synth->add_option("--docs", sc.docs, "training documents")->capture_default_str();
  synth->add_option("--test-docs", test_docs, "test documents")->capture_default_str();
  synth->add_option("--labels", sc.labels, "label count")->capture_default_str();
  auto* keys = app.add_subcommand("config-keys", "list the accepted config keys");

  CLI11_PARSE(app, argc, argv);

  return run_command(
      [&] {
        if (keys->parsed()) {
          std::cout << config_keys();
          return;
        }
        if (synth->parsed()) {
          if (o.seed) sc.seed = *o.seed;
          sc.validate();
          cmd_generate_synthetic(sc, test_docs, o.out.value_or("."), std::cout);
          return;
        }
        const RunConfig cfg = effective_config(o);
        if (build_graph->parsed()) std::cout << to_json(cmd_build_graph(cfg, std::cerr)).dump() << "\n";
        if (embed->parsed()) cmd_embed_labels(cfg, std::cerr);
        if (train->parsed()) cmd_train(cfg, std::cerr);
        if (evaluate->parsed()) std::cout << to_json(cmd_evaluate(cfg, std::cerr)).dump(2) << "\n";
        if (predict->parsed()) {
          const auto preds = cmd_predict(cfg, doc_ids, std::cerr);
          const auto names = laha::app::detail::read_label_names(cfg);
          for (const auto& p : preds) std::cout << to_json(p, names).dump() << "\n";
        }
        if (attention->parsed()) std::cout << to_json(cmd_export_attention(cfg, doc_id, std::cerr)).dump(2) << "\n";
        if (ablate->parsed()) cmd_ablate(cfg, std::cerr);
      },
      std::cerr);
}
