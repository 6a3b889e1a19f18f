// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "laha/data/corpus.hpp"
#include "laha/data/vocabulary.hpp"
#include "laha/model/forward.hpp"
#include "laha/random.hpp"
#include "laha/training/adam.hpp"
#include "laha/training/loss.hpp"
#include "laha/training/sampler.hpp"

namespace laha {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::size_t negatives_per_doc = 10;
  std::uint64_t seed = 1;
  bool finetune_word_vectors = true;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ValidationError("learning_rate must be positive");
    }
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  }
  bool operator==(const TrainConfig&) const = default;
};

struct TrainingExample {
  EncodedDocument doc;
  std::vector<std::size_t> labels;  // sorted positives
};

inline std::vector<TrainingExample> make_examples(const Corpus& corpus, const Vocabulary& vocab, std::size_t max_len) {
  std::vector<TrainingExample> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) {
    if (d.labels.empty()) throw ValidationError("document '" + d.doc_id + "' has no labels; cannot train on it");
    out.push_back({encode_document(d, vocab, max_len), d.labels});
  }
  return out;
}

/// One document of a batch with the label subset it is scored on.
struct BatchItem {
  const EncodedDocument* doc = nullptr;
  std::vector<std::size_t> labels;
  std::vector<double> targets;  // 1 for positives, aligned with labels
};

inline BatchItem make_batch_item(const TrainingExample& ex, std::vector<std::size_t> subset) {
  BatchItem item{&ex.doc, std::move(subset), {}};
  item.targets.reserve(item.labels.size());
  for (auto l : item.labels) {
    item.targets.push_back(std::binary_search(ex.labels.begin(), ex.labels.end(), l) ? 1.0 : 0.0);
  }
  return item;
}

/// Mean over the batch of per-document summed BCE. With `grads` non-null the
/// gradient is added to it, one document at a time in batch order.
inline double batch_loss(const Model& model, std::span<const BatchItem> batch, ModelParams* grads,
                         bool finetune_embedding = true) {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& item : batch) {
    Tape tape;
    BoundParams b = bind_params(tape, model, item.doc->ids, grads, finetune_embedding);
    ForwardVars v = forward_on_tape(model, b, item.doc->mask, item.labels);
    Var loss = bce_loss(v.prediction.probs, item.targets, scale);
    total += loss.value()[0];
    if (grads) tape.backward(loss);
  }
  return total;
}

struct TrainingState {
  AdamState adam;
  std::size_t epoch = 0;             // completed epochs
  std::vector<double> loss_history;  // epoch-mean per-document loss

  bool operator==(const TrainingState&) const = default;
};

// Stream tags keep the shuffle and sampling generators independent.
inline constexpr std::uint64_t kShuffleStream = 1;
inline constexpr std::uint64_t kSampleStream = 2;

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {kShuffleStream, epoch}));
  shuffle(order, rng);
  return order;
}

using EpochCallback = std::function<void(const Model&, const TrainingState&)>;

/// Continues training from `state.epoch` up to `cfg.epochs`. Every random
/// draw is derived from (seed, epoch, document), so stopping after any epoch
/// and resuming from the saved state reproduces an uninterrupted run.
inline void train_epochs(Model& model, std::span<const TrainingExample> data, const TrainConfig& cfg,
                         TrainingState& state, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  model.validate();
  if (state.epoch >= cfg.epochs) return;
  if (data.empty()) throw ValidationError("train: corpus is empty");
  for (const auto& ex : data) {
    if (ex.labels.empty()) throw ValidationError("train: document without labels");
    if (ex.labels.back() >= model.config.k) {
      throw ValidationError("train: label " + std::to_string(ex.labels.back()) + " >= k=" +
                            std::to_string(model.config.k));
    }
  }

  ModelParams grads = model.params.zeros_like();
  for (std::size_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), cfg.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<BatchItem> batch;
      batch.reserve(stop - start);
      for (std::size_t pos = start; pos < stop; ++pos) {
        const std::size_t idx = order[pos];
        Rng rng(derive_seed(cfg.seed, {kSampleStream, epoch, idx}));
        batch.push_back(make_batch_item(
            data[idx], sample_labels(data[idx].labels, cfg.negatives_per_doc, model.config.k, rng)));
      }
      grads.set_zero();
      const double loss = batch_loss(model, batch, &grads, cfg.finetune_word_vectors);
      if (!std::isfinite(loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no));
      }
      // The padding row stays zero.
      for (auto& g : grads.embedding.row_span(Vocabulary::kPad)) g = 0.0;
      adam_step(model.params, grads, state.adam, cfg.learning_rate);
      epoch_loss += loss * static_cast<double>(batch.size());
    }
    state.loss_history.push_back(epoch_loss / static_cast<double>(data.size()));
    state.epoch = epoch + 1;
    if (on_epoch) on_epoch(model, state);
  }
}

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_history;
};

inline TrainResult train(Model model, std::span<const TrainingExample> data, const TrainConfig& cfg) {
  TrainingState state;
  train_epochs(model, data, cfg, state);
  return {std::move(model.params), std::move(state.loss_history)};
}

}  // namespace laha
