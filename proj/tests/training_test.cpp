// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>

#include "laha/data/synthetic.hpp"
#include "laha/numeric/grad_check.hpp"
#include "laha/training/checkpoint.hpp"
#include "test_util.hpp"

namespace laha {
namespace {

using testing::random_matrix;

// ---------------------------------------------------------------- sampling

TEST(SampleLabels, PositivesPlusDistinctNegatives) {
  Rng rng(11);
  const std::vector<std::size_t> pos = {1, 3};
  for (int trial = 0; trial < 200; ++trial) {
    auto s = sample_labels(pos, 3, 100, rng);
    ASSERT_EQ(s.size(), 5u);
    EXPECT_EQ(s[0], 1u);
    EXPECT_EQ(s[1], 3u);
    std::set<std::size_t> uniq(s.begin(), s.end());
    EXPECT_EQ(uniq.size(), 5u);
    for (std::size_t i = 2; i < s.size(); ++i) {
      EXPECT_NE(s[i], 1u);
      EXPECT_NE(s[i], 3u);
      EXPECT_LT(s[i], 100u);
    }
  }
}

TEST(SampleLabels, WholeComplementWhenNegativesExceedIt) {
  Rng rng(1);
  auto s = sample_labels(std::vector<std::size_t>{2}, 10, 5, rng);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(s, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(SampleLabels, ZeroNegativesGivesPositivesOnly) {
  Rng rng(1);
  EXPECT_EQ(sample_labels(std::vector<std::size_t>{4, 0}, 0, 9, rng), (std::vector<std::size_t>{0, 4}));
}

TEST(SampleLabels, EmptyPositivesRejected) {
  Rng rng(1);
  EXPECT_THROW(sample_labels({}, 3, 10, rng), ValidationError);
  EXPECT_THROW(sample_labels(std::vector<std::size_t>{10}, 3, 10, rng), ValidationError);
}

TEST(SampleLabels, DeterministicGivenRngState) {
  Rng a(99), b(99);
  const std::vector<std::size_t> pos = {5};
  EXPECT_EQ(sample_labels(pos, 4, 50, a), sample_labels(pos, 4, 50, b));
}

TEST(SampleLabels, SupersetAndSizeBoundProperty) {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.below(40);
    const std::size_t np = 1 + rng.below(std::min<std::size_t>(k, 5));
    std::set<std::size_t> pos_set;
    while (pos_set.size() < np) pos_set.insert(rng.below(k));
    const std::vector<std::size_t> pos(pos_set.begin(), pos_set.end());
    const std::size_t neg = rng.below(45);
    const auto s = sample_labels(pos, neg, k, rng);
    std::set<std::size_t> got(s.begin(), s.end());
    ASSERT_EQ(got.size(), s.size());
    EXPECT_EQ(s.size(), std::min(k, pos.size() + neg));
    for (auto p : pos) EXPECT_TRUE(got.count(p));
  }
}

// Dense and sparse branches should both draw every complement label.
TEST(SampleLabels, NegativesCoverComplement) {
  for (std::size_t neg : {2u, 6u}) {
    Rng rng(5);
    std::vector<int> hits(10, 0);
    for (int t = 0; t < 2000; ++t) {
      auto s = sample_labels(std::vector<std::size_t>{0}, neg, 10, rng);
      for (std::size_t i = 1; i < s.size(); ++i) ++hits[s[i]];
    }
    EXPECT_EQ(hits[0], 0);
    const double expected = 2000.0 * static_cast<double>(neg) / 9.0;
    for (std::size_t l = 1; l < 10; ++l) EXPECT_NEAR(hits[l], expected, 0.15 * expected) << "label " << l;
  }
}

// ---------------------------------------------------------------- loss

TEST(BceLoss, HalfEverywhereIsLn2PerLabel) {
  const std::vector<double> p(6, 0.5);
  const std::vector<double> y = {1, 0, 0, 1, 1, 0};
  EXPECT_NEAR(bce_sum(p, y), 6.0 * std::log(2.0), 1e-15);
}

TEST(BceLoss, ExactPredictionIsNearZero) {
  const std::vector<double> y = {1, 0, 1};
  const double bound = 3.0 * -std::log(1.0 - kProbClamp);
  EXPECT_LE(bce_sum(y, y), bound + 1e-18);
  EXPECT_GE(bce_sum(y, y), 0.0);
}

TEST(BceLoss, LengthMismatchIsShapeError) {
  const std::vector<double> p = {0.2, 0.3};
  const std::vector<double> y = {1.0};
  EXPECT_THROW(bce_sum(p, y), DimensionError);
  Tape tape;
  Var v = tape.variable(Matrix(1, 2, 0.4));
  EXPECT_THROW(bce_loss(v, y), DimensionError);
}

TEST(BceLoss, GradientMatchesClosedFormAndFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t kp = 1 + rng.below(8);
    Matrix p = random_matrix(1, kp, rng, 0.05, 0.95);
    std::vector<double> y(kp);
    for (auto& t : y) t = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const double n = 1.0 + static_cast<double>(rng.below(4));
    Tape tape;
    Var pv = tape.variable(p);
    Var loss = bce_loss(pv, y, 1.0 / n);
    tape.backward(loss);
    for (std::size_t j = 0; j < kp; ++j) {
      const double closed = (p[j] - y[j]) / (p[j] * (1.0 - p[j])) / n;
      EXPECT_NEAR(pv.grad()[j], closed, 1e-12 * std::max(1.0, std::abs(closed)));
    }
    const double err = grad_check(
        [&](Tape&, std::span<const Var> in) { return bce_loss(in[0], y, 1.0 / n); }, {p}, 1e-6);
    EXPECT_LE(err, 1e-6);
  }
}

TEST(BceLoss, ClampedEntriesHaveZeroGradient) {
  Tape tape;
  Var p = tape.variable(Matrix{{0.0, 1.0, 0.3}});
  const std::vector<double> y = {1.0, 0.0, 1.0};
  Var loss = bce_loss(p, y);
  EXPECT_TRUE(std::isfinite(loss.value()[0]));
  tape.backward(loss);
  EXPECT_EQ(p.grad()[0], 0.0);
  EXPECT_EQ(p.grad()[1], 0.0);
  EXPECT_NE(p.grad()[2], 0.0);
}

// ---------------------------------------------------------------- Adam

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Matrix w{{1.5, -2.0}, {0.25, 4.0}};
  const Matrix before = w;
  Matrix g(2, 2);
  AdamState st;
  for (int i = 0; i < 3; ++i) adam_step(std::vector<ParamRef>{{"w", &w, &g}}, st, 0.1);
  EXPECT_EQ(w, before);
  EXPECT_EQ(st.m[0], Matrix(2, 2));
  EXPECT_EQ(st.v[0], Matrix(2, 2));
  EXPECT_EQ(st.step, 3u);
}

TEST(Adam, FirstStepMagnitudeIsBoundedByLearningRate) {
  Rng rng(8);
  const double lr = 0.01;
  for (int t = 0; t < 200; ++t) {
    const double g0 = rng.uniform(-5.0, 5.0) * std::pow(10.0, -static_cast<double>(rng.below(9)));
    Matrix w(1, 1, rng.uniform(-1, 1));
    const double before = w[0];
    Matrix g(1, 1, g0);
    AdamState st;
    adam_step(std::vector<ParamRef>{{"w", &w, &g}}, st, lr);
    const double delta = w[0] - before;
    const double lo = lr * (1.0 - st.config.eps / (std::abs(g0) + st.config.eps));
    EXPECT_GE(std::abs(delta), lo * (1 - 1e-12));
    EXPECT_LE(std::abs(delta), lr * (1 + 1e-12));
    EXPECT_EQ(std::signbit(delta), !std::signbit(g0));
  }
}

TEST(Adam, MatchesScalarOracleOnQuadratic) {
  // Independent scalar Adam on f(x) = x^2.
  double x = 1.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> oracle;
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * x;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
    oracle.push_back(x);
  }
  Matrix w(1, 1, 1.0), g(1, 1);
  AdamState st;
  for (int t = 0; t < 3; ++t) {
    g[0] = 2.0 * w[0];
    adam_step(std::vector<ParamRef>{{"x", &w, &g}}, st, lr);
    EXPECT_NEAR(w[0], oracle[t], 1e-12) << "step " << t + 1;
  }
}

TEST(Adam, NonFiniteGradientNamesParameterAndWritesNothing) {
  Matrix a(1, 2, 1.0), b(2, 1, 2.0);
  Matrix ga(1, 2, 0.5), gb(2, 1, 0.1);
  gb[1] = std::nan("");
  AdamState st;
  std::vector<ParamRef> refs = {{"alpha", &a, &ga}, {"beta_weights", &b, &gb}};
  try {
    adam_step(refs, st, 0.1);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("beta_weights"), std::string::npos);
  }
  EXPECT_EQ(a, Matrix(1, 2, 1.0));
  EXPECT_EQ(st.step, 0u);
  EXPECT_TRUE(st.m.empty());
}

TEST(Adam, ShapeMismatchRejected) {
  Matrix w(2, 2), g(2, 1);
  AdamState st;
  EXPECT_THROW(adam_step(std::vector<ParamRef>{{"w", &w, &g}}, st, 0.1), DimensionError);
}

// ---------------------------------------------------------------- micro model

struct MicroSetup {
  Model model;
  std::vector<TrainingExample> examples;
};

// n=4, d=5, r=3, d_a=3, k=4; the second document is padded by one position.
MicroSetup micro_setup(std::uint64_t seed, Variant variant = Variant::kFused) {
  MicroSetup s;
  s.model.config = {.vocab_size = 9, .d = 5, .r = 3, .d_a = 3, .k = 4, .max_len = 4};
  s.model.variant = variant;
  s.model.params = init_params(s.model.config, seed);
  Rng rng(derive_seed(seed, {77}));
  // Non-zero biases so their gradients are exercised away from the origin.
  s.model.params.for_each([&](const char* name, Matrix& m) {
    const std::string n = name;
    if (n.ends_with(".bias") || n.ends_with(".b") || n == "b_o") m = random_matrix(m.rows(), m.cols(), rng, -0.3, 0.3);
  });
  s.model.label_matrix = random_matrix(3, 4, rng);
  Vocabulary vocab;
  for (int i = 0; i < 7; ++i) vocab.add("t" + std::to_string(i));
  Document a{"a", {"t0", "t3", "t5", "t1"}, {0, 2}};
  Document b{"b", {"t6", "t2", "t4"}, {1}};
  s.examples = make_examples({a, b}, vocab, 4);
  return s;
}

std::vector<BatchItem> full_batch(const MicroSetup& s) {
  std::vector<BatchItem> batch;
  for (const auto& ex : s.examples) batch.push_back(make_batch_item(ex, all_labels(s.model.config.k)));
  return batch;
}

// Central differences over every parameter entry against the reverse-mode gradient.
double full_model_gradient_error(MicroSetup s, std::span<const BatchItem> batch, double eps = 1e-5) {
  ModelParams grads = s.model.params.zeros_like();
  batch_loss(s.model, batch, &grads);
  double worst = 0.0;
  auto params = s.model.params.named();
  auto gnamed = grads.named();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& w = *params[p].second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + eps;
      const double up = batch_loss(s.model, batch, nullptr);
      w[i] = orig - eps;
      const double down = batch_loss(s.model, batch, nullptr);
      w[i] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double err = relative_error((*gnamed[p].second)[i], numeric, 1e-6);
      EXPECT_LE(err, 1e-4) << params[p].first << "[" << i << "] analytic " << (*gnamed[p].second)[i] << " numeric "
                           << numeric;
      worst = std::max(worst, err);
    }
  }
  return worst;
}

TEST(MicroModel, FullGradientMatchesFiniteDifferences) {
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto s = micro_setup(seed);
    const auto batch = full_batch(s);
    EXPECT_LE(full_model_gradient_error(s, batch), 1e-4);
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);
}

TEST(MicroModel, EveryVariantHasCorrectGradient) {
  for (auto v : {Variant::kSelfOnly, Variant::kInteractionOnly, Variant::kAveraged}) {
    auto s = micro_setup(4, v);
    EXPECT_LE(full_model_gradient_error(s, full_batch(s)), 1e-4) << to_string(v);
  }
}

TEST(MicroModel, SingleDocumentTwoLabelLossGradient) {
  auto s = micro_setup(5);
  s.examples.resize(1);
  std::vector<BatchItem> batch = {make_batch_item(s.examples[0], {0, 3})};
  ASSERT_EQ(batch[0].targets, (std::vector<double>{1.0, 0.0}));
  EXPECT_LE(full_model_gradient_error(s, batch), 1e-4);
}

TEST(MicroModel, FrozenWordVectorsReceiveNoGradient) {
  auto s = micro_setup(6);
  const auto batch = full_batch(s);
  ModelParams grads = s.model.params.zeros_like();
  batch_loss(s.model, batch, &grads, /*finetune_embedding=*/false);
  EXPECT_EQ(grads.embedding, Matrix(9, 5));
  EXPECT_NE(grads.w_o, Matrix(1, 3));
}

TEST(Descent, SmallAdamStepDoesNotIncreaseFixedBatchLoss) {
  int violations = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    auto s = micro_setup(100 + trial);
    const auto batch = full_batch(s);
    ModelParams grads = s.model.params.zeros_like();
    const double before = batch_loss(s.model, batch, &grads);
    AdamState st;
    adam_step(s.model.params, grads, st, 1e-4);
    const double after = batch_loss(s.model, batch, nullptr);
    if (after > before) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

// ---------------------------------------------------------------- training loop

struct SyntheticSetup {
  Model model;
  Vocabulary vocab;
  std::vector<TrainingExample> examples;
  TrainConfig cfg;
};

SyntheticSetup synthetic_setup(Variant variant = Variant::kFused, std::size_t epochs = 5) {
  SyntheticSetup s;
  const Corpus corpus = generate_synthetic({});
  s.vocab = build_vocab(corpus);
  s.model.config = {.vocab_size = s.vocab.size(), .d = 8, .r = 8, .d_a = 8, .k = 8, .max_len = 20};
  s.model.variant = variant;
  s.model.params = init_params(s.model.config, 3);
  Rng rng(4);
  s.model.label_matrix = random_matrix(8, 8, rng);
  s.examples = make_examples(corpus, s.vocab, 20);
  s.cfg = {.learning_rate = 0.01, .batch_size = 10, .epochs = epochs, .negatives_per_doc = 3, .seed = 5};
  return s;
}

TEST(Train, ZeroEpochsReturnsParamsUnchanged) {
  auto s = synthetic_setup(Variant::kFused, 0);
  const auto r = train(s.model, s.examples, s.cfg);
  EXPECT_EQ(r.params, s.model.params);
  EXPECT_TRUE(r.loss_history.empty());
}

TEST(Train, IdenticalSeedsGiveIdenticalRuns) {
  auto s = synthetic_setup(Variant::kFused, 2);
  const auto a = train(s.model, s.examples, s.cfg);
  const auto b = train(s.model, s.examples, s.cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.loss_history, b.loss_history);
  s.cfg.seed = 6;
  const auto c = train(s.model, s.examples, s.cfg);
  EXPECT_NE(a.loss_history, c.loss_history);
}

TEST(Train, EpochMeanLossDecreasesOverFirstFiveEpochs) {
  auto s = synthetic_setup(Variant::kFused, 5);
  s.cfg.negatives_per_doc = 10;  // whole label set, so epochs score the same pairs
  const auto r = train(s.model, s.examples, s.cfg);
  ASSERT_EQ(r.loss_history.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(r.loss_history[e], r.loss_history[e - 1]) << "epoch " << e;
}

TEST(Train, PaddingRowStaysZeroAndFrozenEmbeddingIsUntouched) {
  auto s = synthetic_setup(Variant::kFused, 2);
  s.model.params.embedding.row_span(Vocabulary::kPad)[0] = 0.0;
  const auto r = train(s.model, s.examples, s.cfg);
  for (double x : r.params.embedding.row_span(Vocabulary::kPad)) EXPECT_EQ(x, 0.0);
  s.cfg.finetune_word_vectors = false;
  const auto f = train(s.model, s.examples, s.cfg);
  EXPECT_EQ(f.params.embedding, s.model.params.embedding);
  EXPECT_NE(f.params.w_q, s.model.params.w_q);
}

TEST(Train, LabelMatrixIsNeverModified) {
  auto s = synthetic_setup(Variant::kFused, 1);
  const Matrix before = s.model.label_matrix;
  TrainingState st;
  train_epochs(s.model, s.examples, s.cfg, st);
  EXPECT_EQ(s.model.label_matrix, before);
}

TEST(Train, RejectsEmptyCorpusAndBadConfig) {
  auto s = synthetic_setup(Variant::kFused, 1);
  EXPECT_THROW(train(s.model, {}, s.cfg), ValidationError);
  s.cfg.learning_rate = 0.0;
  EXPECT_THROW(train(s.model, s.examples, s.cfg), ValidationError);
  s.cfg.learning_rate = 0.01;
  s.cfg.batch_size = 0;
  EXPECT_THROW(train(s.model, s.examples, s.cfg), ValidationError);
}

TEST(Train, NonFiniteLossReportsCoordinates) {
  auto s = synthetic_setup(Variant::kFused, 1);
  s.model.params.w_o[0] = std::nan("");
  try {
    train(s.model, s.examples, s.cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0, batch 0"), std::string::npos) << e.what();
  }
}

// ---------------------------------------------------------------- checkpoint

Checkpoint trained_checkpoint(std::size_t epochs) {
  auto s = synthetic_setup(Variant::kFused, epochs);
  Checkpoint c{s.model, s.vocab, s.cfg, {}};
  train_epochs(c.model, s.examples, c.train, c.state);
  return c;
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const Checkpoint c = trained_checkpoint(1);
  const Checkpoint back = parse_checkpoint(serialize_checkpoint(c));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(c));
}

TEST(Checkpoint, SpecialValuesSurvive) {
  Checkpoint c = trained_checkpoint(0);
  c.model.params.w_o[0] = -0.0;
  c.model.params.w_o[1] = std::numeric_limits<double>::denorm_min();
  c.model.params.w_o[2] = 0.1 + 0.2;
  const Checkpoint back = parse_checkpoint(serialize_checkpoint(c));
  EXPECT_TRUE(std::signbit(back.model.params.w_o[0]));
  EXPECT_EQ(back.model.params.w_o[1], std::numeric_limits<double>::denorm_min());
  EXPECT_EQ(back.model.params.w_o[2], 0.1 + 0.2);
}

TEST(Checkpoint, ResumeReproducesUninterruptedRun) {
  const Checkpoint straight = trained_checkpoint(2);

  auto s = synthetic_setup(Variant::kFused, 2);
  Checkpoint c{s.model, s.vocab, s.cfg, {}};
  TrainConfig first = c.train;
  first.epochs = 1;
  train_epochs(c.model, s.examples, first, c.state);

  const auto path = std::filesystem::temp_directory_path() / "laha_resume_test.ckpt";
  save_checkpoint(path, c);
  Checkpoint resumed = load_checkpoint(path);
  std::filesystem::remove(path);
  train_epochs(resumed.model, s.examples, resumed.train, resumed.state);

  EXPECT_EQ(resumed.model.params, straight.model.params);
  EXPECT_EQ(resumed.state.adam, straight.state.adam);
  EXPECT_EQ(resumed.state.loss_history, straight.state.loss_history);
}

TEST(Checkpoint, CorruptionIsFormatError) {
  const std::string good = serialize_checkpoint(trained_checkpoint(1));
  std::string flipped = good;
  flipped[flipped.size() - 3] ^= 0x40;
  EXPECT_THROW(parse_checkpoint(flipped), FormatError);
  EXPECT_THROW(parse_checkpoint(good.substr(0, good.size() - 8)), FormatError);
  EXPECT_THROW(parse_checkpoint(good + "x"), FormatError);
  EXPECT_THROW(parse_checkpoint(good.substr(0, 30)), FormatError);
  EXPECT_THROW(parse_checkpoint("not a checkpoint"), FormatError);
  std::string bad_header = good;
  bad_header[21] = '#';
  EXPECT_THROW(parse_checkpoint(bad_header), FormatError);
}

TEST(Checkpoint, VersionMismatchIsIncompatible) {
  std::string bytes = serialize_checkpoint(trained_checkpoint(0));
  bytes[8] = 2;
  EXPECT_THROW(parse_checkpoint(bytes), IncompatibleCheckpointError);
}

TEST(Checkpoint, FailedLoadLeavesDestinationUntouched) {
  Checkpoint target = trained_checkpoint(0);
  const Checkpoint copy = target;
  std::string bytes = serialize_checkpoint(trained_checkpoint(1));
  bytes.back() ^= 1;
  try {
    target = parse_checkpoint(bytes);
  } catch (const FormatError&) {
  }
  EXPECT_TRUE(target == copy);
}

TEST(Checkpoint, AtomicSaveLeavesNoTempFile) {
  const auto dir = std::filesystem::temp_directory_path() / "laha_ckpt_dir";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir / "m.ckpt", trained_checkpoint(0));
  EXPECT_TRUE(std::filesystem::exists(dir / "m.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace laha
