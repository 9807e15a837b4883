#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "csk/error.hpp"
#include "csk/harness.hpp"
#include "csk/neural.hpp"

using namespace csk;
using namespace csk::nn;

namespace {

Dataset random_dataset(std::size_t n, int t_len, int dim, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset d;
  for (std::size_t k = 0; k < n; ++k) {
    LabeledSequence s;
    s.x.resize(t_len, dim);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) s.x.data()[i] = g(rng);
    s.label = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
    d.push_back(std::move(s));
  }
  return d;
}

// Two classes whose first feature sits near +1 or -1 at every step.
Dataset separable_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.2);
  Dataset d;
  for (std::size_t k = 0; k < n; ++k) {
    LabeledSequence s;
    s.label = static_cast<int>(k % 2);
    s.x.resize(4, 2);
    for (Eigen::Index t = 0; t < 4; ++t) {
      s.x(t, 0) = (s.label == 0 ? 1.0 : -1.0) + g(rng);
      s.x(t, 1) = g(rng);
    }
    d.push_back(std::move(s));
  }
  return d;
}

double loss_of(const BiLstmModel& m, const SequenceBatch& b, const DropoutMasks& masks) {
  return cross_entropy(bilstm_forward(m, b, true, &masks).logits, b.labels);
}

// Central differences against the analytic gradient; returns the worst relative error.
double gradient_check(int hidden, int t_len, int dim, int classes, int batch, std::uint64_t seed) {
  BiLstmModel m = BiLstmModel::initialized(2, hidden, dim, classes, 0.2, seed);
  // Non-zero biases so every bias path is exercised.
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& layer : m.lstm)
    for (auto& w : layer)
      for (Eigen::Index i = 0; i < w.b.size(); ++i) w.b(i) += u(rng);
  for (Eigen::Index i = 0; i < m.b1.size(); ++i) m.b1(i) = u(rng);
  for (Eigen::Index i = 0; i < m.b2.size(); ++i) m.b2(i) = u(rng);

  const Dataset data = random_dataset(static_cast<std::size_t>(batch), t_len, dim, classes, seed + 2);
  const SequenceBatch b = make_batch(data);
  const DropoutMasks masks = sample_masks(m, b.length(), b.batch_size(), rng);
  const BiLstmModel grad = backward(m, bilstm_forward(m, b, true, &masks), b);

  const double eps = 1e-5;
  double worst = 0.0;
  auto params = m.tensors();
  const auto grads = grad.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double saved = params[k][i];
      params[k][i] = saved + eps;
      const double up = loss_of(m, b, masks);
      params[k][i] = saved - eps;
      const double down = loss_of(m, b, masks);
      params[k][i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grads[k][i];
      // Below 1e-6 the comparison turns absolute: central differences at this
      // step carry ~1e-11 of rounding noise.
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

double norm_of(const BiLstmModel& m) {
  double s = 0.0;
  for (const auto& t : m.tensors())
    for (double v : t) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST(Batch, TimeMajorLayout) {
  const Dataset d = random_dataset(3, 5, 2, 2, 1);
  const SequenceBatch b = make_batch(d);
  ASSERT_EQ(b.length(), 5);
  ASSERT_EQ(b.batch_size(), 3);
  ASSERT_EQ(b.input_dim(), 2);
  EXPECT_DOUBLE_EQ(b.steps[4](1, 2), d[2].x(4, 1));
  Dataset ragged = d;
  ragged[1].x.resize(4, 2);
  EXPECT_THROW(make_batch(ragged), Error);
}

TEST(Forward, ZeroModelEmitsOutputBias) {
  BiLstmModel m = BiLstmModel::zeros(2, 4, 3, 5, 0.2);
  m.b2 << 0.1, -0.2, 0.3, 0.0, 2.0;
  const ForwardCache fc = bilstm_forward(m, make_batch(random_dataset(4, 6, 3, 5, 2)), false);
  EXPECT_EQ(fc.h_final, Eigen::MatrixXd::Zero(8, 4));
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_EQ(fc.logits.col(j), m.b2);
}

TEST(Forward, SingleCellMatchesHandComputation) {
  BiLstmModel m = BiLstmModel::zeros(1, 1, 1, 2, 0.0);
  m.lstm[0][0].wx << 0.5, -0.3, 0.8, 0.2;
  m.lstm[0][0].wh << 0.9, 0.9, 0.9, 0.9;  // unused at T = 1
  m.lstm[0][0].b << 0.1, 1.0, -0.2, 0.05;
  m.lstm[0][1].wx << -0.4, 0.6, 0.3, -0.7;
  m.lstm[0][1].b << 0.2, 0.9, 0.1, -0.1;
  m.w1 << 0.7, -1.1;
  m.b1 << 0.3;
  m.w2 << 1.5, -0.8;
  m.b2 << 0.05, -0.02;
  Dataset d(1);
  d[0].x = Eigen::MatrixXd::Constant(1, 1, 0.9);
  const ForwardCache fc = bilstm_forward(m, make_batch(d), false);
  // Worked by hand: h_fwd, h_bwd, W1 h + b1, then the output layer.
  EXPECT_NEAR(fc.h_final(0, 0), 0.16382448573159777, 1e-12);
  EXPECT_NEAR(fc.h_final(1, 0), 0.05249989244548802, 1e-12);
  EXPECT_NEAR(fc.a1(0, 0), 0.3569272583220816, 1e-12);
  EXPECT_NEAR(fc.logits(0, 0), 0.5853908874831224, 1e-12);
  EXPECT_NEAR(fc.logits(1, 0), -0.30554180665766534, 1e-12);
}

TEST(Forward, ReversedInputWithSwappedDirectionsGivesSameLogits) {
  const int hid = 3;
  const BiLstmModel m = BiLstmModel::initialized(2, hid, 2, 3, 0.2, 5);
  BiLstmModel s = m;
  for (std::size_t layer = 0; layer < 2; ++layer) {
    std::swap(s.lstm[layer][0], s.lstm[layer][1]);
    if (layer > 0) {
      // Upper layers read [h_fwd; h_bwd], whose halves trade places.
      for (auto& w : s.lstm[layer]) {
        const Eigen::MatrixXd wx = w.wx;
        w.wx.leftCols(hid) = wx.rightCols(hid);
        w.wx.rightCols(hid) = wx.leftCols(hid);
      }
    }
  }
  s.w1.leftCols(hid) = m.w1.rightCols(hid);
  s.w1.rightCols(hid) = m.w1.leftCols(hid);

  const Dataset d = random_dataset(3, 5, 2, 3, 9);
  Dataset r = d;
  for (auto& seq : r) seq.x = seq.x.colwise().reverse().eval();
  const Eigen::MatrixXd a = bilstm_forward(m, make_batch(d), false).logits;
  const Eigen::MatrixXd b = bilstm_forward(s, make_batch(r), false).logits;
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, ShapeMismatchAndMissingMasks) {
  const BiLstmModel m = BiLstmModel::initialized(2, 3, 2, 3, 0.2, 1);
  try {
    bilstm_forward(m, make_batch(random_dataset(2, 4, 3, 3, 1)), false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  EXPECT_THROW(bilstm_forward(m, make_batch(random_dataset(2, 4, 2, 3, 1)), true), Error);
}

TEST(Forward, InferenceDropoutIsIdentity) {
  const BiLstmModel m = BiLstmModel::initialized(2, 4, 2, 3, 0.5, 3);
  const SequenceBatch b = make_batch(random_dataset(4, 5, 2, 3, 4));
  DropoutMasks ones;
  ones.between.assign(1, std::vector<Eigen::MatrixXd>(5, Eigen::MatrixXd::Ones(8, 4)));
  ones.head = Eigen::MatrixXd::Ones(4, 4);
  EXPECT_EQ(bilstm_forward(m, b, false).logits, bilstm_forward(m, b, true, &ones).logits);
  EXPECT_EQ(bilstm_forward(m, b, false).logits, bilstm_forward(m, b, false).logits);
}

TEST(Masks, InvertedScaling) {
  const BiLstmModel m = BiLstmModel::initialized(3, 16, 2, 3, 0.2, 3);
  std::mt19937_64 rng(5);
  const DropoutMasks masks = sample_masks(m, 10, 50, rng);
  ASSERT_EQ(masks.between.size(), 2u);
  ASSERT_EQ(masks.between[0].size(), 10u);
  double sum = 0.0, count = 0.0;
  for (const auto& per_t : masks.between)
    for (const auto& mk : per_t)
      for (Eigen::Index i = 0; i < mk.size(); ++i) {
        const double v = mk.data()[i];
        EXPECT_TRUE(v == 0.0 || std::abs(v - 1.25) < 1e-15);
        sum += v;
        count += 1;
      }
  EXPECT_NEAR(sum / count, 1.0, 0.02);
}

TEST(CrossEntropy, UniformLogits) {
  EXPECT_NEAR(cross_entropy(Eigen::MatrixXd::Constant(4, 3, 0.7), {0, 1, 3}), std::log(4.0), 1e-9);
}

TEST(CrossEntropy, SaturatesToZero) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 1);
  z(1, 0) = 20.0;
  EXPECT_LT(cross_entropy(z, {1}), 1e-8);
  z(1, 0) = 800.0;  // overflow without max subtraction
  EXPECT_EQ(cross_entropy(z, {1}), 0.0);
}

TEST(CrossEntropy, MatchesTwoPassOracle) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 3.0);
  Eigen::MatrixXd z(5, 8);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
  std::vector<int> labels{0, 4, 2, 2, 1, 3, 0, 4};
  double oracle = 0.0;
  for (Eigen::Index j = 0; j < 8; ++j) {
    double denom = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i) denom += std::exp(z(i, j));
    oracle += -std::log(std::exp(z(labels[static_cast<std::size_t>(j)], j)) / denom);
  }
  EXPECT_NEAR(cross_entropy(z, labels), oracle / 8, 1e-12);
  const Eigen::MatrixXd p = softmax(z);
  for (Eigen::Index j = 0; j < 8; ++j) EXPECT_NEAR(p.col(j).sum(), 1.0, 1e-12);
}

TEST(Backward, FiniteDifferenceSmallFixture) { EXPECT_LT(gradient_check(3, 4, 2, 3, 2, 21), 1e-4); }

TEST(Backward, FiniteDifferenceRawWidth) { EXPECT_LT(gradient_check(3, 4, 7, 4, 2, 22), 1e-4); }

TEST(Backward, FiniteDifferenceAnchorWidth) { EXPECT_LT(gradient_check(2, 3, 28, 4, 2, 23), 1e-4); }

TEST(Backward, SaturatedCorrectLogitsGiveTinyGradient) {
  BiLstmModel m = BiLstmModel::initialized(2, 3, 2, 3, 0.0, 4);
  m.b2 << 40.0, 0.0, 0.0;
  Dataset d = random_dataset(3, 4, 2, 1, 6);
  const SequenceBatch b = make_batch(d);
  std::mt19937_64 rng(1);
  const DropoutMasks masks = sample_masks(m, b.length(), b.batch_size(), rng);
  const BiLstmModel g = backward(m, bilstm_forward(m, b, true, &masks), b);
  EXPECT_LT(norm_of(g), 1e-6);
}

TEST(Backward, DeterministicForFixedMasks) {
  const BiLstmModel m = BiLstmModel::initialized(2, 4, 3, 3, 0.2, 7);
  const SequenceBatch b = make_batch(random_dataset(5, 4, 3, 3, 8));
  std::mt19937_64 r1(3), r2(3);
  const DropoutMasks m1 = sample_masks(m, 4, 5, r1);
  const DropoutMasks m2 = sample_masks(m, 4, 5, r2);
  const BiLstmModel g1 = backward(m, bilstm_forward(m, b, true, &m1), b);
  const BiLstmModel g2 = backward(m, bilstm_forward(m, b, true, &m2), b);
  const auto t1 = g1.tensors();
  const auto t2 = g2.tensors();
  for (std::size_t k = 0; k < t1.size(); ++k)
    ASSERT_TRUE(std::equal(t1[k].begin(), t1[k].end(), t2[k].begin()));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> g{0.3, -1e3, 1e-2, -4.0};
  AdamState st;
  adam_step({std::span(p)}, {std::span<const double>(g)}, st, 1e-3);
  EXPECT_NEAR(p[0], 1.0 - 1e-3, 1e-6);
  EXPECT_NEAR(p[1], -2.0 + 1e-3, 1e-6);
  EXPECT_NEAR(p[2], 0.5 - 1e-3, 1e-6);
  EXPECT_NEAR(p[3], 3.0 + 1e-3, 1e-6);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.0, 0.0};
  AdamState st;
  for (int i = 0; i < 5; ++i) adam_step({std::span(p)}, {std::span<const double>(g)}, st, 1e-2);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, MatchesScalarRecurrence) {
  std::vector<double> p{0.5, -1.5, 2.0, 0.0, 1e-3};
  std::vector<double> ref = p;
  std::vector<double> m(5, 0.0), v(5, 0.0);
  AdamState st;
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gd(0.0, 1.0);
  for (int step = 1; step <= 100; ++step) {
    std::vector<double> g(5);
    for (std::size_t i = 0; i < 5; ++i) g[i] = gd(rng) + 0.1 * ref[i];
    const double lr = step <= 50 ? 1e-2 : 5e-3;
    adam_step({std::span(p)}, {std::span<const double>(g)}, st, lr);
    for (std::size_t i = 0; i < 5; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(0.9, step));
      const double vh = v[i] / (1.0 - std::pow(0.999, step));
      ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(p[i], ref[i], 1e-12);
}

TEST(Scheduler, HalvesEveryPatienceEpochsOnAPlateau) {
  PlateauScheduler s(1e-3, 0.5, 5);
  EXPECT_DOUBLE_EQ(s.step(1.0), 1e-3);
  for (int round = 1; round <= 4; ++round) {
    for (int k = 1; k < 5; ++k) EXPECT_DOUBLE_EQ(s.step(1.0), 1e-3 * std::pow(0.5, round - 1));
    EXPECT_DOUBLE_EQ(s.step(1.0), 1e-3 * std::pow(0.5, round));
  }
}

TEST(Scheduler, ImprovementResetsAndThresholdApplies) {
  PlateauScheduler s(1.0, 0.5, 2);
  s.step(1.0);
  s.step(1.0);
  s.step(0.5);  // improvement resets the count
  EXPECT_DOUBLE_EQ(s.step(0.5 - 1e-7), 1.0);  // below threshold: not an improvement
  EXPECT_DOUBLE_EQ(s.step(0.5), 0.5);
  EXPECT_THROW(PlateauScheduler(1.0, 1.0, 2), Error);
  EXPECT_THROW(PlateauScheduler(1.0, 0.5, 0), Error);
}

TEST(Train, InjectedPlateauHalvesLearningRate) {
  TrainConfig cfg;
  cfg.hidden = 2;
  cfg.max_epochs = 21;
  cfg.early_stop_patience = 100;
  const TrainResult r = train(separable_dataset(20, 1), 2, cfg, [](int, double) { return 0.7; });
  ASSERT_EQ(r.log.epochs.size(), 21u);
  for (const auto& e : r.log.epochs) {
    const int halvings = (e.epoch - 2) / 5;
    EXPECT_DOUBLE_EQ(e.lr, 1e-3 * std::pow(0.5, std::max(halvings, 0))) << "epoch " << e.epoch;
  }
  EXPECT_TRUE(r.log.no_improvement);
  EXPECT_EQ(r.log.best_epoch, 1);
}

TEST(Train, EarlyStopAfterPatience) {
  TrainConfig cfg;
  cfg.hidden = 2;
  cfg.early_stop_patience = 4;
  const TrainResult r = train(separable_dataset(20, 1), 2, cfg, [](int epoch, double) { return epoch == 1 ? 0.5 : 0.9; });
  EXPECT_EQ(r.log.epochs.size(), 5u);
}

TEST(Train, SeparableFixtureReachesFullAccuracy) {
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.max_epochs = 30;
  cfg.batch_size = 16;
  cfg.seed = 3;
  const TrainResult r = train(separable_dataset(200, 7), 2, cfg);
  EXPECT_DOUBLE_EQ(r.log.epochs[static_cast<std::size_t>(r.log.best_epoch - 1)].val_accuracy, 1.0);
  const Dataset held = separable_dataset(100, 99);
  const Prediction p = predict(r.model, held);
  for (std::size_t i = 0; i < held.size(); ++i) EXPECT_EQ(p.labels[i], held[i].label);
}

TEST(Train, SameSeedSameParameters) {
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.max_epochs = 3;
  cfg.seed = 11;
  const Dataset d = separable_dataset(60, 2);
  const BiLstmModel a = train(d, 2, cfg).model;
  const BiLstmModel b = train(d, 2, cfg).model;
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t k = 0; k < ta.size(); ++k) ASSERT_TRUE(std::equal(ta[k].begin(), ta[k].end(), tb[k].begin()));
}

TEST(Train, RejectsBadInput) {
  TrainConfig cfg;
  Dataset d = separable_dataset(10, 1);
  d[3].label = 5;
  EXPECT_THROW(train(d, 2, cfg), Error);
  EXPECT_THROW(train(separable_dataset(1, 1), 2, cfg), Error);
  cfg.plateau_factor = 1.5;
  EXPECT_THROW(train(separable_dataset(10, 1), 2, cfg), Error);
}

TEST(Predict, ProbabilitiesAndDuplicates) {
  const BiLstmModel m = BiLstmModel::initialized(2, 5, 3, 4, 0.2, 13);
  Dataset d = random_dataset(6, 4, 3, 4, 14);
  d[4] = d[1];
  const Prediction p = predict(m, d);
  for (Eigen::Index j = 0; j < 6; ++j) EXPECT_NEAR(p.probabilities.col(j).sum(), 1.0, 1e-9);
  EXPECT_EQ(p.probabilities.col(1), p.probabilities.col(4));
  EXPECT_EQ(p.labels[1], p.labels[4]);
}

TEST(ModelFile, RoundTripIsExact) {
  const BiLstmModel m = BiLstmModel::initialized(2, 5, 3, 4, 0.2, 17);
  std::stringstream buf;
  save_model(buf, m);
  const BiLstmModel back = load_model(buf);
  EXPECT_EQ(back.layers, 2);
  EXPECT_EQ(back.hidden, 5);
  EXPECT_EQ(back.input_dim, 3);
  EXPECT_EQ(back.classes, 4);
  EXPECT_EQ(back.dropout, 0.2);
  const auto ta = m.tensors();
  const auto tb = back.tensors();
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t k = 0; k < ta.size(); ++k) ASSERT_TRUE(std::equal(ta[k].begin(), ta[k].end(), tb[k].begin()));
  EXPECT_EQ(m.parameter_count(), back.parameter_count());
}

TEST(ModelFile, RejectsGarbage) {
  std::stringstream buf("not a model file at all");
  try {
    load_model(buf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(ModelShape, ParameterCountForDefaults) {
  const BiLstmModel m = BiLstmModel::zeros(2, 64, 7, 4, 0.2);
  // Layer 1: 2 x (256x7 + 256x64 + 256); layer 2: 2 x (256x128 + 256x64 + 256); head.
  const std::size_t expected = 2 * (256 * 7 + 256 * 64 + 256) + 2 * (256 * 128 + 256 * 64 + 256) + 64 * 128 + 64 +
                               4 * 64 + 4;
  EXPECT_EQ(m.parameter_count(), expected);
}

TEST(ReferenceData, TrainingLossFallsOverFirstEpochs) {
  // Four-point reference channel at reference noise, ten training seeds.
  const Scenario s = reference_scenario();
  const Dataset data = build_training_set(std::span(&s, 1), FeatureMode::Raw, 25, 5);
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig cfg;
    cfg.hidden = 16;
    cfg.max_epochs = 5;
    cfg.seed = seed;
    const TrainResult r = train(data, 4, cfg);
    bool ok = true;
    for (std::size_t e = 1; e < r.log.epochs.size(); ++e) ok = ok && r.log.epochs[e].train_loss < r.log.epochs[e - 1].train_loss;
    monotone += ok ? 1 : 0;
  }
  EXPECT_GE(monotone, 9);
}

TEST(ReferenceData, AnchorModelPredictsIdenticallyAcrossDistance) {
  Scenario near = reference_scenario();
  near.channel.noise_sigma = 0.0;
  for (auto& p : near.channel.profiles) p.tau_ms = 0.0;
  Scenario far = near;
  far.channel.distance_m = 0.5;

  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.max_epochs = 3;
  const BiLstmModel model = train_decoder(std::span(&near, 1), FeatureMode::Anchor, 20, cfg, 1);

  Dataset a, b;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const BitVector bits = random_bits(40, seed);
    for (const Scenario* s : {&near, &far}) {
      SimulatedPacket p = simulate_packet(*s, bits, seed);
      p.trace.volts = p.trace.analog;
      const RxFrame f = receive(p.trace, *s, p.stream.symbols.size());
      append_sequences(s == &near ? a : b, f, *s, p.stream.symbols, FeatureMode::Anchor);
    }
  }
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LT((a[i].x - b[i].x).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(predict(model, a).labels, predict(model, b).labels);
}
