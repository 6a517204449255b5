#include "foca/model/checkpoint.hpp"
#include "foca/model/network.hpp"
#include "foca/model/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "model_oracle.hpp"
#include "model_support.hpp"

namespace model = foca::model;
namespace oracle = foca::oracle;
namespace ft = foca::testing;
using model::Matrix;
using model::Mode;
using model::Vector;

namespace {

constexpr Mode kModes[] = {Mode::Audio, Mode::Visual, Mode::Concat, Mode::EuclidXattn, Mode::Foca};

oracle::M to_m(const Matrix& m) {
  oracle::M o(m.rows(), oracle::V(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) o[i][j] = m(i, j);
  return o;
}

oracle::V to_v(const Matrix& row) { return to_m(row)[0]; }
oracle::V to_v(const Vector& v) { return {v.data(), v.data() + v.size()}; }

oracle::ConvWeights to_oracle(const model::ConvBlockParams& p) {
  return {to_m(p.w1), to_m(p.w2), to_v(p.b1), to_v(p.b2)};
}

oracle::Dense to_oracle(const model::DenseParams& d) { return {to_m(d.w), to_v(d.b)}; }

oracle::Weights to_oracle(const foca::hca::HcaParams& p) {
  return {to_m(p.wq_a), to_m(p.wk_a), to_m(p.wv_a), to_m(p.wq_v), to_m(p.wk_v), to_m(p.wv_v)};
}

Vector random_signal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Length after each stage by enumerating window positions.
int simulated_tokens(int len, int k) {
  auto conv = [k](int l) {
    int c = 0;
    for (int t = 0; t + k <= l; ++t) ++c;
    return c;
  };
  auto pool = [](int l) {
    int c = 0;
    for (int t = 0; t + 2 <= l; t += 2) ++c;
    return c;
  };
  return pool(conv(pool(conv(len))));
}

model::Model make(Mode mode, int la, int lv, int classes, std::uint64_t seed = 1,
                  model::ArchConfig arch = {}) {
  std::mt19937_64 rng(seed);
  return model::make_model(mode, arch, la, lv, classes, model::InitKind::Random, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv block

TEST(ConvBlock, OutputLengthMatchesSimulation) {
  for (int len = 1; len <= 3000; ++len) EXPECT_EQ(model::conv_output_length(len), simulated_tokens(len, 3)) << len;
  EXPECT_EQ(model::conv_output_length(768), 190);
}

TEST(ConvBlock, Shape768) {
  std::mt19937_64 rng(3);
  model::Model m = make(Mode::Audio, 768, 768, 10);
  const Matrix t = model::conv_block_forward(random_signal(768, rng), m.params.audio, 3);
  EXPECT_EQ(t.rows(), 190);
  EXPECT_EQ(t.cols(), 128);
}

TEST(ConvBlock, ShortestAcceptedInput) {
  model::Model m = make(Mode::Audio, 10, 10, 2);
  EXPECT_EQ(model::conv_block_forward(Vector::Ones(10), m.params.audio, 3).rows(), 1);
  EXPECT_THROW(model::conv_block_forward(Vector::Ones(9), m.params.audio, 3), model::ContractError);
  std::mt19937_64 rng(0);
  EXPECT_THROW(model::make_model(Mode::Audio, {}, 8, 8, 2, model::InitKind::Random, rng), model::ContractError);
}

TEST(ConvBlock, ZeroInputZeroBiasGivesZero) {
  model::Model m = make(Mode::Audio, 64, 64, 3);
  const Matrix t = model::conv_block_forward(Vector::Zero(64), m.params.audio, 3);
  EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ConvBlock, SpikeMatchesDirectConvolution) {
  std::mt19937_64 rng(11);
  model::Model m = make(Mode::Audio, 16, 16, 2, 5);
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto& b : m.params.audio.b1.reshaped()) b = g(rng);
  for (auto& b : m.params.audio.b2.reshaped()) b = g(rng);
  for (int pos = 0; pos < 16; ++pos) {
    Vector x = Vector::Zero(16);
    x[pos] = 1.0;
    const Matrix got = model::conv_block_forward(x, m.params.audio, 3);
    const oracle::M want = oracle::conv_block(to_v(x), to_oracle(m.params.audio), 3);
    ASSERT_EQ(static_cast<std::size_t>(got.rows()), want.size());
    for (Eigen::Index i = 0; i < got.rows(); ++i)
      for (Eigen::Index j = 0; j < got.cols(); ++j) EXPECT_NEAR(got(i, j), want[i][j], 1e-12);
  }
}

TEST(ConvBlock, IdentityKernelsPassSpikeThrough) {
  // Filter 0 copies its input at the center tap, so a spike at position p
  // survives both stages at a hand-traceable position.
  model::ArchConfig a = ft::tiny_arch(2);
  model::Model m = make(Mode::Audio, 16, 16, 2, 1, a);
  auto& c = m.params.audio;
  c.w1.setZero();
  c.w1(0, 1) = 1.0;  // out1[t] = x[t + 1]
  c.w2.setZero();
  c.w2(0, 0 * 3 + 1) = 1.0;  // out2[t] = pool1[t + 1] on channel 0
  Vector x = Vector::Zero(16);
  x[7] = 2.5;
  const Matrix t = model::conv_block_forward(x, c, 3);
  // conv1: 14 rows, spike at row 6; pool1: row 3; conv2: row 2; pool2: row 1.
  ASSERT_EQ(t.rows(), 2);
  EXPECT_EQ(t(1, 0), 2.5);
  EXPECT_EQ(t(0, 0), 0.0);
  EXPECT_EQ(t.col(1).cwiseAbs().sum(), 0.0);
}

// ---------------------------------------------------------------------------
// Forward

TEST(Forward, ZeroWeightsGiveUniformProbabilities) {
  for (Mode mode : kModes) {
    std::mt19937_64 rng(2);
    model::Model m = model::make_model(mode, {}, 32, 32, 4, model::InitKind::Zero, rng);
    const auto r = model::forward(m, random_signal(32, rng), random_signal(32, rng), 0.0);
    for (double p : r.probs) EXPECT_NEAR(p, 0.25, 1e-15) << to_string(mode);
  }
}

TEST(Forward, ZeroInputsZeroHeadGiveUniform) {
  model::Model m = make(Mode::Foca, 32, 32, 5);
  m.params.out.w.setZero();
  const auto r = model::forward(m, Vector::Zero(32), Vector::Zero(32), 0.0);
  for (double p : r.probs) EXPECT_NEAR(p, 0.2, 1e-15);
}

TEST(Forward, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(4);
  for (Mode mode : kModes) {
    for (int trial = 0; trial < 5; ++trial) {
      model::Model m = make(mode, 40, 48, 3 + trial, 100 + trial);
      const auto r = model::forward(m, random_signal(40, rng), random_signal(48, rng), 0.0);
      EXPECT_NEAR(r.probs.sum(), 1.0, 1e-6);
      EXPECT_EQ(r.penultimate.size(), m.penultimate_width());
    }
  }
}

TEST(Forward, UnimodalMatchesOracle) {
  std::mt19937_64 rng(6);
  model::Model m = make(Mode::Audio, 16, 16, 2, 8, ft::tiny_arch());
  const Vector x = random_signal(16, rng);
  const auto r = model::forward(m, x, Vector(), 0.0);
  const oracle::V want = oracle::unimodal(to_v(x), to_oracle(m.params.audio), to_oracle(m.params.fc1),
                                          to_oracle(m.params.out), 3);
  for (int c = 0; c < 2; ++c) EXPECT_NEAR(r.probs[c], want[static_cast<std::size_t>(c)], 1e-12);
}

TEST(Forward, FocaMatchesOracle) {
  std::mt19937_64 rng(7);
  for (auto [la, lv] : {std::pair{16, 16}, std::pair{16, 24}}) {
    model::Model m = make(Mode::Foca, la, lv, 2, 9, ft::tiny_arch());
    const Vector xa = random_signal(la, rng);
    const Vector xv = random_signal(lv, rng);
    const auto r = model::forward(m, xa, xv, 0.0);
    const oracle::V want =
        oracle::foca(to_v(xa), to_v(xv), to_oracle(m.params.audio), to_oracle(m.params.visual),
                     to_oracle(m.params.attn), to_oracle(m.params.fc1), to_oracle(m.params.fc2),
                     to_oracle(m.params.out), 3);
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(r.probs[c], want[static_cast<std::size_t>(c)], 1e-12);
    EXPECT_EQ(r.attn_av->alpha.rows(), m.tokens_fused());
    EXPECT_EQ(r.attn_va->alpha.cols(), m.tokens_fused());
  }
}

TEST(Forward, UnequalLengthsTruncateToShorter) {
  model::Model m = make(Mode::Foca, 768, 2048, 10);
  EXPECT_EQ(m.tokens_audio(), 190);
  EXPECT_EQ(m.tokens_visual(), 510);
  EXPECT_EQ(m.tokens_fused(), 190);
  EXPECT_EQ(m.params.fc1.w.cols(), 190 * 128);
}

TEST(Forward, WrongInputLengthIsRejected) {
  model::Model m = make(Mode::Foca, 32, 32, 2);
  try {
    model::forward(m, Vector::Zero(32), Vector::Zero(31), 0.0);
    FAIL();
  } catch (const model::ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("31"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("32"), std::string::npos);
  }
}

TEST(Forward, DropoutOnlyWhenRngGiven) {
  std::mt19937_64 rng(8);
  model::Model m = make(Mode::Concat, 32, 32, 3);
  const Vector xa = random_signal(32, rng), xv = random_signal(32, rng);
  const auto a = model::forward(m, xa, xv, 0.3);
  const auto b = model::forward(m, xa, xv, 0.3);
  EXPECT_EQ(a.logits, b.logits);
  std::mt19937_64 drop(1);
  const auto c = model::forward(m, xa, xv, 0.3, &drop);
  EXPECT_NE(a.logits, c.logits);
  EXPECT_EQ(a.penultimate.size(), 30);
}

TEST(Forward, DropoutMaskScalesKeptUnits) {
  std::mt19937_64 rng(3);
  const Vector mask = model::dropout_mask(100000, 0.3, rng);
  for (double v : mask) EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-15);
  EXPECT_NEAR(mask.mean(), 1.0, 0.01);
}

TEST(EuclidXattn, EqualKeysAverageValuesUniformly) {
  std::mt19937_64 rng(12);
  const int n = 5, d = 4;
  foca::hca::HcaParams p = foca::hca::HcaParams::random(d, rng);
  Matrix ta(n, d), tv(n, d);
  for (auto& x : ta.reshaped()) x = std::normal_distribution<double>()(rng);
  const Vector row = random_signal(d, rng);
  for (int i = 0; i < n; ++i) tv.row(i) = row.transpose();
  model::EuclidTrace t;
  model::euclid_xattn_forward(ta, tv, p, t);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) EXPECT_NEAR(t.a_av(i, j), 1.0 / n, 1e-15);
  const Matrix avg = t.a_av * t.vv;
  const Matrix mean = t.vv.colwise().mean();
  for (Eigen::Index i = 0; i < n; ++i) EXPECT_LT((avg.row(i) - mean).norm(), 1e-12);
}

// ---------------------------------------------------------------------------
// Parameter counting

TEST(ParamCount, ItemizedValues768) {
  const model::Model m = make(Mode::Foca, 768, 768, 10);
  const auto r = model::count_params(m);
  std::map<std::string, std::int64_t> by;
  std::int64_t sum = 0;
  for (const auto& it : r.items) {
    by[it.layer] = it.count;
    sum += it.count;
  }
  EXPECT_EQ(by["audio.conv1"], 256);
  EXPECT_EQ(by["audio.conv2"], 24704);
  EXPECT_EQ(by["visual.conv1"], 256);
  EXPECT_EQ(by["visual.conv2"], 24704);
  EXPECT_EQ(by["attn.wq_a"], 128 * 128);
  EXPECT_EQ(by["fc1"], 2918520);
  EXPECT_EQ(by["fc2"], 3630);
  EXPECT_EQ(by["out"], 310);
  EXPECT_EQ(sum, r.total);
  EXPECT_EQ(r.total, 3070684);
  EXPECT_GE(r.total, 2700000);
  EXPECT_LE(r.total, 4500000);
}

TEST(ParamCount, ConvAndHeadSharedAcrossFusionModes) {
  auto items = [](Mode mode) {
    std::map<std::string, std::int64_t> by;
    for (const auto& it : model::count_params(make(mode, 768, 768, 10)).items) by[it.layer] = it.count;
    return by;
  };
  const auto f = items(Mode::Foca), e = items(Mode::EuclidXattn), c = items(Mode::Concat);
  for (const char* layer : {"audio.conv1", "audio.conv2", "visual.conv1", "visual.conv2", "fc2", "out"}) {
    EXPECT_EQ(f.at(layer), e.at(layer)) << layer;
    EXPECT_EQ(f.at(layer), c.at(layer)) << layer;
  }
  EXPECT_EQ(f.at("fc1"), e.at("fc1"));
  EXPECT_EQ(c.count("attn.wq_a"), 0u);
  const auto a = items(Mode::Audio);
  EXPECT_EQ(a.at("fc1"), 190 * 128 * 128 + 128);
  EXPECT_EQ(a.count("visual.conv1"), 0u);
}

// ---------------------------------------------------------------------------
// Loss and gradients

TEST(Loss, UniformPredictionIsLogC) {
  EXPECT_NEAR(model::cross_entropy(Vector::Zero(5), 2), std::log(5.0), 1e-15);
  EXPECT_NEAR(model::cross_entropy(Vector::Zero(5), 2), 1.6094, 1e-4);
}

TEST(Loss, ConfidentCorrectPredictionIsNearZero) {
  Vector z = Vector::Zero(4);
  z[1] = 40.0;
  EXPECT_LT(model::cross_entropy(z, 1), 1e-6);
  z[1] = 1e6;
  EXPECT_TRUE(std::isfinite(model::cross_entropy(z, 0)));
  EXPECT_NEAR(model::cross_entropy(z, 0), 1e6, 1e-6);
}

TEST(Loss, BatchLossIsMeanOfSampleLosses) {
  const auto ds = ft::random_dataset(4, 16, 16, 2, 3);
  const model::Model m = make(Mode::Concat, 16, 16, 2, 4, ft::tiny_arch());
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) sum += model::loss_and_grads(m, ds, {i}, 0.0).loss;
  EXPECT_NEAR(model::loss_and_grads(m, ds, {0, 1, 2, 3}, 0.0).loss, sum / 4.0, 1e-14);
  EXPECT_THROW(model::loss_and_grads(m, ds, {}, 0.0), model::ContractError);
}

class GradientCheck : public ::testing::TestWithParam<Mode> {};

TEST_P(GradientCheck, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto rep = ft::check_model_gradient(GetParam(), seed);
    EXPECT_TRUE(rep.ok) << rep.first_failure << " worst rel " << rep.worst_rel;
  }
}

INSTANTIATE_TEST_SUITE_P(AllModes, GradientCheck, ::testing::ValuesIn(kModes),
                         [](const auto& info) {
                           std::string s(model::to_string(info.param));
                           std::erase(s, '-');
                           return s;
                         });

// ---------------------------------------------------------------------------
// Training

TEST(TrainConfig, Validation) {
  model::TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = [](auto edit) {
    model::TrainConfig c;
    edit(c);
    EXPECT_THROW(c.validate(), model::ContractError);
  };
  bad([](auto& c) { c.lr = -1; });
  bad([](auto& c) { c.batch_size = 0; });
  bad([](auto& c) { c.epochs = 0; });
  bad([](auto& c) { c.dropout = 1.0; });
  bad([](auto& c) { c.patience = 0; });
}

TEST(Train, ZeroLearningRateLeavesParametersBitIdentical) {
  const auto ds = ft::random_dataset(40, 16, 16, 2, 5);
  for (Mode mode : kModes) {
    const model::Model m = make(mode, 16, 16, 2, 6, ft::tiny_arch());
    model::TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    std::vector<std::size_t> idx(40);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(1);
    const auto r = model::train_model(m, ds, idx, cfg, rng);
    for (std::size_t k = 0; k < model::named_tensors(m).size(); ++k) {
      const Matrix& a = *model::named_tensors(m)[k].second;
      const Matrix& b = *model::named_tensors(r.model)[k].second;
      ASSERT_EQ(a.size(), b.size());
      EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
    }
  }
}

TEST(Train, DeterministicForFixedSeed) {
  const auto ds = ft::random_dataset(50, 16, 16, 2, 7);
  const auto folds = foca::data::make_folds(ds.label_names, 5, 3);
  model::TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 3;
  cfg.seed = 99;
  const auto a = model::cross_validate(Mode::Foca, ft::tiny_arch(), ds, folds, cfg);
  const auto b = model::cross_validate(Mode::Foca, ft::tiny_arch(), ds, folds, cfg);
  EXPECT_EQ(foca::data::to_json(a.report).dump(), foca::data::to_json(b.report).dump());
  for (std::size_t f = 0; f < a.models.size(); ++f) {
    EXPECT_EQ(model::encode_checkpoint({a.models[f], ds.classes, {}}),
              model::encode_checkpoint({b.models[f], ds.classes, {}}));
  }
}

TEST(Train, EarlyStoppingReturnsBestEpoch) {
  const auto ds = ft::random_dataset(60, 16, 16, 3, 8);  // random labels: validation loss soon rises
  std::vector<std::size_t> idx(60);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    model::TrainConfig cfg;
    cfg.lr = 3e-2;
    cfg.epochs = 40;
    cfg.patience = 3;
    cfg.batch_size = 8;
    cfg.validation_fraction = 0.25;
    std::mt19937_64 rng(seed);
    const auto r = model::train_model(make(Mode::Concat, 16, 16, 3, seed, ft::tiny_arch()), ds, idx, cfg, rng);
    ASSERT_GE(r.best_epoch, 1);
    EXPECT_LE(r.best_epoch, r.epochs_run);
    EXPECT_LE(r.epochs_run - r.best_epoch, cfg.patience);
    const double best = *std::min_element(r.validation_history.begin(), r.validation_history.end());
    EXPECT_EQ(best, r.best_validation_loss);
    EXPECT_EQ(r.validation_history[static_cast<std::size_t>(r.best_epoch - 1)], best);
    for (int e = r.best_epoch; e < r.epochs_run; ++e) EXPECT_GE(r.validation_history[static_cast<std::size_t>(e)], best);
  }
}

TEST(Train, ReturnedModelHasBestValidationLoss) {
  const auto ds = ft::random_dataset(40, 16, 16, 2, 9);
  std::vector<std::size_t> idx(40);
  std::iota(idx.begin(), idx.end(), 0);
  model::TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 6;
  cfg.batch_size = 8;
  std::mt19937_64 rng(4);
  auto shuffle_copy = rng;
  const auto r = model::train_model(make(Mode::Foca, 16, 16, 2, 1, ft::tiny_arch()), ds, idx, cfg, rng);
  // Reconstruct the validation slice exactly as train_model draws it.
  std::shuffle(idx.begin(), idx.end(), shuffle_copy);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + 4);
  std::sort(val.begin(), val.end());
  EXPECT_DOUBLE_EQ(model::mean_loss(r.model, ds, val), r.best_validation_loss);
}

TEST(Train, EmptyClassInTrainingFoldsIsAnError) {
  auto ds = ft::random_dataset(20, 16, 16, 2, 10);
  ds.classes.push_back("ghost");
  std::vector<std::size_t> idx(20);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(0);
  model::Model m = model::make_model(Mode::Audio, ft::tiny_arch(), 16, 16, 3, model::InitKind::Random, rng);
  try {
    model::train_model(m, ds, idx, model::TrainConfig{}, rng);
    FAIL();
  } catch (const model::ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Train, NonFiniteLossAborts) {
  const auto ds = ft::random_dataset(20, 16, 16, 2, 11);
  std::vector<std::size_t> idx(20);
  std::iota(idx.begin(), idx.end(), 0);
  model::Model m = make(Mode::Foca, 16, 16, 2, 1, ft::tiny_arch());
  m.params.out.b(0, 0) = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(0);
  EXPECT_THROW(model::train_model(m, ds, idx, model::TrainConfig{}, rng), model::NumericalError);
}

TEST(Train, LearnsSeparableData) {
  auto ds = ft::random_dataset(60, 16, 16, 2, 12);
  for (Eigen::Index i = 0; i < 60; ++i) ds.audio.row(i).array() += ds.labels[static_cast<std::size_t>(i)] ? 2.0 : -2.0;
  const auto folds = foca::data::make_folds(ds.label_names, 3, 1);
  model::TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 15;
  cfg.batch_size = 8;
  const auto r = model::cross_validate(Mode::Audio, ft::tiny_arch(), ds, folds, cfg);
  EXPECT_GT(r.report.accuracy().mean, 0.9);
  for (const auto& f : r.report.folds) EXPECT_EQ(f.confusion.total(), f.test_size);
}

// ---------------------------------------------------------------------------
// Initialization and checkpoints

TEST(Init, IdentityTiesConvBlocksAndAttention) {
  std::mt19937_64 rng(1);
  const model::Model m = model::make_model(Mode::Foca, {}, 32, 32, 3, model::InitKind::Identity, rng);
  EXPECT_EQ(m.params.audio.w1, m.params.visual.w1);
  EXPECT_EQ(m.params.audio.w2, m.params.visual.w2);
  for (const Matrix* w : m.params.attn.all()) EXPECT_TRUE(w->isIdentity());
}

TEST(Init, RandomBoundsAndZeroBiases) {
  const model::Model m = make(Mode::Foca, 768, 768, 10);
  EXPECT_LE(m.params.audio.w1.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 3.0));
  EXPECT_LE(m.params.fc1.w.cwiseAbs().maxCoeff(), std::sqrt(6.0 / (190.0 * 128.0)));
  EXPECT_LE(m.params.out.w.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(30.0));
  EXPECT_LE(m.params.attn.wq_a.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(128.0));
  EXPECT_EQ(m.params.fc1.b.cwiseAbs().sum(), 0.0);
  EXPECT_NE(m.params.audio.w1, m.params.visual.w1);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (Mode mode : kModes) {
    model::Checkpoint ck{make(mode, 24, 32, 3, 2, ft::tiny_arch()), {"a", "b", "c"}, {{"lr", 0.5}}};
    const auto bytes = model::encode_checkpoint(ck);
    ASSERT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FOCA");
    const model::Checkpoint back = model::decode_checkpoint(bytes);
    EXPECT_EQ(back.model.mode, mode);
    EXPECT_EQ(back.class_names, ck.class_names);
    EXPECT_EQ(back.model.d_audio, 24);
    EXPECT_EQ(model::encode_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, RejectsCorruption) {
  model::Checkpoint ck{make(Mode::Foca, 16, 16, 2, 2, ft::tiny_arch()), {"a", "b"}, {}};
  auto bytes = model::encode_checkpoint(ck);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(model::decode_checkpoint(bad), model::CheckpointError);
  bad = bytes;
  bad.resize(bytes.size() - 3);
  EXPECT_THROW(model::decode_checkpoint(bad), model::CheckpointError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(model::decode_checkpoint(bad), model::CheckpointError);
  bad = bytes;
  bad[6] = static_cast<unsigned char>(Mode::Audio);
  EXPECT_THROW(model::decode_checkpoint(bad), model::CheckpointError);
}
