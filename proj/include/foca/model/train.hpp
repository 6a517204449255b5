#pragma once

// Mini-batch training with Adam, early stopping on a held-out validation
// slice, and k-fold cross-validation.

#include "foca/data/folds.hpp"
#include "foca/data/manifest.hpp"
#include "foca/data/metrics.hpp"
#include "foca/model/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace foca::model {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 1e-5;
  int batch_size = 32;
  int epochs = 50;
  double dropout = 0.3;
  int patience = 5;
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  /// lr = 0 is accepted so that a null run can be checked.
  void validate() const {
    auto fail = [](const std::string& m) { throw ContractError("train config: " + m); };
    if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be finite and >= 0");
    if (batch_size < 1) fail("batch size must be >= 1");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
    if (patience < 1) fail("patience must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) fail("validation fraction must be in (0, 1)");
  }
};

/// Independent stream per fold: the seed's two halves and the fold index.
inline std::mt19937_64 fold_rng(std::uint64_t seed, std::size_t fold) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fold)};
  return std::mt19937_64(seq);
}

inline Vector row_of(const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& m,
                     std::size_t i) {
  if (m.cols() == 0) return Vector();
  return m.row(static_cast<Eigen::Index>(i)).transpose();
}

struct LossGrad {
  double loss = 0.0;
  ModelParams grad;
};

/// Mean cross-entropy over `batch` and its gradient. Dropout is active iff
/// `dropout_rng` is non-null.
template <class Rng = std::mt19937_64>
LossGrad loss_and_grads(const Model& m, const data::Dataset& ds, const std::vector<std::size_t>& batch,
                        double dropout_rate, Rng* dropout_rng = nullptr) {
  if (batch.empty()) throw ContractError("loss_and_grads: empty batch");
  LossGrad out;
  out.grad = zeros_like(m);
  const double scale = 1.0 / static_cast<double>(batch.size());
  SampleTrace trace;
  for (std::size_t i : batch) {
    const int label = ds.labels[i];
    ForwardResult r = forward(m, row_of(ds.audio, i), row_of(ds.visual, i), dropout_rate, dropout_rng, &trace);
    out.loss += cross_entropy(r.logits, label) * scale;
    Vector d_logits = r.probs;
    d_logits[label] -= 1.0;
    backward(m, trace, d_logits * scale, out.grad);
  }
  return out;
}

/// Mean loss without dropout or gradients.
inline double mean_loss(const Model& m, const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  double total = 0.0;
  for (std::size_t i : idx) {
    ForwardResult r = forward(m, row_of(ds.audio, i), row_of(ds.visual, i), 0.0);
    total += cross_entropy(r.logits, ds.labels[i]);
  }
  return total / static_cast<double>(idx.size());
}

inline int predict(const Model& m, const Vector& xa, const Vector& xv) {
  ForwardResult r = forward(m, xa, xv, 0.0);
  Eigen::Index best = 0;
  r.logits.maxCoeff(&best);
  return static_cast<int>(best);
}

class Adam {
 public:
  Adam(const Model& m, const TrainConfig& cfg) : cfg_(cfg), m_(zeros_like(m)), v_(zeros_like(m)) {}

  void step(Model& model, ModelParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    auto params = named_tensors(model);
    auto g = named_tensors(grad, model.mode);
    auto m = named_tensors(m_, model.mode);
    auto v = named_tensors(v_, model.mode);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto ga = g[k].tensor->array();
      auto ma = m[k].tensor->array();
      auto va = v[k].tensor->array();
      ma = cfg_.beta1 * ma + (1.0 - cfg_.beta1) * ga;
      va = cfg_.beta2 * va + (1.0 - cfg_.beta2) * ga.square();
      params[k].tensor->array() -= cfg_.lr * (ma / c1) / ((va / c2).sqrt() + cfg_.adam_eps);
    }
  }

 private:
  TrainConfig cfg_;
  ModelParams m_, v_;
  int t_ = 0;
};

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  int best_epoch = 0;
  int epochs_run = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::vector<double> validation_history;
};

/// Trains `init` on `train_idx`. The validation slice is a seeded 10% of
/// `train_idx`; the rest is shuffled each epoch into mini-batches.
template <class Rng>
TrainResult train_model(Model init, const data::Dataset& ds, std::vector<std::size_t> train_idx,
                        const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (train_idx.size() < 2) throw ContractError("training needs at least 2 samples");
  std::vector<int> per_class(static_cast<std::size_t>(init.classes), 0);
  for (std::size_t i : train_idx) ++per_class[static_cast<std::size_t>(ds.labels[i])];
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c] == 0) {
      const std::string name = c < ds.classes.size() ? ds.classes[c] : std::to_string(c);
      throw ContractError("class '" + name + "' has no samples in the training folds");
    }
  }

  std::shuffle(train_idx.begin(), train_idx.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(train_idx.size()))));
  std::vector<std::size_t> val(train_idx.begin(), train_idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit(train_idx.begin() + static_cast<std::ptrdiff_t>(n_val), train_idx.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());

  TrainResult res;
  res.model = init;
  Model cur = std::move(init);
  Adam opt(cur, cfg);
  std::vector<std::size_t> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(fit.begin(), fit.end(), rng);
    for (std::size_t start = 0; start < fit.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(fit.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.assign(fit.begin() + static_cast<std::ptrdiff_t>(start), fit.begin() + static_cast<std::ptrdiff_t>(end));
      LossGrad lg;
      try {
        lg = loss_and_grads(cur, ds, batch, cfg.dropout, &rng);
      } catch (const poincare::DomainError& e) {
        throw NumericalError("non-finite activations at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      opt.step(cur, lg.grad);
    }
    double vl = 0.0;
    try {
      vl = mean_loss(cur, ds, val);
    } catch (const poincare::DomainError& e) {
      throw NumericalError("non-finite activations at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(vl)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    res.validation_history.push_back(vl);
    res.epochs_run = epoch;
    if (vl < res.best_validation_loss) {
      res.best_validation_loss = vl;
      res.best_epoch = epoch;
      res.model = cur;
    } else if (epoch - res.best_epoch >= cfg.patience) {
      break;
    }
  }
  return res;
}

struct CrossValResult {
  data::EvalReport report;
  std::vector<Model> models;  // one per fold
};

/// k-fold cross-validation. Each fold initializes a fresh model from its own
/// RNG stream, so the result does not depend on fold execution order.
inline CrossValResult cross_validate(Mode mode, const ArchConfig& arch, const data::Dataset& ds,
                                     const data::FoldSplit& folds, const TrainConfig& cfg,
                                     InitKind init = InitKind::Random) {
  cfg.validate();
  if (ds.size() == 0) throw ContractError("dataset is empty");
  CrossValResult out;
  out.report.mode = std::string(to_string(mode));
  out.report.classes = ds.classes;
  for (std::size_t f = 0; f < folds.k(); ++f) {
    auto rng = fold_rng(cfg.seed, f);
    Model m = make_model(mode, arch, static_cast<int>(ds.audio.cols()), static_cast<int>(ds.visual.cols()),
                         ds.num_classes(), init, rng);
    TrainResult tr = train_model(std::move(m), ds, folds.training_indices(f), cfg, rng);

    data::FoldEval ev;
    ev.fold = static_cast<int>(f);
    ev.test_size = folds.folds[f].size();
    ev.confusion = data::ConfusionMatrix(ds.num_classes());
    for (std::size_t i : folds.folds[f]) {
      ev.confusion.add(ds.labels[i], predict(tr.model, row_of(ds.audio, i), row_of(ds.visual, i)));
    }
    const data::Metrics mt = data::metrics(ev.confusion);
    ev.accuracy = mt.accuracy;
    ev.macro_f1 = mt.macro_f1;
    ev.best_epoch = tr.best_epoch;
    ev.epochs_run = tr.epochs_run;
    ev.best_validation_loss = tr.best_validation_loss;
    out.report.folds.push_back(std::move(ev));
    out.models.push_back(std::move(tr.model));
  }
  return out;
}

}  // namespace foca::model
