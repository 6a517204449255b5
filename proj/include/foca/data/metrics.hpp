#pragma once

// Confusion matrices, accuracy / macro-F1 and the cross-validation report.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace foca::data {

/// Square count matrix; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes)
      : classes_(classes), counts_(static_cast<std::size_t>(classes) * classes, 0) {}

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
    ConfusionMatrix m(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw std::invalid_argument("confusion matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[i][j] < 0) throw std::invalid_argument("confusion counts must be nonnegative");
        m.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
      }
    }
    return m;
  }

  int classes() const { return classes_; }
  std::int64_t& at(int actual, int predicted) { return counts_[index(actual, predicted)]; }
  std::int64_t at(int actual, int predicted) const { return counts_[index(actual, predicted)]; }
  void add(int actual, int predicted) { ++at(actual, predicted); }

  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }

  std::vector<std::vector<std::int64_t>> rows() const {
    std::vector<std::vector<std::int64_t>> out(classes_, std::vector<std::int64_t>(classes_));
    for (int i = 0; i < classes_; ++i)
      for (int j = 0; j < classes_; ++j) out[i][j] = at(i, j);
    return out;
  }

 private:
  std::size_t index(int a, int p) const { return static_cast<std::size_t>(a) * classes_ + p; }

  int classes_ = 0;
  std::vector<std::int64_t> counts_;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;  // NaN for classes excluded from the average
};

/// Classes with neither support nor predictions are left out of the macro
/// average; a class with support or predictions but no hits scores F1 = 0.
inline Metrics metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw std::invalid_argument("metrics: confusion matrix is empty");
  Metrics m;
  std::int64_t trace = 0;
  double f1_sum = 0.0;
  int counted = 0;
  for (int c = 0; c < cm.classes(); ++c) {
    trace += cm.at(c, c);
    std::int64_t support = 0, predicted = 0;
    for (int o = 0; o < cm.classes(); ++o) {
      support += cm.at(c, o);
      predicted += cm.at(o, c);
    }
    if (support == 0 && predicted == 0) {
      m.per_class_f1.push_back(std::nan(""));
      continue;
    }
    const double tp = static_cast<double>(cm.at(c, c));
    const double f1 = tp == 0.0 ? 0.0 : 2.0 * tp / static_cast<double>(support + predicted);
    m.per_class_f1.push_back(f1);
    f1_sum += f1;
    ++counted;
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  m.macro_f1 = f1_sum / counted;
  return m;
}

struct FoldEval {
  int fold = 0;
  std::size_t test_size = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;
  int best_epoch = 0;
  int epochs_run = 0;
  double best_validation_loss = 0.0;
};

struct EvalReport {
  std::string mode;
  std::vector<std::string> classes;
  std::vector<FoldEval> folds;

  struct Stat {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over folds
  };

  Stat accuracy() const { return stat([](const FoldEval& f) { return f.accuracy; }); }
  Stat macro_f1() const { return stat([](const FoldEval& f) { return f.macro_f1; }); }

 private:
  template <class F>
  Stat stat(F get) const {
    Stat s;
    if (folds.empty()) return s;
    for (const auto& f : folds) s.mean += get(f);
    s.mean /= static_cast<double>(folds.size());
    for (const auto& f : folds) s.std += (get(f) - s.mean) * (get(f) - s.mean);
    s.std = std::sqrt(s.std / static_cast<double>(folds.size()));
    return s;
  }
};

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.mode;
  j["classes"] = r.classes;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) {
    nlohmann::ordered_json jf;
    jf["fold"] = f.fold;
    jf["test_size"] = f.test_size;
    jf["accuracy"] = f.accuracy;
    jf["macro_f1"] = f.macro_f1;
    jf["best_epoch"] = f.best_epoch;
    jf["epochs_run"] = f.epochs_run;
    jf["best_validation_loss"] = f.best_validation_loss;
    jf["confusion"] = f.confusion.rows();
    j["folds"].push_back(std::move(jf));
  }
  const auto acc = r.accuracy();
  const auto f1 = r.macro_f1();
  j["mean"] = {{"accuracy", acc.mean}, {"macro_f1", f1.mean}};
  j["std"] = {{"accuracy", acc.std}, {"macro_f1", f1.std}};
  return j;
}

}  // namespace foca::data
