#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace foca::data {

class FoldError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// k disjoint, ascending index lists that together cover every sample.
struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;

  std::size_t k() const { return folds.size(); }

  /// Every index not in fold `held_out`, ascending.
  std::vector<std::size_t> training_indices(std::size_t held_out) const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      if (f != held_out) out.insert(out.end(), folds[f].begin(), folds[f].end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Stratified split. Labels are visited in sorted order; each label's indices
/// are shuffled with one seeded stream and dealt round-robin, continuing the
/// deal position from the previous label so fold sizes differ by at most one.
inline FoldSplit make_folds(const std::vector<std::string>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw FoldError("k must be at least 2");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  for (const auto& [label, idx] : by_label) {
    if (idx.size() < static_cast<std::size_t>(k)) {
      throw FoldError("label '" + label + "' has " + std::to_string(idx.size()) + " samples, fewer than k = " +
                      std::to_string(k));
    }
  }

  std::mt19937_64 rng(seed);
  FoldSplit split;
  split.folds.resize(static_cast<std::size_t>(k));
  std::size_t deal = 0;
  for (auto& [label, idx] : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) split.folds[deal++ % static_cast<std::size_t>(k)].push_back(i);
  }
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  return split;
}

}  // namespace foca::data
