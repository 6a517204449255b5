#pragma once

// Synthetic two-level multimodal dataset.
//
// A label tree of `parents` coarse nodes with `leaves_per_parent` children
// each; every leaf is a class. Visual features are the parent prototype plus
// noise, so siblings are indistinguishable visually. Audio features are the
// leaf prototype plus stronger noise, so audio separates every leaf but
// confuses more often than the visual stream confuses parents. All values
// are multiplied by `feature_scale`; the default keeps conv outputs of a
// freshly initialized network well inside the unit ball.

#include "foca/data/features.hpp"
#include "foca/data/manifest.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>

namespace foca::data {

struct SynthConfig {
  int n_per_class = 200;
  int parents = 5;
  int leaves_per_parent = 2;
  int d_audio = 32;
  int d_visual = 32;
  double noise_sigma = 0.5;        // visual noise std per coordinate, in prototype units
  double audio_noise_scale = 4.0;  // audio noise = noise_sigma * audio_noise_scale
  double feature_scale = 0.02;     // multiplies prototypes and noise alike
  std::uint64_t seed = 42;

  int num_classes() const { return parents * leaves_per_parent; }
};

struct SynthDataset {
  DatasetManifest manifest;           // paths relative to the output directory
  FeatureMatrix audio;                // one row per sample, manifest order
  FeatureMatrix visual;
  Eigen::MatrixXd audio_prototypes;   // one row per class
  Eigen::MatrixXd visual_prototypes;  // one row per class (siblings share a row value)
  std::vector<int> class_of_sample;
};

inline std::string synth_label(int parent, int leaf) {
  return "p" + std::to_string(parent) + "_l" + std::to_string(leaf);
}

inline constexpr const char* kSynthAudioFile = "audio.fmx";
inline constexpr const char* kSynthImageFile = "image.fmx";
inline constexpr const char* kSynthManifestFile = "manifest.csv";

inline SynthDataset synth_dataset(const SynthConfig& cfg) {
  if (cfg.d_audio < 16 || cfg.d_visual < 16) throw std::invalid_argument("synth: feature dims must be >= 16");
  if (cfg.n_per_class < 1) throw std::invalid_argument("synth: n_per_class must be >= 1");
  if (cfg.parents < 1 || cfg.leaves_per_parent < 1 || cfg.num_classes() < 2) {
    throw std::invalid_argument("synth: label tree needs at least 2 leaves");
  }
  if (!(cfg.noise_sigma >= 0.0) || !(cfg.audio_noise_scale >= 0.0)) {
    throw std::invalid_argument("synth: noise must be >= 0");
  }
  if (!(cfg.feature_scale > 0.0) || !std::isfinite(cfg.feature_scale)) {
    throw std::invalid_argument("synth: feature scale must be > 0");
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int classes = cfg.num_classes();

  SynthDataset out;
  Eigen::MatrixXd parent_proto(cfg.parents, cfg.d_visual);
  for (Eigen::Index i = 0; i < parent_proto.size(); ++i) parent_proto.data()[i] = cfg.feature_scale * gauss(rng);
  out.audio_prototypes.resize(classes, cfg.d_audio);
  for (Eigen::Index i = 0; i < out.audio_prototypes.size(); ++i) {
    out.audio_prototypes.data()[i] = cfg.feature_scale * gauss(rng);
  }
  out.visual_prototypes.resize(classes, cfg.d_visual);
  for (int c = 0; c < classes; ++c) out.visual_prototypes.row(c) = parent_proto.row(c / cfg.leaves_per_parent);

  const Eigen::Index n = static_cast<Eigen::Index>(classes) * cfg.n_per_class;
  out.audio.resize(n, cfg.d_audio);
  out.visual.resize(n, cfg.d_visual);
  const double visual_sigma = cfg.feature_scale * cfg.noise_sigma;
  const double audio_sigma = visual_sigma * cfg.audio_noise_scale;
  Eigen::Index row = 0;
  for (int c = 0; c < classes; ++c) {
    const std::string label = synth_label(c / cfg.leaves_per_parent, c % cfg.leaves_per_parent);
    for (int k = 0; k < cfg.n_per_class; ++k, ++row) {
      for (int j = 0; j < cfg.d_audio; ++j) {
        out.audio(row, j) = static_cast<float>(out.audio_prototypes(c, j) + audio_sigma * gauss(rng));
      }
      for (int j = 0; j < cfg.d_visual; ++j) {
        out.visual(row, j) = static_cast<float>(out.visual_prototypes(c, j) + visual_sigma * gauss(rng));
      }
      const auto r = static_cast<std::uint32_t>(row);
      char id[32];
      std::snprintf(id, sizeof id, "s%06u", static_cast<unsigned>(row));
      out.manifest.records.push_back({id, label, {kSynthAudioFile, r}, {kSynthImageFile, r}});
      out.class_of_sample.push_back(c);
    }
  }
  return out;
}

/// Writes audio.fmx, image.fmx and manifest.csv into `dir` (created if needed).
inline void write_synth(const std::filesystem::path& dir, SynthDataset& ds) {
  std::filesystem::create_directories(dir);
  write_feature_file(dir / kSynthAudioFile, ds.audio);
  write_feature_file(dir / kSynthImageFile, ds.visual);
  write_manifest(dir / kSynthManifestFile, ds.manifest);
  ds.manifest.base_dir = dir;
}

}  // namespace foca::data
