#pragma once

// Dataset manifests (CSV) and the in-memory dataset they resolve to.
//
//   sample_id,label,audio_path,audio_row,image_path,image_row
//
// Relative feature paths are resolved against the manifest's directory.

#include "foca/data/features.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace foca::data {

namespace fs = std::filesystem;

inline constexpr const char* kManifestHeader = "sample_id,label,audio_path,audio_row,image_path,image_row";

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FeatureRef {
  fs::path path;
  std::uint32_t row = 0;
};

struct ManifestRecord {
  std::string sample_id;
  std::string label;
  FeatureRef audio;
  FeatureRef image;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  fs::path base_dir;  // relative paths resolve against this

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::uint32_t parse_row(const std::string& s, const std::string& where) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ManifestError(where + ": row index '" + s + "' is not a non-negative integer");
  }
  return v;
}

}  // namespace detail

inline DatasetManifest parse_manifest(std::istream& in, const fs::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::string line;
  if (!std::getline(in, line)) throw ManifestError("manifest is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) throw ManifestError("manifest header must be '" + std::string(kManifestHeader) + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = "manifest line " + std::to_string(lineno);
    auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw ManifestError(where + ": expected 6 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ManifestError(where + ": empty sample_id");
    if (f[1].empty()) throw ManifestError(where + ": record '" + f[0] + "' has an empty label");
    m.records.push_back({f[0], f[1], {f[2], detail::parse_row(f[3], where)}, {f[4], detail::parse_row(f[5], where)}});
  }
  return m;
}

inline DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : m.records) {
    out << r.sample_id << ',' << r.label << ',' << r.audio.path.generic_string() << ',' << r.audio.row << ','
        << r.image.path.generic_string() << ',' << r.image.row << '\n';
  }
}

/// Features and labels for every manifest record, in manifest order.
struct Dataset {
  std::vector<std::string> classes;  // sorted label names; index = class id
  std::vector<std::string> sample_ids;
  std::vector<std::string> label_names;
  std::vector<int> labels;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> audio;   // one row per sample
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> visual;  // one row per sample

  std::size_t size() const { return labels.size(); }
  int num_classes() const { return static_cast<int>(classes.size()); }
};

/// Loads every referenced row and checks the manifest invariants.
inline Dataset load_dataset(const DatasetManifest& m) {
  if (m.records.empty()) throw ManifestError("manifest has no records");
  std::set<std::string> ids;
  std::set<std::string> label_set;
  for (const auto& r : m.records) {
    if (!ids.insert(r.sample_id).second) throw ManifestError("duplicate sample_id '" + r.sample_id + "'");
    label_set.insert(r.label);
  }
  if (label_set.size() < 2) throw ManifestError("manifest needs at least 2 distinct labels");

  std::map<fs::path, FeatureMatrix> cache;
  auto load = [&](const fs::path& p) -> const FeatureMatrix& {
    const fs::path full = m.resolve(p);
    auto it = cache.find(full);
    if (it == cache.end()) it = cache.emplace(full, read_feature_file(full)).first;
    return it->second;
  };

  Dataset ds;
  ds.classes.assign(label_set.begin(), label_set.end());
  const std::size_t n = m.records.size();
  Eigen::Index da = -1, dv = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = m.records[i];
    const FeatureMatrix& fa = load(r.audio.path);
    const FeatureMatrix& fv = load(r.image.path);
    if (r.audio.row >= fa.rows()) {
      throw ManifestError("record '" + r.sample_id + "': audio row " + std::to_string(r.audio.row) +
                          " out of range for " + r.audio.path.string());
    }
    if (r.image.row >= fv.rows()) {
      throw ManifestError("record '" + r.sample_id + "': image row " + std::to_string(r.image.row) +
                          " out of range for " + r.image.path.string());
    }
    if (i == 0) {
      da = fa.cols();
      dv = fv.cols();
      ds.audio.resize(static_cast<Eigen::Index>(n), da);
      ds.visual.resize(static_cast<Eigen::Index>(n), dv);
    } else if (fa.cols() != da || fv.cols() != dv) {
      throw ManifestError("record '" + r.sample_id + "': feature dimension differs from the first record");
    }
    ds.audio.row(i) = fa.row(r.audio.row).cast<double>();
    ds.visual.row(i) = fv.row(r.image.row).cast<double>();
    ds.sample_ids.push_back(r.sample_id);
    ds.label_names.push_back(r.label);
    ds.labels.push_back(static_cast<int>(
        std::lower_bound(ds.classes.begin(), ds.classes.end(), r.label) - ds.classes.begin()));
  }
  return ds;
}

}  // namespace foca::data
