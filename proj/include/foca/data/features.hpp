#pragma once

// FMX1 feature files: "FMX1", u32 rows, u32 cols, rows*cols float32, all
// little-endian, row-major.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace foca::data {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class FormatError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, SizeMismatch, NonFinite };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::array<char, 4> kFeatureMagic = {'F', 'M', 'X', '1'};
inline constexpr std::size_t kFeatureHeaderBytes = 12;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_features(const FeatureMatrix& m) {
  if (!m.allFinite()) throw FormatError(FormatError::Kind::NonFinite, "feature matrix has non-finite values");
  std::vector<std::uint8_t> out(kFeatureMagic.begin(), kFeatureMagic.end());
  out.reserve(kFeatureHeaderBytes + 4 * static_cast<std::size_t>(m.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_u32(out, std::bit_cast<std::uint32_t>(m.data()[i]));
  return out;
}

inline FeatureMatrix decode_features(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kFeatureHeaderBytes) {
    throw FormatError(FormatError::Kind::SizeMismatch, "feature file shorter than its 12-byte header");
  }
  if (!std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin())) {
    throw FormatError(FormatError::Kind::BadMagic, "feature file does not start with FMX1");
  }
  const std::uint64_t rows = detail::get_u32(bytes.data() + 4);
  const std::uint64_t cols = detail::get_u32(bytes.data() + 8);
  const std::uint64_t expected = kFeatureHeaderBytes + rows * cols * 4;
  if (bytes.size() != expected) {
    throw FormatError(FormatError::Kind::SizeMismatch,
                      "feature file is " + std::to_string(bytes.size()) + " bytes, header declares " +
                          std::to_string(expected));
  }
  FeatureMatrix m(rows, cols);
  const std::uint8_t* p = bytes.data() + kFeatureHeaderBytes;
  for (Eigen::Index i = 0; i < m.size(); ++i, p += 4) {
    const float v = std::bit_cast<float>(detail::get_u32(p));
    if (!std::isfinite(v)) {
      throw FormatError(FormatError::Kind::NonFinite, "non-finite value at flat index " + std::to_string(i));
    }
    m.data()[i] = v;
  }
  return m;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::Io, "short write to " + path.string());
}

inline FeatureMatrix read_feature_file(const std::filesystem::path& path) {
  try {
    return decode_features(read_bytes(path));
  } catch (const FormatError& e) {
    if (e.kind() == FormatError::Kind::Io) throw;
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

inline void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m) {
  write_bytes(path, encode_features(m));
}

}  // namespace foca::data
