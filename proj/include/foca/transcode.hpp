#pragma once

// Binary-to-audio and binary-to-image transcoding.
//
// Audio: each byte is one unsigned 8-bit PCM sample of a mono 8 kHz WAV.
// Image: bytes laid row-major on one RGB grid; header bytes go to red, data
// section bytes to green, the rest to blue.

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace foca::transcode {

using Bytes = std::vector<std::uint8_t>;

class TranscodeError : public std::runtime_error {
 public:
  enum class Kind { Empty, MalformedHeader, NotDex, Encode };
  TranscodeError(Kind k, const std::string& msg) : std::runtime_error(msg), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class BlobKind { Dex, Raw, Auto };

inline std::string_view to_string(BlobKind k) {
  switch (k) {
    case BlobKind::Dex: return "dex";
    case BlobKind::Raw: return "raw";
    case BlobKind::Auto: return "auto";
  }
  return "?";
}

inline BlobKind parse_kind(std::string_view s) {
  if (s == "dex") return BlobKind::Dex;
  if (s == "raw") return BlobKind::Raw;
  if (s == "auto") return BlobKind::Auto;
  throw std::invalid_argument("unknown kind '" + std::string(s) + "' (expected dex, raw or auto)");
}

inline constexpr std::array<std::uint8_t, 4> kDexMagic{0x64, 0x65, 0x78, 0x0A};
inline constexpr std::size_t kDexHeaderSize = 0x70;
inline constexpr std::size_t kDexDataSizeOffset = 0x68;
inline constexpr std::size_t kDexDataOffOffset = 0x6C;
inline constexpr std::size_t kRawHeaderSize = 112;

inline bool has_dex_magic(const Bytes& b) {
  return b.size() >= kDexMagic.size() && std::equal(kDexMagic.begin(), kDexMagic.end(), b.begin());
}

/// Bytes with a resolved kind (never Auto).
struct Blob {
  Bytes bytes;
  BlobKind kind = BlobKind::Raw;
};

inline Blob make_blob(Bytes bytes, BlobKind requested = BlobKind::Auto) {
  if (bytes.empty()) throw TranscodeError(TranscodeError::Kind::Empty, "empty input");
  Blob b{std::move(bytes), requested};
  if (requested == BlobKind::Auto) {
    b.kind = has_dex_magic(b.bytes) ? BlobKind::Dex : BlobKind::Raw;
  } else if (requested == BlobKind::Dex && !has_dex_magic(b.bytes)) {
    throw TranscodeError(TranscodeError::Kind::NotDex, "input does not start with the dex magic");
  }
  return b;
}

// ---------------------------------------------------------------------------
// Audio

inline constexpr std::uint32_t kWavSampleRate = 8000;

inline Bytes to_wav(const Bytes& samples) {
  if (samples.empty()) throw TranscodeError(TranscodeError::Kind::Empty, "empty input");
  if (samples.size() > 0xFFFFFFFFu - 36u) {
    throw TranscodeError(TranscodeError::Kind::Encode, "input too large for a RIFF container");
  }
  const auto n = static_cast<std::uint32_t>(samples.size());
  Bytes out;
  out.reserve(44 + samples.size());
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  tag("RIFF");
  u32(36 + n);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(1);               // PCM
  u16(1);               // mono
  u32(kWavSampleRate);
  u32(kWavSampleRate);  // byte rate
  u16(1);               // block align
  u16(8);               // bits per sample
  tag("data");
  u32(n);
  out.insert(out.end(), samples.begin(), samples.end());
  return out;
}

inline Bytes to_audio(const Blob& b) { return to_wav(b.bytes); }

// ---------------------------------------------------------------------------
// Sections

struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const Range&) const = default;
};

struct SectionMap {
  BlobKind kind = BlobKind::Raw;
  std::size_t length = 0;
  Range header, data;
  std::vector<Range> rest;  // ascending, non-empty
  bool fallback = false;    // dex header fields were unusable; raw rule applied
};

namespace detail {

inline std::uint32_t read_u32le(const Bytes& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

inline void fill_rest(SectionMap& s) {
  s.rest.clear();
  std::vector<Range> used{s.header, s.data};
  std::sort(used.begin(), used.end(), [](const Range& a, const Range& b) { return a.begin < b.begin; });
  std::size_t cur = 0;
  for (const Range& r : used) {
    if (r.empty()) continue;
    if (r.begin > cur) s.rest.push_back({cur, r.begin});
    cur = std::max(cur, r.end);
  }
  if (cur < s.length) s.rest.push_back({cur, s.length});
}

inline SectionMap raw_sections(std::size_t len) {
  SectionMap s;
  s.length = len;
  const std::size_t h = std::min(kRawHeaderSize, len);
  const std::size_t d = (len - h) / 2;
  s.header = {0, h};
  s.data = {h, h + d};
  fill_rest(s);
  return s;
}

}  // namespace detail

inline SectionMap parse_sections(const Blob& b) {
  const std::size_t len = b.bytes.size();
  if (len == 0) throw TranscodeError(TranscodeError::Kind::Empty, "empty input");
  if (b.kind == BlobKind::Raw) {
    SectionMap s = detail::raw_sections(len);
    s.kind = BlobKind::Raw;
    return s;
  }
  if (len < kDexHeaderSize) {
    throw TranscodeError(TranscodeError::Kind::MalformedHeader,
                         "dex input is " + std::to_string(len) + " bytes, shorter than its 0x70-byte header");
  }
  const std::uint64_t size = detail::read_u32le(b.bytes, kDexDataSizeOffset);
  const std::uint64_t off = detail::read_u32le(b.bytes, kDexDataOffOffset);
  const std::uint64_t begin = std::min<std::uint64_t>(off, len);
  const std::uint64_t end = std::min<std::uint64_t>(off + size, len);
  if (end <= begin || begin < kDexHeaderSize) {
    SectionMap s = detail::raw_sections(len);
    s.kind = BlobKind::Dex;
    s.fallback = true;
    return s;
  }
  SectionMap s;
  s.kind = BlobKind::Dex;
  s.length = len;
  s.header = {0, kDexHeaderSize};
  s.data = {static_cast<std::size_t>(begin), static_cast<std::size_t>(end)};
  detail::fill_rest(s);
  return s;
}

inline nlohmann::ordered_json to_json(const SectionMap& s) {
  auto range = [](const Range& r) { return nlohmann::ordered_json::array({r.begin, r.end}); };
  nlohmann::ordered_json rest = nlohmann::ordered_json::array();
  for (const Range& r : s.rest) rest.push_back(range(r));
  return {{"kind", std::string(to_string(s.kind))}, {"length", s.length}, {"header", range(s.header)},
          {"data", range(s.data)}, {"rest", rest}, {"fallback", s.fallback}};
}

// ---------------------------------------------------------------------------
// Image

/// Row width for a file of `len` bytes.
inline std::size_t image_width(std::size_t len) {
  constexpr std::size_t KiB = 1024;
  if (len < 10 * KiB) return 32;
  if (len < 30 * KiB) return 64;
  if (len < 60 * KiB) return 128;
  if (len < 100 * KiB) return 256;
  if (len < 200 * KiB) return 384;
  if (len < 500 * KiB) return 512;
  if (len < 1000 * KiB) return 768;
  return 1024;
}

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  Bytes pixels;  // height * width * 3, row-major RGB

  const std::uint8_t* at(std::size_t row, std::size_t col) const { return &pixels[(row * width + col) * 3]; }
};

inline RgbImage to_image(const Blob& b, const SectionMap& s) {
  const std::size_t len = b.bytes.size();
  if (len == 0) throw TranscodeError(TranscodeError::Kind::Empty, "empty input");
  RgbImage img;
  img.width = image_width(len);
  img.height = (len + img.width - 1) / img.width;
  img.pixels.assign(img.width * img.height * 3, 0);
  auto paint = [&](const Range& r, int channel) {
    for (std::size_t i = r.begin; i < r.end; ++i) img.pixels[i * 3 + static_cast<std::size_t>(channel)] = b.bytes[i];
  };
  paint(s.header, 0);
  paint(s.data, 1);
  for (const Range& r : s.rest) paint(r, 2);
  return img;
}

inline RgbImage to_image(const Blob& b) { return to_image(b, parse_sections(b)); }

inline constexpr int kPngCompressionLevel = 9;

/// 8-bit RGB, non-interlaced, filter type 0 on every row, one IDAT chunk.
inline Bytes encode_png(const RgbImage& img) {
  if (img.width == 0 || img.height == 0) throw TranscodeError(TranscodeError::Kind::Encode, "empty image");
  Bytes raw;
  raw.reserve(img.height * (1 + img.width * 3));
  for (std::size_t r = 0; r < img.height; ++r) {
    raw.push_back(0);
    const auto* row = img.at(r, 0);
    raw.insert(raw.end(), row, row + img.width * 3);
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  Bytes z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), kPngCompressionLevel) != Z_OK) {
    throw TranscodeError(TranscodeError::Kind::Encode, "deflate failed");
  }
  z.resize(zlen);

  Bytes out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  auto be32 = [](Bytes& o, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto chunk = [&](const char* type, const Bytes& body) {
    be32(out, static_cast<std::uint32_t>(body.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), body.begin(), body.end());
    const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    be32(out, static_cast<std::uint32_t>(crc));
  };
  Bytes ihdr;
  be32(ihdr, static_cast<std::uint32_t>(img.width));
  be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // depth 8, RGB, deflate, filter 0, no interlace
  chunk("IHDR", ihdr);
  chunk("IDAT", z);
  chunk("IEND", {});
  return out;
}

}  // namespace foca::transcode
