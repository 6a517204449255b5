#pragma once

// Binary checkpoint:
//
//   "FOCA" | u16 version | u8 mode | u32 json_len | json config
//   u32 tensor_count | { u16 name_len | name | u32 rows | u32 cols | f64[rows*cols] }
//
// All integers and floats little-endian; tensors row-major.

#include "foca/model/network.hpp"
#include "foca/model/train.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace foca::model {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Model model;
  std::vector<std::string> class_names;
  nlohmann::ordered_json train;  // resolved training config, informational
};

inline nlohmann::ordered_json to_json(const ArchConfig& a) {
  return {{"conv1_filters", a.conv1_filters}, {"conv2_filters", a.conv2_filters}, {"kernel", a.kernel},
          {"fc1", a.fc1}, {"fc2", a.fc2}, {"unimodal_fc", a.unimodal_fc}};
}

inline ArchConfig arch_from_json(const nlohmann::json& j) {
  ArchConfig a;
  a.conv1_filters = j.at("conv1_filters").get<int>();
  a.conv2_filters = j.at("conv2_filters").get<int>();
  a.kernel = j.at("kernel").get<int>();
  a.fc1 = j.at("fc1").get<int>();
  a.fc2 = j.at("fc2").get<int>();
  a.unimodal_fc = j.at("unimodal_fc").get<int>();
  return a;
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"dropout", c.dropout},
          {"patience", c.patience},
          {"validation_fraction", c.validation_fraction},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"seed", c.seed}};
}

namespace detail {

template <class T>
void put(std::vector<unsigned char>& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : b_(b) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
  const Model& m = ck.model;
  nlohmann::ordered_json cfg;
  cfg["mode"] = std::string(to_string(m.mode));
  cfg["arch"] = to_json(m.arch);
  cfg["d_audio"] = m.d_audio;
  cfg["d_visual"] = m.d_visual;
  cfg["classes"] = ck.class_names;
  cfg["train"] = ck.train.is_null() ? nlohmann::ordered_json::object() : ck.train;
  const std::string js = cfg.dump();

  std::vector<unsigned char> out{'F', 'O', 'C', 'A'};
  detail::put<std::uint16_t>(out, kCheckpointVersion);
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(m.mode));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(js.size()));
  out.insert(out.end(), js.begin(), js.end());
  const auto tensors = named_tensors(m);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rows()));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t->cols()));
    for (Eigen::Index i = 0; i < t->size(); ++i) detail::put<double>(out, t->data()[i]);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  detail::Reader r(bytes);
  if (r.str(4) != "FOCA") throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto tag = r.get<std::uint8_t>();
  const auto js_len = r.get<std::uint32_t>();
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(r.str(js_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }

  Checkpoint ck;
  try {
    const Mode mode = parse_mode(cfg.at("mode").get<std::string>());
    if (static_cast<std::uint8_t>(mode) != tag) throw CheckpointError("checkpoint mode tag disagrees with config");
    ck.class_names = cfg.at("classes").get<std::vector<std::string>>();
    std::mt19937_64 unused(0);
    ck.model = make_model(mode, arch_from_json(cfg.at("arch")), cfg.at("d_audio").get<int>(),
                          cfg.at("d_visual").get<int>(), static_cast<int>(ck.class_names.size()), InitKind::Zero,
                          unused);
    ck.train = cfg.value("train", nlohmann::ordered_json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config incomplete: ") + e.what());
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }

  std::map<std::string, Matrix*> slots;
  for (auto& t : named_tensors(ck.model)) slots.emplace(t.name, t.tensor);
  const auto count = r.get<std::uint32_t>();
  if (count != slots.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " tensors, expected " +
                          std::to_string(slots.size()));
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str(r.get<std::uint16_t>());
    auto it = slots.find(name);
    if (it == slots.end()) throw CheckpointError("unexpected tensor '" + name + "'");
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    Matrix& t = *it->second;
    if (rows != t.rows() || cols != t.cols()) {
      throw CheckpointError("tensor '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", expected " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double v = r.get<double>();
      if (!std::isfinite(v)) throw CheckpointError("tensor '" + name + "' holds a non-finite value");
      t.data()[i] = v;
    }
    slots.erase(it);
  }
  if (!r.done()) throw CheckpointError("trailing bytes after the last tensor");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace foca::model
