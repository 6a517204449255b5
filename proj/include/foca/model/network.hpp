#pragma once

// The downstream classifiers: a unimodal conv classifier and three fusion
// networks (concatenation, Euclidean cross-attention, hyperbolic
// cross-attention) that share the conv blocks and the 120/30 head.

#include "foca/hca.hpp"
#include "foca/model/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace foca::model {

class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode { Audio, Visual, Concat, EuclidXattn, Foca };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Audio: return "audio";
    case Mode::Visual: return "visual";
    case Mode::Concat: return "concat";
    case Mode::EuclidXattn: return "euclid-xattn";
    case Mode::Foca: return "foca";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::Audio, Mode::Visual, Mode::Concat, Mode::EuclidXattn, Mode::Foca}) {
    if (to_string(m) == s) return m;
  }
  throw ContractError("unknown mode '" + std::string(s) + "'");
}

inline bool is_unimodal(Mode m) { return m == Mode::Audio || m == Mode::Visual; }
inline bool uses_attention(Mode m) { return m == Mode::EuclidXattn || m == Mode::Foca; }

struct ArchConfig {
  int conv1_filters = 64;
  int conv2_filters = 128;
  int kernel = 3;
  int fc1 = 120;
  int fc2 = 30;
  int unimodal_fc = 128;
};

/// Token count after conv(valid) -> pool2 -> conv(valid) -> pool2.
inline int conv_output_length(int input_length, int kernel = 3) {
  const int c1 = input_length - kernel + 1;
  if (c1 < 1) return 0;
  const int c2 = c1 / 2 - kernel + 1;
  if (c2 < 1) return 0;
  return c2 / 2;
}

struct ConvBlockParams {
  Matrix w1, b1;  // F1 x k, 1 x F1
  Matrix w2, b2;  // F2 x (F1 k), 1 x F2
};

struct DenseParams {
  Matrix w, b;  // out x in, 1 x out
};

struct ModelParams {
  ConvBlockParams audio, visual;
  hca::HcaParams attn;
  DenseParams fc1, fc2, out;
};

/// Shapes and weights of one classifier.
struct Model {
  Mode mode = Mode::Foca;
  ArchConfig arch;
  int d_audio = 0;
  int d_visual = 0;
  int classes = 2;
  ModelParams params;

  bool uses_audio() const { return mode != Mode::Visual; }
  bool uses_visual() const { return mode != Mode::Audio; }
  int tokens_audio() const { return conv_output_length(d_audio, arch.kernel); }
  int tokens_visual() const { return conv_output_length(d_visual, arch.kernel); }
  /// Token count fed to attention: the shorter sequence.
  int tokens_fused() const { return std::min(tokens_audio(), tokens_visual()); }
  int token_width() const { return arch.conv2_filters; }

  int head_input() const {
    const int d = token_width();
    switch (mode) {
      case Mode::Audio: return tokens_audio() * d;
      case Mode::Visual: return tokens_visual() * d;
      case Mode::Concat: return (tokens_audio() + tokens_visual()) * d;
      default: return tokens_fused() * d;
    }
  }
  int penultimate_width() const { return is_unimodal(mode) ? arch.unimodal_fc : arch.fc2; }
};

// ---------------------------------------------------------------------------
// Parameter enumeration

struct NamedTensor {
  std::string name;
  Matrix* tensor;
};

/// Active tensors of a model in a fixed order; names are stable checkpoint keys.
inline std::vector<NamedTensor> named_tensors(ModelParams& p, Mode mode) {
  std::vector<NamedTensor> out;
  auto conv = [&](const std::string& prefix, ConvBlockParams& c) {
    out.push_back({prefix + ".conv1.weight", &c.w1});
    out.push_back({prefix + ".conv1.bias", &c.b1});
    out.push_back({prefix + ".conv2.weight", &c.w2});
    out.push_back({prefix + ".conv2.bias", &c.b2});
  };
  auto dense = [&](const std::string& prefix, DenseParams& d) {
    out.push_back({prefix + ".weight", &d.w});
    out.push_back({prefix + ".bias", &d.b});
  };
  if (mode != Mode::Visual) conv("audio", p.audio);
  if (mode != Mode::Audio) conv("visual", p.visual);
  if (uses_attention(mode)) {
    out.push_back({"attn.wq_a", &p.attn.wq_a});
    out.push_back({"attn.wk_a", &p.attn.wk_a});
    out.push_back({"attn.wv_a", &p.attn.wv_a});
    out.push_back({"attn.wq_v", &p.attn.wq_v});
    out.push_back({"attn.wk_v", &p.attn.wk_v});
    out.push_back({"attn.wv_v", &p.attn.wv_v});
  }
  dense("fc1", p.fc1);
  if (!is_unimodal(mode)) dense("fc2", p.fc2);
  dense("out", p.out);
  return out;
}

inline std::vector<NamedTensor> named_tensors(Model& m) { return named_tensors(m.params, m.mode); }

inline std::vector<std::pair<std::string, const Matrix*>> named_tensors(const Model& m) {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& t : named_tensors(const_cast<ModelParams&>(m.params), m.mode)) out.emplace_back(t.name, t.tensor);
  return out;
}

struct ParamCountItem {
  std::string layer;
  std::int64_t count = 0;
};

struct ParamReport {
  std::vector<ParamCountItem> items;  // one entry per layer (weight + bias together)
  std::int64_t total = 0;
};

/// Exact trainable scalar count, itemized per layer.
inline ParamReport count_params(const Model& m) {
  ParamReport r;
  for (const auto& [name, t] : named_tensors(m)) {
    const auto dot = name.rfind('.');
    const bool suffixed = name.ends_with(".weight") || name.ends_with(".bias");
    const std::string layer = suffixed ? name.substr(0, dot) : name;
    if (r.items.empty() || r.items.back().layer != layer) r.items.push_back({layer, 0});
    r.items.back().count += t->size();
    r.total += t->size();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Construction

enum class InitKind { Random, Identity, Zero };

/// Allocates every tensor for the model's shapes and initializes it.
///
/// Random: He-uniform for ReLU layers, +-1/sqrt(fan_in) for the output layer,
/// +-1/sqrt(d) for the six attention matrices, zero biases. Identity: random
/// everywhere except identity attention matrices and a visual conv block tied
/// to the audio one. Zero: every entry zero.
template <class Rng>
Model make_model(Mode mode, const ArchConfig& arch, int d_audio, int d_visual, int classes, InitKind init,
                 Rng& rng) {
  if (classes < 2) throw ContractError("need at least 2 classes");
  Model m;
  m.mode = mode;
  m.arch = arch;
  m.d_audio = d_audio;
  m.d_visual = d_visual;
  m.classes = classes;
  if (m.uses_audio() && m.tokens_audio() < 1) {
    throw ContractError("audio input length " + std::to_string(d_audio) + " is too short for two conv/pool stages");
  }
  if (m.uses_visual() && m.tokens_visual() < 1) {
    throw ContractError("visual input length " + std::to_string(d_visual) +
                        " is too short for two conv/pool stages");
  }

  auto uniform = [&](Matrix& w, Eigen::Index rows, Eigen::Index cols, double bound) {
    w.resize(rows, cols);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = init == InitKind::Zero ? 0.0 : u(rng);
  };
  auto he = [](Eigen::Index fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); };
  const int k = arch.kernel;
  auto conv = [&](ConvBlockParams& c) {
    uniform(c.w1, arch.conv1_filters, k, he(k));
    c.b1 = Matrix::Zero(1, arch.conv1_filters);
    uniform(c.w2, arch.conv2_filters, static_cast<Eigen::Index>(arch.conv1_filters) * k,
            he(static_cast<Eigen::Index>(arch.conv1_filters) * k));
    c.b2 = Matrix::Zero(1, arch.conv2_filters);
  };
  auto dense = [&](DenseParams& d, int in, int out, double bound) {
    uniform(d.w, out, in, bound);
    d.b = Matrix::Zero(1, out);
  };

  ModelParams& p = m.params;
  if (m.uses_audio()) conv(p.audio);
  if (m.uses_visual()) {
    if (init == InitKind::Identity && m.uses_audio()) {
      p.visual = p.audio;
    } else {
      conv(p.visual);
    }
  }
  if (uses_attention(mode)) {
    const int d = m.token_width();
    if (init == InitKind::Identity) {
      p.attn = hca::HcaParams::identity(d);
    } else if (init == InitKind::Zero) {
      p.attn = hca::HcaParams::zeros(d);
    } else {
      p.attn = hca::HcaParams::random(d, rng);
    }
  }
  const int in = m.head_input();
  if (is_unimodal(mode)) {
    dense(p.fc1, in, arch.unimodal_fc, he(in));
    dense(p.out, arch.unimodal_fc, classes, 1.0 / std::sqrt(static_cast<double>(arch.unimodal_fc)));
  } else {
    dense(p.fc1, in, arch.fc1, he(in));
    dense(p.fc2, arch.fc1, arch.fc2, he(arch.fc1));
    dense(p.out, arch.fc2, classes, 1.0 / std::sqrt(static_cast<double>(arch.fc2)));
  }
  return m;
}

/// Same tensor shapes as `m`, all zero.
inline ModelParams zeros_like(const Model& m) {
  Model z = m;
  for (auto& t : named_tensors(z)) t.tensor->setZero();
  return z.params;
}

// ---------------------------------------------------------------------------
// Forward / backward for one sample

struct ConvTrace {
  Matrix x;
  Matrix patches1, pre1;
  PoolResult pool1;
  Matrix patches2, pre2;
  PoolResult pool2;
};

/// L -> n x conv2_filters tokens.
inline Matrix conv_block_forward(const Vector& x, const ConvBlockParams& p, int kernel, ConvTrace* tr = nullptr) {
  if (conv_output_length(static_cast<int>(x.size()), kernel) < 1) {
    throw ContractError("conv block input length " + std::to_string(x.size()) + " is too short");
  }
  if (!x.allFinite()) throw ContractError("conv block input is not finite");
  ConvTrace local;
  ConvTrace& t = tr ? *tr : local;
  t.x = Eigen::Map<const Matrix>(x.data(), x.size(), 1);
  t.patches1 = im2col(t.x, kernel);
  t.pre1 = t.patches1 * p.w1.transpose();
  t.pre1.rowwise() += p.b1.row(0);
  t.pool1 = max_pool2(relu(t.pre1));
  t.patches2 = im2col(t.pool1.out, kernel);
  t.pre2 = t.patches2 * p.w2.transpose();
  t.pre2.rowwise() += p.b2.row(0);
  t.pool2 = max_pool2(relu(t.pre2));
  return t.pool2.out;
}

/// Accumulates weight gradients; the input gradient is not needed.
inline void conv_block_backward(const ConvTrace& t, const ConvBlockParams& p, int kernel, const Matrix& d_tokens,
                                ConvBlockParams& g) {
  Matrix d_pre2 = max_pool2_backward(d_tokens, t.pool2.argmax, t.pre2.rows());
  d_pre2.array() *= (t.pre2.array() > 0.0).cast<double>();
  g.w2.noalias() += d_pre2.transpose() * t.patches2;
  g.b2 += d_pre2.colwise().sum();
  const Matrix d_patches2 = d_pre2 * p.w2;
  const Matrix d_pool1 = col2im(d_patches2, t.pool1.out.rows(), t.pool1.out.cols(), kernel);
  Matrix d_pre1 = max_pool2_backward(d_pool1, t.pool1.argmax, t.pre1.rows());
  d_pre1.array() *= (t.pre1.array() > 0.0).cast<double>();
  g.w1.noalias() += d_pre1.transpose() * t.patches1;
  g.b1 += d_pre1.colwise().sum();
}

/// Scaled dot-product cross-attention in both directions, outputs summed.
struct EuclidTrace {
  Matrix ta, tv;
  Matrix qa, ka, va, qv, kv, vv;
  Matrix a_av, a_va;
};

inline Matrix row_softmax(Matrix s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    s.row(i) = (s.row(i).array() - s.row(i).maxCoeff()).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

inline Matrix euclid_xattn_forward(const Matrix& ta, const Matrix& tv, const hca::HcaParams& p, EuclidTrace& t) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(ta.cols()));
  t.ta = ta;
  t.tv = tv;
  t.qa = ta * p.wq_a.transpose();
  t.ka = ta * p.wk_a.transpose();
  t.va = ta * p.wv_a.transpose();
  t.qv = tv * p.wq_v.transpose();
  t.kv = tv * p.wk_v.transpose();
  t.vv = tv * p.wv_v.transpose();
  t.a_av = row_softmax(scale * t.qa * t.kv.transpose());
  t.a_va = row_softmax(scale * t.qv * t.ka.transpose());
  return t.a_av * t.vv + t.a_va * t.va;
}

inline void euclid_xattn_backward(const EuclidTrace& t, const hca::HcaParams& p, const Matrix& d_out,
                                  hca::HcaParams& g, Matrix& d_ta, Matrix& d_tv) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(t.ta.cols()));
  auto softmax_back = [](const Matrix& a, const Matrix& da) {
    Matrix ds = a.cwiseProduct(da);
    for (Eigen::Index i = 0; i < a.rows(); ++i) ds.row(i) -= a.row(i) * ds.row(i).sum();
    return ds;
  };
  const Matrix d_vv = t.a_av.transpose() * d_out;
  const Matrix d_va = t.a_va.transpose() * d_out;
  const Matrix ds_av = scale * softmax_back(t.a_av, d_out * t.vv.transpose());
  const Matrix ds_va = scale * softmax_back(t.a_va, d_out * t.va.transpose());
  const Matrix d_qa = ds_av * t.kv;
  const Matrix d_kv = ds_av.transpose() * t.qa;
  const Matrix d_qv = ds_va * t.ka;
  const Matrix d_ka = ds_va.transpose() * t.qv;

  g.wq_a.noalias() += d_qa.transpose() * t.ta;
  g.wk_a.noalias() += d_ka.transpose() * t.ta;
  g.wv_a.noalias() += d_va.transpose() * t.ta;
  g.wq_v.noalias() += d_qv.transpose() * t.tv;
  g.wk_v.noalias() += d_kv.transpose() * t.tv;
  g.wv_v.noalias() += d_vv.transpose() * t.tv;
  d_ta = d_qa * p.wq_a + d_ka * p.wk_a + d_va * p.wv_a;
  d_tv = d_qv * p.wq_v + d_kv * p.wk_v + d_vv * p.wv_v;
}

/// Everything the backward pass needs from one forward evaluation.
struct SampleTrace {
  ConvTrace conv_a, conv_v;
  Matrix tokens_a, tokens_v;
  hca::HcaTrace hca;
  hca::HcaOutput hca_out;
  EuclidTrace euclid;
  Vector z;                 // head input
  Vector pre1, mask1, h1;   // h1 = relu(pre1) * mask1
  Vector pre2, mask2, h2;
};

struct ForwardResult {
  Vector logits;
  Vector probs;
  Vector penultimate;  // post-ReLU, pre-dropout activations of the last hidden layer
  std::optional<hca::AttentionWeights> attn_av, attn_va;
};

inline Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

/// One sample through the network. `dropout_rng` null means inference mode.
template <class Rng = std::mt19937_64>
ForwardResult forward(const Model& m, const Vector& x_audio, const Vector& x_visual, double dropout_rate,
                      Rng* dropout_rng = nullptr, SampleTrace* trace = nullptr) {
  SampleTrace local;
  SampleTrace& t = trace ? *trace : local;
  const ModelParams& p = m.params;
  const int k = m.arch.kernel;
  ForwardResult r;

  if (m.uses_audio()) {
    if (x_audio.size() != m.d_audio) {
      throw ContractError("audio input has length " + std::to_string(x_audio.size()) + ", model expects " +
                          std::to_string(m.d_audio));
    }
    t.tokens_a = conv_block_forward(x_audio, p.audio, k, &t.conv_a);
  }
  if (m.uses_visual()) {
    if (x_visual.size() != m.d_visual) {
      throw ContractError("visual input has length " + std::to_string(x_visual.size()) + ", model expects " +
                          std::to_string(m.d_visual));
    }
    t.tokens_v = conv_block_forward(x_visual, p.visual, k, &t.conv_v);
  }

  switch (m.mode) {
    case Mode::Audio: t.z = flatten(t.tokens_a); break;
    case Mode::Visual: t.z = flatten(t.tokens_v); break;
    case Mode::Concat:
      t.z.resize(t.tokens_a.size() + t.tokens_v.size());
      t.z << flatten(t.tokens_a), flatten(t.tokens_v);
      break;
    case Mode::EuclidXattn: {
      const Eigen::Index n = m.tokens_fused();
      t.z = flatten(euclid_xattn_forward(t.tokens_a.topRows(n), t.tokens_v.topRows(n), p.attn, t.euclid));
      r.attn_av = hca::AttentionWeights{t.euclid.a_av, hca::Direction::AudioToVisual};
      r.attn_va = hca::AttentionWeights{t.euclid.a_va, hca::Direction::VisualToAudio};
      break;
    }
    case Mode::Foca: {
      const Eigen::Index n = m.tokens_fused();
      t.hca_out = hca::hca_forward(t.tokens_a.topRows(n), t.tokens_v.topRows(n), p.attn, &t.hca);
      t.z = flatten(t.hca_out.fused);
      r.attn_av = t.hca_out.av;
      r.attn_va = t.hca_out.va;
      break;
    }
  }

  auto mask = [&](Eigen::Index n) {
    return dropout_rng ? dropout_mask(n, dropout_rate, *dropout_rng) : Vector(Vector::Ones(n));
  };
  t.pre1 = p.fc1.w * t.z + p.fc1.b.row(0).transpose();
  Vector a1 = relu(t.pre1);
  t.mask1 = mask(a1.size());
  t.h1 = a1.cwiseProduct(t.mask1);
  if (is_unimodal(m.mode)) {
    r.penultimate = a1;
    r.logits = p.out.w * t.h1 + p.out.b.row(0).transpose();
  } else {
    t.pre2 = p.fc2.w * t.h1 + p.fc2.b.row(0).transpose();
    Vector a2 = relu(t.pre2);
    t.mask2 = mask(a2.size());
    t.h2 = a2.cwiseProduct(t.mask2);
    r.penultimate = a2;
    r.logits = p.out.w * t.h2 + p.out.b.row(0).transpose();
  }
  r.probs = softmax(r.logits);
  return r;
}

/// Accumulates d(loss)/d(params) into `g` given d(loss)/d(logits).
inline void backward(const Model& m, const SampleTrace& t, const Vector& d_logits, ModelParams& g) {
  const ModelParams& p = m.params;
  const int k = m.arch.kernel;

  auto dense_back = [](const DenseParams& layer, DenseParams& grad, const Vector& input, const Vector& d_out) {
    grad.w.noalias() += d_out * input.transpose();
    grad.b.row(0) += d_out.transpose();
    return Vector(layer.w.transpose() * d_out);
  };

  Vector d_z;
  if (is_unimodal(m.mode)) {
    Vector d_h1 = dense_back(p.out, g.out, t.h1, d_logits);
    Vector d_pre1 = d_h1.cwiseProduct(t.mask1).cwiseProduct((t.pre1.array() > 0.0).cast<double>().matrix());
    d_z = dense_back(p.fc1, g.fc1, t.z, d_pre1);
  } else {
    Vector d_h2 = dense_back(p.out, g.out, t.h2, d_logits);
    Vector d_pre2 = d_h2.cwiseProduct(t.mask2).cwiseProduct((t.pre2.array() > 0.0).cast<double>().matrix());
    Vector d_h1 = dense_back(p.fc2, g.fc2, t.h1, d_pre2);
    Vector d_pre1 = d_h1.cwiseProduct(t.mask1).cwiseProduct((t.pre1.array() > 0.0).cast<double>().matrix());
    d_z = dense_back(p.fc1, g.fc1, t.z, d_pre1);
  }

  Matrix d_ta, d_tv;
  auto unflat = [](const double* data, Eigen::Index rows, Eigen::Index cols) {
    return Matrix(Eigen::Map<const Matrix>(data, rows, cols));
  };
  switch (m.mode) {
    case Mode::Audio: d_ta = unflat(d_z.data(), t.tokens_a.rows(), t.tokens_a.cols()); break;
    case Mode::Visual: d_tv = unflat(d_z.data(), t.tokens_v.rows(), t.tokens_v.cols()); break;
    case Mode::Concat:
      d_ta = unflat(d_z.data(), t.tokens_a.rows(), t.tokens_a.cols());
      d_tv = unflat(d_z.data() + t.tokens_a.size(), t.tokens_v.rows(), t.tokens_v.cols());
      break;
    case Mode::EuclidXattn:
    case Mode::Foca: {
      const Eigen::Index n = m.tokens_fused();
      const Eigen::Index d = m.token_width();
      const Matrix d_fused = unflat(d_z.data(), n, d);
      Matrix d_a, d_v;
      if (m.mode == Mode::Foca) {
        hca::HcaGrad hg = hca::hca_backward(t.hca, t.hca_out, p.attn, d_fused);
        auto src = hg.d_params.all();
        auto dst = g.attn.all();
        for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] += *src[i];
        d_a = std::move(hg.d_h_a);
        d_v = std::move(hg.d_h_v);
      } else {
        euclid_xattn_backward(t.euclid, p.attn, d_fused, g.attn, d_a, d_v);
      }
      d_ta = Matrix::Zero(t.tokens_a.rows(), d);
      d_tv = Matrix::Zero(t.tokens_v.rows(), d);
      d_ta.topRows(n) = d_a;
      d_tv.topRows(n) = d_v;
      break;
    }
  }
  if (m.uses_audio()) conv_block_backward(t.conv_a, p.audio, k, d_ta, g.audio);
  if (m.uses_visual()) conv_block_backward(t.conv_v, p.visual, k, d_tv, g.visual);
}

}  // namespace foca::model
