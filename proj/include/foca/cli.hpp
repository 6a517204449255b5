#pragma once

// Command-line front end. `run` is the whole program minus process setup so
// tests can drive it in-process.
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

#include "foca/data/features.hpp"
#include "foca/data/folds.hpp"
#include "foca/data/manifest.hpp"
#include "foca/data/metrics.hpp"
#include "foca/data/synth.hpp"
#include "foca/model/checkpoint.hpp"
#include "foca/model/network.hpp"
#include "foca/model/train.hpp"
#include "foca/transcode.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace foca::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Shortest round-trip decimal form.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Sidecar path for commands whose output is a single file.
inline fs::path sidecar_config(const fs::path& out) { return fs::path(out.string() + ".config.json"); }

inline data::Dataset load_manifest_dataset(const fs::path& manifest) {
  return data::load_dataset(data::read_manifest(manifest));
}

inline void check_dims(const model::Model& m, const data::Dataset& ds) {
  if (m.uses_audio() && ds.audio.cols() != m.d_audio) {
    throw InputError("checkpoint expects audio dimension " + std::to_string(m.d_audio) + " but manifest has " +
                     std::to_string(ds.audio.cols()));
  }
  if (m.uses_visual() && ds.visual.cols() != m.d_visual) {
    throw InputError("checkpoint expects visual dimension " + std::to_string(m.d_visual) + " but manifest has " +
                     std::to_string(ds.visual.cols()));
  }
}

}  // namespace detail

struct ArchOptions {
  model::ArchConfig arch;

  void add(CLI::App* sub) {
    sub->add_option("--conv1-filters", arch.conv1_filters, "first conv layer filters")->capture_default_str();
    sub->add_option("--conv2-filters", arch.conv2_filters, "second conv layer filters (token width)")
        ->capture_default_str();
    sub->add_option("--fc1", arch.fc1, "first fusion head layer width")->capture_default_str();
    sub->add_option("--fc2", arch.fc2, "second fusion head layer width")->capture_default_str();
    sub->add_option("--unimodal-fc", arch.unimodal_fc, "unimodal hidden layer width")->capture_default_str();
  }
};

inline const std::map<std::string, model::Mode>& mode_map() {
  static const std::map<std::string, model::Mode> m{{"foca", model::Mode::Foca},
                                                    {"concat", model::Mode::Concat},
                                                    {"euclid-xattn", model::Mode::EuclidXattn},
                                                    {"audio", model::Mode::Audio},
                                                    {"visual", model::Mode::Visual}};
  return m;
}

// ---------------------------------------------------------------------------

struct TranscodeArgs {
  fs::path in, out;
  std::string kind = "auto";
  bool audio = false, image = false, sections_json = false;
};

inline int cmd_transcode(const TranscodeArgs& a, std::ostream& log) {
  const bool both = !a.audio && !a.image;
  const bool do_audio = a.audio || both;
  const bool do_image = a.image || both;
  detail::make_dir(a.out);
  detail::write_json(a.out / "config.json", {{"command", "transcode"},
                                             {"in", a.in.string()},
                                             {"out", a.out.string()},
                                             {"kind", a.kind},
                                             {"audio", do_audio},
                                             {"image", do_image},
                                             {"sections_json", a.sections_json}});
  if (!fs::is_regular_file(a.in)) throw InputError("input file not found: " + a.in.string());
  const auto blob = transcode::make_blob(data::read_bytes(a.in), transcode::parse_kind(a.kind));
  const std::string base = a.in.filename().string();
  std::optional<transcode::SectionMap> sections;
  if (do_image || a.sections_json) sections = transcode::parse_sections(blob);
  if (sections && sections->fallback) log << "warning: dex data section unusable, raw section rule applied\n";
  if (do_audio) data::write_bytes(a.out / (base + ".wav"), transcode::to_audio(blob));
  if (do_image) data::write_bytes(a.out / (base + ".png"), transcode::encode_png(transcode::to_image(blob, *sections)));
  if (a.sections_json) detail::write_json(a.out / (base + ".sections.json"), transcode::to_json(*sections));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  data::SynthConfig cfg;
};

inline int cmd_synth(SynthArgs a) {
  detail::make_dir(a.out);
  const auto& c = a.cfg;
  detail::write_json(a.out / "config.json", {{"command", "synth"},
                                             {"out", a.out.string()},
                                             {"n_per_class", c.n_per_class},
                                             {"parents", c.parents},
                                             {"leaves_per_parent", c.leaves_per_parent},
                                             {"d_audio", c.d_audio},
                                             {"d_visual", c.d_visual},
                                             {"noise_sigma", c.noise_sigma},
                                             {"audio_noise_scale", c.audio_noise_scale},
                                             {"feature_scale", c.feature_scale},
                                             {"seed", c.seed}});
  data::SynthDataset ds;
  try {
    ds = data::synth_dataset(c);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  data::write_synth(a.out, ds);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CrossvalArgs {
  fs::path manifest, out;
  std::string mode = "foca";
  int folds = 5;
  std::string init = "random";
  model::TrainConfig train;
  ArchOptions arch;
};

inline json resolved(const CrossvalArgs& a) {
  return {{"command", "crossval"},  {"manifest", a.manifest.string()},   {"out", a.out.string()},
          {"mode", a.mode},         {"folds", a.folds},                  {"init", a.init},
          {"train", model::to_json(a.train)}, {"arch", model::to_json(a.arch.arch)}};
}

inline model::InitKind parse_init(const std::string& s) {
  if (s == "random") return model::InitKind::Random;
  if (s == "identity") return model::InitKind::Identity;
  throw InputError("unknown init '" + s + "'");
}

inline int cmd_crossval(const CrossvalArgs& a, std::ostream& log) {
  detail::make_dir(a.out);
  detail::write_json(a.out / "config.json", resolved(a));
  const data::Dataset ds = detail::load_manifest_dataset(a.manifest);
  const auto folds = data::make_folds(ds.label_names, a.folds, a.train.seed);
  const model::Mode mode = model::parse_mode(a.mode);
  const auto result = model::cross_validate(mode, a.arch.arch, ds, folds, a.train, parse_init(a.init));
  for (std::size_t f = 0; f < result.models.size(); ++f) {
    model::save_checkpoint(a.out / ("fold_" + std::to_string(f) + ".ckpt"),
                           {result.models[f], ds.classes, model::to_json(a.train)});
  }
  detail::write_json(a.out / "report.json", data::to_json(result.report));
  log << a.mode << ": accuracy " << result.report.accuracy().mean << " macro-F1 " << result.report.macro_f1().mean
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InitArgs {
  fs::path manifest, out;
  std::string mode = "foca";
  std::string init = "identity";
  std::uint64_t seed = 0;
  ArchOptions arch;
};

/// Writes an untrained checkpoint shaped for the manifest's dimensions and classes.
inline int cmd_init(const InitArgs& a) {
  detail::write_json(detail::sidecar_config(a.out), {{"command", "init"},
                                                     {"manifest", a.manifest.string()},
                                                     {"out", a.out.string()},
                                                     {"mode", a.mode},
                                                     {"init", a.init},
                                                     {"seed", a.seed},
                                                     {"arch", model::to_json(a.arch.arch)}});
  const data::Dataset ds = detail::load_manifest_dataset(a.manifest);
  std::mt19937_64 rng(a.seed);
  model::Model m = model::make_model(model::parse_mode(a.mode), a.arch.arch, static_cast<int>(ds.audio.cols()),
                                     static_cast<int>(ds.visual.cols()), ds.num_classes(), parse_init(a.init), rng);
  model::save_checkpoint(a.out, {std::move(m), ds.classes, json::object()});
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  fs::path checkpoint, manifest, out;
  std::string sample;
};

inline int cmd_inspect_attention(const InspectArgs& a) {
  detail::write_json(detail::sidecar_config(a.out), {{"command", "inspect-attention"},
                                                     {"checkpoint", a.checkpoint.string()},
                                                     {"manifest", a.manifest.string()},
                                                     {"sample", a.sample},
                                                     {"out", a.out.string()}});
  const auto ck = model::load_checkpoint(a.checkpoint);
  if (!model::uses_attention(ck.model.mode)) {
    throw InputError("checkpoint mode '" + std::string(model::to_string(ck.model.mode)) + "' has no attention");
  }
  const data::Dataset ds = detail::load_manifest_dataset(a.manifest);
  detail::check_dims(ck.model, ds);
  const auto it = std::find(ds.sample_ids.begin(), ds.sample_ids.end(), a.sample);
  if (it == ds.sample_ids.end()) throw InputError("unknown sample id '" + a.sample + "'");
  const auto i = static_cast<std::size_t>(it - ds.sample_ids.begin());
  const auto r = model::forward(ck.model, model::row_of(ds.audio, i), model::row_of(ds.visual, i), 0.0);

  std::string csv = "q_index,k_index,weight,direction\n";
  for (const auto* w : {&*r.attn_av, &*r.attn_va}) {
    const std::string dir(hca::to_string(w->direction));
    for (Eigen::Index q = 0; q < w->alpha.rows(); ++q)
      for (Eigen::Index k = 0; k < w->alpha.cols(); ++k)
        csv += std::to_string(q) + "," + std::to_string(k) + "," + detail::num(w->alpha(q, k)) + "," + dir + "\n";
  }
  detail::write_text(a.out, csv);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EmbedArgs {
  fs::path checkpoint, manifest, out;
};

inline int cmd_embed(const EmbedArgs& a) {
  detail::write_json(detail::sidecar_config(a.out), {{"command", "embed"},
                                                     {"checkpoint", a.checkpoint.string()},
                                                     {"manifest", a.manifest.string()},
                                                     {"out", a.out.string()}});
  const auto ck = model::load_checkpoint(a.checkpoint);
  const data::Dataset ds = detail::load_manifest_dataset(a.manifest);
  detail::check_dims(ck.model, ds);
  const int width = ck.model.penultimate_width();
  std::string csv = "sample_id,label";
  for (int k = 0; k < width; ++k) csv += ",e" + std::to_string(k);
  csv += "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = model::forward(ck.model, model::row_of(ds.audio, i), model::row_of(ds.visual, i), 0.0);
    csv += ds.sample_ids[i] + "," + ds.label_names[i];
    for (double v : r.penultimate) csv += "," + detail::num(v);
    csv += "\n";
  }
  detail::write_text(a.out, csv);
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Hyperbolic cross-attention fusion toolkit", "foca"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "foca 0.1.0");

  TranscodeArgs ta;
  auto* t = app.add_subcommand("transcode", "convert a binary to .wav and/or .png");
  t->add_option("--in", ta.in, "input binary")->required();
  t->add_option("--out", ta.out, "output directory")->required();
  t->add_option("--kind", ta.kind, "dex, raw or auto")->check(CLI::IsMember({"dex", "raw", "auto"}))->capture_default_str();
  t->add_flag("--audio", ta.audio, "write FILE.wav");
  t->add_flag("--image", ta.image, "write FILE.png");
  t->add_flag("--sections-json", ta.sections_json, "write FILE.sections.json");

  SynthArgs sa;
  auto* s = app.add_subcommand("synth", "generate the synthetic two-level dataset");
  s->add_option("--out", sa.out, "output directory")->required();
  s->add_option("--n-per-class", sa.cfg.n_per_class, "samples per class")->capture_default_str();
  s->add_option("--seed", sa.cfg.seed, "generator seed")->capture_default_str();
  s->add_option("--parents", sa.cfg.parents, "coarse classes")->capture_default_str();
  s->add_option("--leaves", sa.cfg.leaves_per_parent, "leaves per coarse class")->capture_default_str();
  s->add_option("--d-audio", sa.cfg.d_audio, "audio feature dimension")->capture_default_str();
  s->add_option("--d-visual", sa.cfg.d_visual, "visual feature dimension")->capture_default_str();
  s->add_option("--noise-sigma", sa.cfg.noise_sigma, "visual noise standard deviation")->capture_default_str();
  s->add_option("--audio-noise-scale", sa.cfg.audio_noise_scale, "audio noise relative to visual")
      ->capture_default_str();
  s->add_option("--feature-scale", sa.cfg.feature_scale, "global multiplier on emitted features")
      ->capture_default_str();

  CrossvalArgs ca;
  auto* c = app.add_subcommand("crossval", "k-fold train and evaluate");
  c->add_option("--manifest", ca.manifest, "dataset manifest CSV")->required();
  c->add_option("--out", ca.out, "output directory")->required();
  c->add_option("--mode", ca.mode, "foca, concat, euclid-xattn, audio or visual")
      ->check(CLI::IsMember({"foca", "concat", "euclid-xattn", "audio", "visual"}))
      ->capture_default_str();
  c->add_option("--seed", ca.train.seed, "seed for folds, init, shuffling and dropout")->capture_default_str();
  c->add_option("--folds", ca.folds, "number of folds")->check(CLI::Range(2, 100))->capture_default_str();
  c->add_option("--epochs", ca.train.epochs, "maximum epochs")->capture_default_str();
  c->add_option("--lr", ca.train.lr, "Adam learning rate")->capture_default_str();
  c->add_option("--batch-size", ca.train.batch_size, "mini-batch size")->capture_default_str();
  c->add_option("--dropout", ca.train.dropout, "dropout rate")->capture_default_str();
  c->add_option("--patience", ca.train.patience, "early-stopping patience in epochs")->capture_default_str();
  c->add_option("--validation-fraction", ca.train.validation_fraction, "held-out share of training folds")
      ->capture_default_str();
  c->add_option("--init", ca.init, "random or identity")->check(CLI::IsMember({"random", "identity"}))
      ->capture_default_str();
  ca.arch.add(c);

  InitArgs ia;
  auto* i = app.add_subcommand("init", "write an untrained checkpoint");
  i->add_option("--manifest", ia.manifest, "dataset manifest CSV (dimensions and classes)")->required();
  i->add_option("--out", ia.out, "checkpoint path")->required();
  i->add_option("--mode", ia.mode, "foca, concat, euclid-xattn, audio or visual")
      ->check(CLI::IsMember({"foca", "concat", "euclid-xattn", "audio", "visual"}))
      ->capture_default_str();
  i->add_option("--init", ia.init, "random or identity")->check(CLI::IsMember({"random", "identity"}))
      ->capture_default_str();
  i->add_option("--seed", ia.seed, "initialization seed")->capture_default_str();
  ia.arch.add(i);

  InspectArgs xa;
  auto* x = app.add_subcommand("inspect-attention", "dump both attention matrices for one sample");
  x->add_option("--checkpoint", xa.checkpoint, "checkpoint file")->required();
  x->add_option("--manifest", xa.manifest, "dataset manifest CSV")->required();
  x->add_option("--sample", xa.sample, "sample id")->required();
  x->add_option("--out", xa.out, "output CSV")->required();

  EmbedArgs ea;
  auto* e = app.add_subcommand("embed", "dump penultimate-layer activations");
  e->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
  e->add_option("--manifest", ea.manifest, "dataset manifest CSV")->required();
  e->add_option("--out", ea.out, "output CSV")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*t) return cmd_transcode(ta, err);
    if (*s) return cmd_synth(sa);
    if (*c) return cmd_crossval(ca, err);
    if (*i) return cmd_init(ia);
    if (*x) return cmd_inspect_attention(xa);
    if (*e) return cmd_embed(ea);
  } catch (const model::NumericalError& ex) {
    err << "numerical failure: " << ex.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace foca::cli
