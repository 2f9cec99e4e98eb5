// SPDX-License-Identifier: Apache-2.0
//
// cycpaint command line: train, complete, extrapolate, evaluate, make-masks,
// render. Exit status 0 on success, 1 on a runtime failure (one line
// "error[<category>]: <message>" on stderr), 2 on bad flags.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cycpaint/cycpaint.h"

namespace {

struct Failure {
  cycp_status status;
};

void check(cycp_status s) {
  if (s != CYCP_OK) throw Failure{s};
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  cycp_string_free(s);
  return out;
}

using ConfigPtr = std::unique_ptr<cycp_config, decltype(&cycp_config_destroy)>;
using ModelPtr = std::unique_ptr<cycp_model, decltype(&cycp_model_destroy)>;

ModelPtr load_model(const std::string& path) {
  cycp_model* m = nullptr;
  check(cycp_model_load(path.c_str(), &m));
  return ModelPtr(m, &cycp_model_destroy);
}

ConfigPtr model_config(const cycp_model* m) {
  cycp_config* c = nullptr;
  check(cycp_model_config(m, &c));
  return ConfigPtr(c, &cycp_config_destroy);
}

std::string config_value(const cycp_config* c, const char* key) {
  char* v = nullptr;
  check(cycp_config_get(c, key, &v));
  return take(v);
}

double config_double(const cycp_config* c, const char* key) { return std::stod(config_value(c, key)); }
std::uint64_t config_u64(const cycp_config* c, const char* key) { return std::stoull(config_value(c, key)); }

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string out;
  std::string resume;
  bool quiet = false;
};

struct RestoreArgs {
  std::string ckpt;
  std::string image;
  std::string mask;
  std::optional<std::uint64_t> mask_seed;
  std::optional<double> min_fraction;
  std::optional<double> max_fraction;
  std::string out;
  std::string raw_out;
};

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::uint64_t seed = 0;
  std::string split = "test";
  std::optional<double> split_ratio;
  std::optional<std::uint64_t> split_seed;
  std::optional<double> min_fraction;
  std::optional<double> max_fraction;
  std::string report;
};

struct MaskArgs {
  int resolution = 64;
  std::optional<int> height;
  std::optional<int> width;
  double min_fraction = 0.25;
  double max_fraction = 0.35;
  std::uint64_t seed = 0;
  int count = 1;
  std::string out;
};

struct RenderArgs {
  std::string ckpt;
  std::string data;
  std::string direction = "inpaint";
  std::string split = "test";
  int rows = 4;
  std::uint64_t seed = 0;
  int gutter = 2;
  std::string out;
};

void step_printer(long step, const char* json, void* user) {
  const long every = *static_cast<long*>(user);
  if (every > 0 && (step - 1) % every == 0) std::printf("%s\n", json);
  std::fflush(stdout);
}

int run_train(const TrainArgs& a) {
  cycp_config* raw = nullptr;
  check(a.config.empty() ? cycp_config_create(&raw) : cycp_config_load_file(a.config.c_str(), &raw));
  ConfigPtr cfg(raw, &cycp_config_destroy);
  for (const auto& o : a.overrides) check(cycp_config_apply_override(cfg.get(), o.c_str()));
  if (!a.data.empty()) check(cycp_config_set(cfg.get(), "data", a.data.c_str()));
  if (!a.out.empty()) check(cycp_config_set(cfg.get(), "out_dir", a.out.c_str()));
  check(cycp_config_validate(cfg.get()));

  char* text = nullptr;
  check(cycp_config_to_text(cfg.get(), &text));
  std::printf("# effective config\n%s", take(text).c_str());
  std::fflush(stdout);

  long every = a.quiet ? 0 : std::stol(config_value(cfg.get(), "log_every"));
  char* final_ckpt = nullptr;
  check(cycp_train(cfg.get(), nullptr, a.resume.empty() ? nullptr : a.resume.c_str(), &step_printer, &every,
                   &final_ckpt));
  std::printf("final checkpoint: %s\n", take(final_ckpt).c_str());
  return 0;
}

int run_restore(const RestoreArgs& a, cycp_direction direction) {
  ModelPtr model = load_model(a.ckpt);
  ConfigPtr cfg = model_config(model.get());
  cycp_mask_source src{};
  src.mask_path = a.mask.empty() ? nullptr : a.mask.c_str();
  src.min_fraction = a.min_fraction.value_or(config_double(cfg.get(), "min_fraction"));
  src.max_fraction = a.max_fraction.value_or(config_double(cfg.get(), "max_fraction"));
  src.seed = a.mask_seed.value_or(0);
  if (src.mask_path) {
    std::printf("mask: %s\n", src.mask_path);
  } else {
    std::printf("mask: sampled seed=%llu min_fraction=%g max_fraction=%g\n",
                static_cast<unsigned long long>(src.seed), src.min_fraction, src.max_fraction);
  }
  check(cycp_restore_file(model.get(), direction, a.image.c_str(), &src, a.out.c_str(),
                          a.raw_out.empty() ? nullptr : a.raw_out.c_str()));
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

struct SplitChoice {
  double ratio;
  std::uint64_t seed;
};

SplitChoice split_choice(const cycp_config* cfg, const std::string& split, std::optional<double> ratio,
                         std::optional<std::uint64_t> seed) {
  if (split == "all") return {0.0, 0};
  return {ratio.value_or(config_double(cfg, "split_ratio")), seed.value_or(config_u64(cfg, "seed"))};
}

int run_evaluate(const EvalArgs& a) {
  ModelPtr model = load_model(a.ckpt);
  ConfigPtr cfg = model_config(model.get());
  const SplitChoice sp = split_choice(cfg.get(), a.split, a.split_ratio, a.split_seed);
  const double lo = a.min_fraction.value_or(config_double(cfg.get(), "min_fraction"));
  const double hi = a.max_fraction.value_or(config_double(cfg.get(), "max_fraction"));
  std::printf("evaluate data=%s split=%s split_ratio=%g split_seed=%llu seed=%llu fractions=[%g, %g]\n",
              a.data.c_str(), a.split.c_str(), sp.ratio, static_cast<unsigned long long>(sp.seed),
              static_cast<unsigned long long>(a.seed), lo, hi);
  double mean = 0.0;
  check(cycp_evaluate(model.get(), a.data.c_str(), sp.ratio, sp.seed, lo, hi, a.seed,
                      a.report.empty() ? nullptr : a.report.c_str(), &mean));
  std::printf("mean_psnr %.4f\n", mean);
  return 0;
}

int run_make_masks(const MaskArgs& a) {
  const int h = a.height.value_or(a.resolution), w = a.width.value_or(a.resolution);
  check(cycp_make_masks(h, w, a.min_fraction, a.max_fraction, a.seed, a.count, a.out.c_str()));
  std::printf("wrote %d masks (%dx%d, seed %llu) to %s\n", a.count, h, w, static_cast<unsigned long long>(a.seed),
              a.out.c_str());
  return 0;
}

int run_render(const RenderArgs& a) {
  ModelPtr model = load_model(a.ckpt);
  ConfigPtr cfg = model_config(model.get());
  const SplitChoice sp = split_choice(cfg.get(), a.split, std::nullopt, std::nullopt);
  const cycp_direction d = a.direction == "inpaint" ? CYCP_INPAINT : CYCP_OUTPAINT;
  check(cycp_render(model.get(), d, a.data.c_str(), sp.ratio, sp.seed, a.rows, a.seed, a.gutter, a.out.c_str()));
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

void add_restore_flags(CLI::App* cmd, RestoreArgs& a) {
  cmd->add_option("--ckpt", a.ckpt, "Checkpoint file")->required();
  cmd->add_option("--image", a.image, "Input image")->required();
  auto* mask = cmd->add_option("--mask", a.mask, "Mask PNG (white = hole), at the model resolution");
  auto* seed = cmd->add_option("--mask-seed", a.mask_seed, "Sample a square mask with this seed");
  mask->excludes(seed);
  cmd->add_option("--min-fraction", a.min_fraction, "Smallest sampled hole fraction")->excludes(mask);
  cmd->add_option("--max-fraction", a.max_fraction, "Largest sampled hole fraction")->excludes(mask);
  cmd->add_option("--out", a.out, "Restored output PNG")->required();
  cmd->add_option("--raw-out", a.raw_out, "Raw network output PNG");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cycle-consistent image completion and extrapolation", "cycpaint"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cycp_version());

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train C, E and D jointly");
  train->add_option("--config", ta.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
  train->add_option("--override", ta.overrides, "key=value, repeatable")->allow_extra_args(false);
  train->add_option("--data", ta.data, "Image folder or synth:<kind>:<n>[:<seed>]");
  train->add_option("--out", ta.out, "Output directory");
  train->add_option("--resume", ta.resume, "Checkpoint to continue from");
  train->add_flag("--quiet", ta.quiet, "Do not print loss records");

  RestoreArgs ca, ea;
  auto* complete = app.add_subcommand("complete", "Fill the hole of an image with C");
  add_restore_flags(complete, ca);
  auto* extrapolate = app.add_subcommand("extrapolate", "Fill the surroundings of a patch with E");
  add_restore_flags(extrapolate, ea);

  EvalArgs va;
  auto* evaluate = app.add_subcommand("evaluate", "PSNR of restored outputs in both directions");
  evaluate->add_option("--ckpt", va.ckpt, "Checkpoint file")->required();
  evaluate->add_option("--data", va.data, "Image folder or synth:<kind>:<n>[:<seed>]")->required();
  evaluate->add_option("--seed", va.seed, "Mask seed");
  evaluate->add_option("--split", va.split, "test or all")->check(CLI::IsMember({"test", "all"}));
  evaluate->add_option("--split-ratio", va.split_ratio, "Training share (default: from checkpoint)");
  evaluate->add_option("--split-seed", va.split_seed, "Split seed (default: training seed)");
  evaluate->add_option("--min-fraction", va.min_fraction, "Smallest hole fraction");
  evaluate->add_option("--max-fraction", va.max_fraction, "Largest hole fraction");
  evaluate->add_option("--report", va.report, "JSONL report path");

  MaskArgs ma;
  auto* masks = app.add_subcommand("make-masks", "Write sampled square masks as PNG + JSON");
  masks->add_option("--resolution", ma.resolution, "Square mask size");
  masks->add_option("--height", ma.height, "Mask height");
  masks->add_option("--width", ma.width, "Mask width");
  masks->add_option("--min-fraction", ma.min_fraction, "Smallest hole fraction");
  masks->add_option("--max-fraction", ma.max_fraction, "Largest hole fraction");
  masks->add_option("--seed", ma.seed, "Mask seed");
  masks->add_option("--count", ma.count, "Number of masks");
  masks->add_option("--out", ma.out, "Output directory")->required();

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Result grid: masked input, raw, restored, ground truth");
  render->add_option("--ckpt", ra.ckpt, "Checkpoint file")->required();
  render->add_option("--data", ra.data, "Image folder or synth:<kind>:<n>[:<seed>]")->required();
  render->add_option("--direction", ra.direction, "inpaint or outpaint")
      ->check(CLI::IsMember({"inpaint", "outpaint"}));
  render->add_option("--split", ra.split, "test or all")->check(CLI::IsMember({"test", "all"}));
  render->add_option("--rows", ra.rows, "Number of rows");
  render->add_option("--seed", ra.seed, "Mask seed");
  render->add_option("--gutter", ra.gutter, "Pixels between tiles");
  render->add_option("--out", ra.out, "Output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[usage]: " << one_line(e.what()) << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return run_train(ta);
    if (*complete) return run_restore(ca, CYCP_INPAINT);
    if (*extrapolate) return run_restore(ea, CYCP_OUTPAINT);
    if (*evaluate) return run_evaluate(va);
    if (*masks) return run_make_masks(ma);
    if (*render) return run_render(ra);
  } catch (const Failure& f) {
    std::cerr << "error[" << cycp_status_category(f.status) << "]: " << one_line(cycp_last_error()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 2;
}
