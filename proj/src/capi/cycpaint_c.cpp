// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/cycpaint.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "cycpaint/checkpoint.hpp"
#include "cycpaint/evaluation.hpp"
#include "cycpaint/image_io.hpp"
#include "cycpaint/training.hpp"
#include "json.hpp"

struct cycp_config {
  cycpaint::TrainingConfig cfg;
};

struct cycp_model {
  cycpaint::TrainingConfig cfg;
  cycpaint::ModelBundle<float> bundle;
};

namespace {

using namespace cycpaint;

thread_local std::string g_last_error;

cycp_status to_status(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return CYCP_ERR_USAGE;
    case ErrorCategory::config: return CYCP_ERR_CONFIG;
    case ErrorCategory::shape_mismatch: return CYCP_ERR_SHAPE_MISMATCH;
    case ErrorCategory::geometry: return CYCP_ERR_GEOMETRY;
    case ErrorCategory::io: return CYCP_ERR_IO;
    case ErrorCategory::checkpoint: return CYCP_ERR_CHECKPOINT;
    case ErrorCategory::non_finite: return CYCP_ERR_NON_FINITE;
    case ErrorCategory::empty_input: return CYCP_ERR_EMPTY_INPUT;
    case ErrorCategory::internal: return CYCP_ERR_INTERNAL;
  }
  return CYCP_ERR_INTERNAL;
}

template <class Fn>
cycp_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return CYCP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.category());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown exception";
  }
  return CYCP_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorCategory::usage, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

MaskSpec mask_spec(double lo, double hi, std::uint64_t seed) {
  MaskSpec spec;
  spec.min_fraction = lo;
  spec.max_fraction = hi;
  spec.seed = seed;
  spec.validate();
  return spec;
}

// Mask `index` of a seeded sequence; shared by make-masks and sampled restores.
Mask indexed_mask(const MaskSpec& spec, int h, int w, int index) {
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(index)}));
  return sample_mask(spec, h, w, rng);
}

Dataset test_split(const std::string& data, int resolution, double ratio, std::uint64_t seed) {
  Dataset all = open_dataset(data, resolution);
  if (ratio <= 0.0) return all;
  return all.split_by(ratio, seed).second;
}

Restoration restore(const ModelBundle<float>& b, cycp_direction d, const Tensor<float>& x, const BinaryMap& M) {
  return d == CYCP_INPAINT ? run_inpaint(b, x, M) : run_outpaint(b, x, M);
}

void check_direction(cycp_direction d) {
  if (d != CYCP_INPAINT && d != CYCP_OUTPAINT) fail(ErrorCategory::usage, "unknown direction");
}

}  // namespace

extern "C" {

const char* cycp_last_error(void) { return g_last_error.c_str(); }

const char* cycp_status_category(cycp_status status) {
  switch (status) {
    case CYCP_OK: return "ok";
    case CYCP_ERR_USAGE: return "usage";
    case CYCP_ERR_CONFIG: return "config";
    case CYCP_ERR_SHAPE_MISMATCH: return "shape-mismatch";
    case CYCP_ERR_GEOMETRY: return "geometry";
    case CYCP_ERR_IO: return "io";
    case CYCP_ERR_CHECKPOINT: return "checkpoint";
    case CYCP_ERR_NON_FINITE: return "non-finite";
    case CYCP_ERR_EMPTY_INPUT: return "empty-input";
    case CYCP_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

const char* cycp_version(void) { return "0.1.0"; }

void cycp_string_free(char* s) { std::free(s); }

cycp_status cycp_config_create(cycp_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new cycp_config{};
  });
}

cycp_status cycp_config_load_file(const char* path, cycp_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new cycp_config{TrainingConfig::from_file(path)};
  });
}

void cycp_config_destroy(cycp_config* cfg) { delete cfg; }

cycp_status cycp_config_set(cycp_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

cycp_status cycp_config_apply_override(cycp_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "config");
    require(assignment, "assignment");
    cfg->cfg.apply_override(assignment);
  });
}

cycp_status cycp_config_get(const cycp_config* cfg, const char* key, char** value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    *value = dup_string(cfg->cfg.get(key));
  });
}

cycp_status cycp_config_to_text(const cycp_config* cfg, char** text) {
  return guarded([&] {
    require(cfg, "config");
    require(text, "text");
    *text = dup_string(cfg->cfg.to_text());
  });
}

cycp_status cycp_config_validate(const cycp_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.validate();
  });
}

cycp_status cycp_train(const cycp_config* cfg, const char* out_dir, const char* resume_from,
                       cycp_step_callback callback, void* user, char** final_checkpoint) {
  return guarded([&] {
    require(cfg, "config");
    TrainingConfig c = cfg->cfg;
    if (out_dir) c.out_dir = out_dir;
    c.validate();
    const Dataset train_set = training_splits(c).first;
    TrainOptions opt;
    if (resume_from) opt.resume_from = resume_from;
    if (callback) {
      opt.on_step = [&](long step, const LossReport& r) { callback(step, r.to_log_line(step).c_str(), user); };
    }
    const std::string path = train(c, train_set, c.out_dir, opt);
    if (final_checkpoint) *final_checkpoint = dup_string(path);
  });
}

cycp_status cycp_model_load(const char* checkpoint_path, cycp_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint path");
    require(out, "out");
    TrainingState s = load_checkpoint(checkpoint_path);
    *out = new cycp_model{std::move(s.config), std::move(s.bundle)};
  });
}

void cycp_model_destroy(cycp_model* model) { delete model; }

int cycp_model_resolution(const cycp_model* model) { return model ? model->cfg.resolution : 0; }

cycp_status cycp_model_config(const cycp_model* model, cycp_config** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = new cycp_config{model->cfg};
  });
}

cycp_status cycp_restore_file(const cycp_model* model, cycp_direction direction, const char* image_path,
                              const cycp_mask_source* mask, const char* restored_out, const char* raw_out) {
  return guarded([&] {
    require(model, "model");
    require(image_path, "image path");
    require(mask, "mask source");
    require(restored_out, "output path");
    check_direction(direction);
    const int res = model->cfg.resolution;
    const Tensor<float> x = read_image(image_path, res);
    BinaryMap M;
    if (mask->mask_path) {
      M = read_mask_png(mask->mask_path);
      if (M.height != res || M.width != res) {
        fail(ErrorCategory::shape_mismatch, "mask " + std::string(mask->mask_path) + " is " +
                                                std::to_string(M.height) + "x" + std::to_string(M.width) +
                                                " but the model works at " + std::to_string(res) + "x" +
                                                std::to_string(res));
      }
    } else {
      M = indexed_mask(mask_spec(mask->min_fraction, mask->max_fraction, mask->seed), res, res, 0).grid;
    }
    const Restoration r = restore(model->bundle, direction, x, M);
    write_image(restored_out, r.restored);
    if (raw_out) write_image(raw_out, r.raw);
  });
}

cycp_status cycp_evaluate(const cycp_model* model, const char* data, double split_ratio, uint64_t split_seed,
                          double min_fraction, double max_fraction, uint64_t seed, const char* report_path,
                          double* mean_psnr) {
  return guarded([&] {
    require(model, "model");
    require(data, "data");
    const Dataset test = test_split(data, model->cfg.resolution, split_ratio, split_seed);
    const MetricsReport report = evaluate(model->bundle, test, mask_spec(min_fraction, max_fraction, seed), seed);
    if (report_path) report.write(report_path);
    if (mean_psnr) *mean_psnr = report.mean_psnr;
  });
}

cycp_status cycp_render(const cycp_model* model, cycp_direction direction, const char* data, double split_ratio,
                        uint64_t split_seed, int rows, uint64_t seed, int gutter, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(data, "data");
    require(path, "path");
    check_direction(direction);
    if (rows < 1) fail(ErrorCategory::usage, "rows must be >= 1");
    const Dataset test = test_split(data, model->cfg.resolution, split_ratio, split_seed);
    const MaskSpec spec = model->cfg.mask_spec;
    std::vector<GridRow> grid;
    for (int i = 0; i < std::min(rows, test.count()); ++i) {
      const Tensor<float>& x = test.image(i);
      const Mask M = evaluation_mask(spec, test.resolution(), seed, test.source_id(i));
      Restoration r = restore(model->bundle, direction, x, M.grid);
      grid.push_back({std::move(r.input), std::move(r.raw), std::move(r.restored), x});
    }
    render_grid(grid, path, gutter);
  });
}

cycp_status cycp_make_masks(int height, int width, double min_fraction, double max_fraction, uint64_t seed,
                            int count, const char* out_dir) {
  return guarded([&] {
    require(out_dir, "output directory");
    if (count < 1) fail(ErrorCategory::usage, "count must be >= 1");
    const MaskSpec spec = mask_spec(min_fraction, max_fraction, seed);
    feasible_sides(spec, height, width);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCategory::io, "cannot create " + std::string(out_dir) + ": " + ec.message());
    for (int i = 0; i < count; ++i) {
      const Mask m = indexed_mask(spec, height, width, i);
      char stem[32];
      std::snprintf(stem, sizeof stem, "mask_%05d", i);
      const std::filesystem::path base = std::filesystem::path(out_dir) / stem;
      write_mask_png(base.string() + ".png", m.grid);
      nlohmann::ordered_json j;
      j["index"] = i;
      j["seed"] = seed;
      j["height"] = height;
      j["width"] = width;
      j["top"] = m.region.top;
      j["left"] = m.region.left;
      j["side"] = m.region.side;
      std::ofstream f(base.string() + ".json", std::ios::trunc);
      f << j.dump() << "\n";
      if (!f) fail(ErrorCategory::io, "cannot write " + base.string() + ".json");
    }
  });
}

cycp_status cycp_sample_mask(int height, int width, double min_fraction, double max_fraction, uint64_t seed,
                             uint8_t* cells, int* top, int* left, int* side) {
  return guarded([&] {
    require(cells, "cells");
    const Mask m = indexed_mask(mask_spec(min_fraction, max_fraction, seed), height, width, 0);
    std::memcpy(cells, m.grid.cells.data(), m.grid.cells.size());
    if (top) *top = m.region.top;
    if (left) *left = m.region.left;
    if (side) *side = m.region.side;
  });
}

cycp_status cycp_psnr_files(const char* a, const char* b, double* out) {
  return guarded([&] {
    require(a, "first image");
    require(b, "second image");
    require(out, "out");
    *out = psnr(read_image_native(a), read_image_native(b));
  });
}

}  // extern "C"
