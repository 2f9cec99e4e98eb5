// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/evaluation.hpp"

#include <cmath>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cycpaint/image_io.hpp"
#include "json.hpp"

namespace cycpaint {

namespace {

constexpr std::uint64_t kEvalMaskStream = 0xE7A1;

void check_generator_output(const Tensor<float>& out, const Tensor<float>& x, const char* who) {
  if (out.shape() != x.shape()) {
    fail(ErrorCategory::shape_mismatch, std::string(who) + " produced " + out.shape().str() + " for input image " +
                                            x.shape().str());
  }
}

void check_image_mask(const Tensor<float>& x, const BinaryMap& M) {
  const Shape s = x.shape();
  if (s.c != 3) fail(ErrorCategory::shape_mismatch, "expected a 3-channel image, got " + s.str());
  if (s.h != M.height || s.w != M.width) {
    fail(ErrorCategory::shape_mismatch, "mask is " + std::to_string(M.height) + "x" + std::to_string(M.width) +
                                            " but the image is " + std::to_string(s.h) + "x" + std::to_string(s.w));
  }
}

double mean_of(const std::vector<PsnrEntry>& entries, const Direction* only) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : entries) {
    if (only && e.direction != *only) continue;
    sum += e.psnr;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

GeneratorFn as_generator(const Network<float>& net) {
  return [&net](const Tensor<float>& in) { return net.forward(in); };
}

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  const std::size_t n = a.numel();
  if (n == 0) fail(ErrorCategory::empty_input, "psnr of empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])) * 0.5;
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

Restoration run_inpaint(const GeneratorFn& C, const Tensor<float>& x, const BinaryMap& M) {
  check_image_mask(x, M);
  Restoration r;
  r.input = inside_masked(x, M);
  r.raw = C(concat_mask_channel(r.input, M));
  check_generator_output(r.raw, x, "completion network");
  r.restored = restore_known(r.raw, x, complement(M));
  return r;
}

Restoration run_inpaint(const ModelBundle<float>& bundle, const Tensor<float>& x, const BinaryMap& M) {
  return run_inpaint(as_generator(bundle.completion), x, M);
}

Restoration run_outpaint(const GeneratorFn& E, const Tensor<float>& x, const BinaryMap& M) {
  check_image_mask(x, M);
  Restoration r;
  r.input = outside_masked(x, M);
  r.raw = E(concat_mask_channel(r.input, complement(M)));
  check_generator_output(r.raw, x, "extrapolation network");
  r.restored = restore_known(r.raw, x, M);
  return r;
}

Restoration run_outpaint(const ModelBundle<float>& bundle, const Tensor<float>& x, const BinaryMap& M) {
  return run_outpaint(as_generator(bundle.extrapolation), x, M);
}

std::string direction_name(Direction d) { return d == Direction::inpaint ? "inpaint" : "outpaint"; }

std::string MetricsReport::to_jsonl() const {
  std::string out;
  for (const auto& e : per_image) {
    nlohmann::ordered_json j;
    j["source_id"] = e.source_id;
    j["direction"] = direction_name(e.direction);
    j["psnr"] = e.psnr;
    out += j.dump() + "\n";
  }
  nlohmann::ordered_json s;
  s["summary"] = true;
  s["entries"] = per_image.size();
  s["mean_psnr"] = mean_psnr;
  s["mean_inpaint"] = mean_inpaint;
  s["mean_outpaint"] = mean_outpaint;
  s["mask_seed"] = mask_seed;
  out += s.dump() + "\n";
  return out;
}

void MetricsReport::write(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorCategory::io, "cannot write report " + path);
  f << to_jsonl();
  f.flush();
  if (!f) fail(ErrorCategory::io, "short write to report " + path);
}

Mask evaluation_mask(const MaskSpec& spec, int resolution, std::uint64_t seed, const std::string& source_id) {
  Rng rng(derive_seed(seed, {kEvalMaskStream, hash_string(source_id)}));
  return sample_mask(spec, resolution, resolution, rng);
}

MetricsReport evaluate(const GeneratorFn& C, const GeneratorFn& E, const Dataset& testset, const MaskSpec& spec,
                       std::uint64_t seed) {
  if (testset.count() == 0) fail(ErrorCategory::empty_input, "test set is empty");
  MetricsReport report;
  report.mask_seed = seed;
  for (int i = 0; i < testset.count(); ++i) {
    const Tensor<float>& x = testset.image(i);
    const std::string& id = testset.source_id(i);
    const Mask M = evaluation_mask(spec, testset.resolution(), seed, id);
    report.per_image.push_back({id, Direction::inpaint, psnr(run_inpaint(C, x, M.grid).restored, x)});
    report.per_image.push_back({id, Direction::outpaint, psnr(run_outpaint(E, x, M.grid).restored, x)});
  }
  const Direction in = Direction::inpaint, out = Direction::outpaint;
  report.mean_psnr = mean_of(report.per_image, nullptr);
  report.mean_inpaint = mean_of(report.per_image, &in);
  report.mean_outpaint = mean_of(report.per_image, &out);
  return report;
}

MetricsReport evaluate(const ModelBundle<float>& bundle, const Dataset& testset, const MaskSpec& spec,
                       std::uint64_t seed) {
  return evaluate(as_generator(bundle.completion), as_generator(bundle.extrapolation), testset, spec, seed);
}

void render_grid(const std::vector<GridRow>& rows, const std::string& path, int gutter) {
  if (rows.empty()) fail(ErrorCategory::empty_input, "render_grid needs at least one row");
  if (gutter < 0) fail(ErrorCategory::usage, "gutter must be >= 0");
  const Shape ref = rows.front().truth.shape();
  if (ref.n != 1 || ref.c != 3) fail(ErrorCategory::shape_mismatch, "grid tiles must be 1x3xHxW, got " + ref.str());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const Tensor<float>* t : {&rows[r].masked, &rows[r].raw, &rows[r].restored, &rows[r].truth}) {
      if (t->shape() != ref) {
        fail(ErrorCategory::shape_mismatch, "row " + std::to_string(r) + " has a " + t->shape().str() +
                                                " tile; expected " + ref.str());
      }
    }
  }
  const int rows_n = static_cast<int>(rows.size());
  const int height = rows_n * ref.h + (rows_n - 1) * gutter;
  const int width = 4 * ref.w + 3 * gutter;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  for (int r = 0; r < rows_n; ++r) {
    const Tensor<float>* tiles[4] = {&rows[r].masked, &rows[r].raw, &rows[r].restored, &rows[r].truth};
    for (int col = 0; col < 4; ++col) {
      const int y0 = r * (ref.h + gutter), x0 = col * (ref.w + gutter);
      for (int y = 0; y < ref.h; ++y) {
        auto* row = img.ptr<cv::Vec3b>(y0 + y);
        for (int x = 0; x < ref.w; ++x) {
          // OpenCV stores BGR.
          for (int ch = 0; ch < 3; ++ch) row[x0 + x][2 - ch] = quantize_unit(tiles[col]->at(0, ch, y, x));
        }
      }
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path, img);
  } catch (const cv::Exception& e) {
    fail(ErrorCategory::io, "cannot write grid " + path + ": " + e.what());
  }
  if (!ok) fail(ErrorCategory::io, "cannot write grid " + path);
}

}  // namespace cycpaint
