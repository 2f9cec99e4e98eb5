// SPDX-License-Identifier: Apache-2.0

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "cycpaint/data.hpp"
#include "cycpaint/error.hpp"
#include "cycpaint/image_io.hpp"
#include "cycpaint/log.hpp"
#include "doctest.h"
#include "support/helpers.hpp"

using namespace cycpaint;
namespace fs = std::filesystem;

namespace {

// Writes an 8-bit image given in RGB order.
void write_rgb(const fs::path& path, int h, int w, const std::function<cv::Vec3b(int, int)>& rgb) {
  cv::Mat m(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const cv::Vec3b c = rgb(y, x);
      m.at<cv::Vec3b>(y, x) = cv::Vec3b(c[2], c[1], c[0]);
    }
  REQUIRE(cv::imwrite(path.string(), m));
}

fs::path folder_of_ten(const std::string& name) {
  const auto dir = testutil::scratch_dir(name);
  for (int i = 0; i < 10; ++i) {
    write_rgb(dir / ("img" + std::to_string(i) + ".png"), 12, 12, [i](int y, int x) {
      return cv::Vec3b(static_cast<uchar>(10 * i), static_cast<uchar>(y * 20), static_cast<uchar>(x * 20));
    });
  }
  return dir;
}

std::vector<std::string> ids_of(const Dataset& d) {
  std::vector<std::string> out;
  for (int i = 0; i < d.count(); ++i) out.push_back(d.source_id(i));
  return out;
}

struct WarningCapture {
  std::vector<std::string> messages;
  LogSink previous;
  WarningCapture() {
    previous = set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_sink(previous); }
};

void check_batch_invariants(const ImageBatch& b, int resolution) {
  CHECK(b.data.shape().c == 3);
  CHECK(b.data.shape().h == resolution);
  CHECK(b.data.shape().w == resolution);
  CHECK(static_cast<int>(b.source_ids.size()) == b.size());
  for (float v : b.data.values()) {
    REQUIRE(std::isfinite(v));
    REQUIRE(v >= -1.0f);
    REQUIRE(v <= 1.0f);
  }
}

}  // namespace

TEST_CASE("folder split sizes, disjointness and determinism") {
  const auto dir = folder_of_ten("split");
  const auto [train, test] = load_folder(dir.string(), 8, 0.8, 3);
  CHECK(train.count() == 8);
  CHECK(test.count() == 2);
  CHECK(train.split() == Split::train);
  CHECK(test.split() == Split::test);

  std::set<std::string> all;
  for (const auto& id : ids_of(train)) all.insert(id);
  for (const auto& id : ids_of(test)) CHECK(all.insert(id).second);
  CHECK(all.size() == 10);

  const auto [train2, test2] = load_folder(dir.string(), 8, 0.8, 3);
  CHECK(ids_of(train2) == ids_of(train));
  CHECK(ids_of(test2) == ids_of(test));

  bool any_differs = false;
  for (std::uint64_t seed = 4; seed < 12; ++seed) {
    any_differs |= ids_of(load_folder(dir.string(), 8, 0.8, seed).second) != ids_of(test);
  }
  CHECK(any_differs);
}

TEST_CASE("split covers and separates under many seeds and ratios") {
  const Dataset d = synth_toy_dataset(ToyKind::blobs, 13, 8, 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (double ratio : {0.01, 0.3, 0.5, 0.8, 0.99}) {
      const auto [a, b] = d.split_by(ratio, seed);
      CHECK(a.count() >= 1);
      CHECK(b.count() >= 1);
      CHECK(a.count() + b.count() == 13);
      std::set<std::string> ids;
      for (const auto& id : ids_of(a)) ids.insert(id);
      for (const auto& id : ids_of(b)) ids.insert(id);
      CHECK(ids.size() == 13);
    }
  }
  CHECK_THROWS_AS(d.split_by(1.0, 0), Error);
  CHECK_THROWS_AS(d.split_by(0.0, 0), Error);
}

TEST_CASE("pixel mapping from 8-bit to [-1, 1]") {
  CHECK(normalize_u8(255) == 1.0f);
  CHECK(normalize_u8(0) == -1.0f);
  CHECK(normalize_u8(128) == doctest::Approx(128.0 * 2.0 / 255.0 - 1.0).epsilon(1e-7));
  CHECK(normalize_u8(128) == doctest::Approx(0.00392).epsilon(1e-2));

  const auto dir = testutil::scratch_dir("mapping");
  write_rgb(dir / "a.png", 4, 4, [](int y, int) {
    const uchar v = y == 0 ? 255 : y == 1 ? 0 : 128;
    return cv::Vec3b(v, v, v);
  });
  write_rgb(dir / "red.png", 4, 4, [](int, int) { return cv::Vec3b(255, 0, 0); });
  const Tensor<float> t = read_image((dir / "a.png").string(), 4);
  for (int c = 0; c < 3; ++c) {
    CHECK(t.at(0, c, 0, 2) == 1.0f);
    CHECK(t.at(0, c, 1, 2) == -1.0f);
    CHECK(t.at(0, c, 2, 2) == normalize_u8(128));
  }
  const Tensor<float> red = read_image((dir / "red.png").string(), 4);
  CHECK(red.at(0, 0, 1, 1) == 1.0f);
  CHECK(red.at(0, 1, 1, 1) == -1.0f);
  CHECK(red.at(0, 2, 1, 1) == -1.0f);
}

TEST_CASE("8-bit round trip is exact") {
  for (int v = 0; v < 256; ++v) CHECK(quantize_unit(normalize_u8(static_cast<std::uint8_t>(v))) == v);

  const auto dir = testutil::scratch_dir("roundtrip");
  Rng rng(9);
  std::vector<cv::Vec3b> pixels;
  write_rgb(dir / "r.png", 16, 16, [&](int, int) {
    cv::Vec3b c;
    for (int k = 0; k < 3; ++k) c[k] = static_cast<uchar>(rng.uniform_int(0, 255));
    pixels.push_back(c);
    return c;
  });
  const Tensor<float> t = read_image((dir / "r.png").string(), 16);
  write_image((dir / "back.png").string(), t);
  const cv::Mat back = cv::imread((dir / "back.png").string(), cv::IMREAD_COLOR);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const cv::Vec3b& rgb = pixels[static_cast<std::size_t>(y * 16 + x)];
      for (int k = 0; k < 3; ++k) {
        REQUIRE(quantize_unit(t.at(0, k, y, x)) == rgb[k]);
        REQUIRE(back.at<cv::Vec3b>(y, x)[2 - k] == rgb[k]);
      }
    }
}

TEST_CASE("non-square images are center-cropped") {
  const auto dir = testutil::scratch_dir("crop");
  write_rgb(dir / "wide.png", 10, 30, [](int, int x) {
    const uchar v = (x >= 10 && x < 20) ? 200 : 0;
    return cv::Vec3b(v, v, v);
  });
  write_rgb(dir / "tall.png", 30, 10, [](int y, int) {
    const uchar v = (y >= 10 && y < 20) ? 60 : 255;
    return cv::Vec3b(v, v, v);
  });
  const Tensor<float> wide = read_image((dir / "wide.png").string(), 10);
  for (float v : wide.values()) REQUIRE(v == normalize_u8(200));
  const Tensor<float> tall = read_image((dir / "tall.png").string(), 5);
  CHECK(tall.shape() == Shape{1, 3, 5, 5});
  for (float v : tall.values()) REQUIRE(v == doctest::Approx(normalize_u8(60)).epsilon(1e-6));
}

TEST_CASE("unreadable files are skipped with a warning") {
  const auto dir = folder_of_ten("skip");
  std::ofstream(dir / "broken.png") << "not an image";
  std::ofstream(dir / "notes.txt") << "ignored";
  WarningCapture warnings;
  const Dataset all = load_folder_all(dir.string(), 8);
  CHECK(all.count() == 10);
  REQUIRE(warnings.messages.size() == 1);
  CHECK(warnings.messages[0].find("broken.png") != std::string::npos);
}

TEST_CASE("folders without usable images are fatal") {
  WarningCapture warnings;
  const auto empty = testutil::scratch_dir("empty");
  std::ofstream(empty / "broken.jpg") << "garbage";
  try {
    load_folder_all(empty.string(), 8);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::empty_input);
  }
  try {
    load_folder_all((empty / "missing").string(), 8);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::io);
  }
  const auto one = testutil::scratch_dir("one");
  write_rgb(one / "a.png", 4, 4, [](int, int) { return cv::Vec3b(1, 2, 3); });
  CHECK_THROWS_AS(load_folder(one.string(), 4, 0.5, 0), Error);
}

TEST_CASE("toy datasets are deterministic and in range") {
  for (const ToyKind kind : {ToyKind::gradients, ToyKind::checkers, ToyKind::blobs}) {
    CAPTURE(toy_kind_name(kind));
    const Dataset a = synth_toy_dataset(kind, 6, 16, 42);
    const Dataset b = synth_toy_dataset(kind, 6, 16, 42);
    const Dataset c = synth_toy_dataset(kind, 6, 16, 43);
    CHECK(a.count() == 6);
    bool differs = false;
    for (int i = 0; i < 6; ++i) {
      CHECK(a.image(i) == b.image(i));
      differs |= !(a.image(i) == c.image(i));
      CHECK(a.image(i).shape() == Shape{1, 3, 16, 16});
      for (float v : a.image(i).values()) {
        REQUIRE(v >= -1.0f);
        REQUIRE(v <= 1.0f);
      }
    }
    CHECK(differs);
    CHECK(parse_toy_kind(toy_kind_name(kind)) == kind);
  }
}

TEST_CASE("checkerboards use exactly two colors and vary between images") {
  const Dataset d = synth_toy_dataset(ToyKind::checkers, 64, 32, 5);
  CHECK(d.count() == 64);
  std::set<std::vector<float>> first_pixels;
  for (int i = 0; i < d.count(); ++i) {
    std::set<std::vector<float>> colors;
    const Tensor<float>& t = d.image(i);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) colors.insert({t.at(0, 0, y, x), t.at(0, 1, y, x), t.at(0, 2, y, x)});
    CHECK(colors.size() == 2);
    first_pixels.insert({t.at(0, 0, 0, 0), t.at(0, 1, 0, 0), t.at(0, 2, 0, 0)});
  }
  CHECK(first_pixels.size() > 10);
}

TEST_CASE("dataset specs") {
  const Dataset d = open_dataset("synth:checkers:5:9", 8);
  CHECK(d.count() == 5);
  CHECK(d.image(2) == synth_toy_dataset(ToyKind::checkers, 5, 8, 9).image(2));
  CHECK(open_dataset("synth:gradients:3", 8).image(0) == synth_toy_dataset(ToyKind::gradients, 3, 8, 0).image(0));
  for (const char* bad : {"synth:stripes:4", "synth:checkers", "synth:checkers:x", "synth:checkers:1"}) {
    CAPTURE(bad);
    try {
      open_dataset(bad, 8);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::config);
    }
  }
}

TEST_CASE("batches cover an epoch exactly once") {
  const Dataset d = synth_toy_dataset(ToyKind::blobs, 10, 8, 2);
  BatchIterator it = batches(d, 4, 11);
  CHECK(it.batches_per_epoch() == 3);
  std::vector<int> sizes;
  std::multiset<std::string> seen;
  ImageBatch b;
  while (it.next(b)) {
    check_batch_invariants(b, 8);
    sizes.push_back(b.size());
    for (const auto& id : b.source_ids) seen.insert(id);
  }
  CHECK(sizes == std::vector<int>{4, 4, 2});
  const auto all = ids_of(d);
  CHECK(seen == std::multiset<std::string>(all.begin(), all.end()));
}

TEST_CASE("shuffle seeds change the order but not the multiset") {
  const Dataset d = synth_toy_dataset(ToyKind::gradients, 10, 8, 2);
  auto epoch = [&](std::uint64_t seed) {
    std::vector<std::string> order;
    BatchIterator it = batches(d, 3, seed);
    ImageBatch b;
    while (it.next(b)) order.insert(order.end(), b.source_ids.begin(), b.source_ids.end());
    return order;
  };
  const auto a = epoch(1), again = epoch(1), b = epoch(2);
  CHECK(a == again);
  CHECK(a != b);
  CHECK(std::multiset<std::string>(a.begin(), a.end()) == std::multiset<std::string>(b.begin(), b.end()));
}

TEST_CASE("oversized batches become one short batch with a warning") {
  WarningCapture warnings;
  const Dataset d = synth_toy_dataset(ToyKind::blobs, 3, 8, 2);
  BatchIterator it = batches(d, 8, 0);
  CHECK(warnings.messages.size() == 1);
  ImageBatch b;
  REQUIRE(it.next(b));
  CHECK(b.size() == 3);
  CHECK_FALSE(it.next(b));
  CHECK_THROWS_AS(batches(d, 0, 0), Error);
}
