// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "cycpaint/image_io.hpp"
#include "cycpaint/log.hpp"
#include "cycpaint/random.hpp"

namespace cycpaint {

namespace fs = std::filesystem;

namespace {

struct Color {
  double r, g, b;
};

Color random_color(Rng& rng) { return {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}; }

// Two colors whose mean channel distance is at least `min_gap`.
std::pair<Color, Color> contrasting_pair(Rng& rng, double min_gap) {
  for (;;) {
    Color a = random_color(rng), b = random_color(rng);
    const double d = (std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b)) / 3.0;
    if (d >= min_gap) return {a, b};
  }
}

void put(Tensor<float>& t, int y, int x, Color c) {
  t.at(0, 0, y, x) = static_cast<float>(std::clamp(c.r, -1.0, 1.0));
  t.at(0, 1, y, x) = static_cast<float>(std::clamp(c.g, -1.0, 1.0));
  t.at(0, 2, y, x) = static_cast<float>(std::clamp(c.b, -1.0, 1.0));
}

Color lerp(Color a, Color b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

Tensor<float> make_checkers(int res, Rng& rng) {
  const auto [a, b] = contrasting_pair(rng, 0.6);
  const int period = static_cast<int>(rng.uniform_int(std::max(2, res / 8), std::max(2, res / 3)));
  const int px = static_cast<int>(rng.uniform_int(0, 2 * period - 1));
  const int py = static_cast<int>(rng.uniform_int(0, 2 * period - 1));
  Tensor<float> t({1, 3, res, res});
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) put(t, y, x, (((x + px) / period + (y + py) / period) % 2) ? a : b);
  }
  return t;
}

Tensor<float> make_gradient(int res, Rng& rng) {
  const auto [a, b] = contrasting_pair(rng, 0.6);
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double half = 0.5 * (res - 1);
  Tensor<float> t({1, 3, res, res});
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const double u = ((x - half) * ct + (y - half) * st) / (res * 0.75) + 0.5;
      put(t, y, x, lerp(a, b, std::clamp(u, 0.0, 1.0)));
    }
  }
  return t;
}

Tensor<float> make_blobs(int res, Rng& rng) {
  const Color bg = random_color(rng);
  const int count = static_cast<int>(rng.uniform_int(2, 4));
  struct Blob {
    double cx, cy, radius;
    Color color;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < count; ++i) {
    blobs.push_back({rng.uniform(0, res), rng.uniform(0, res), rng.uniform(res * 0.12, res * 0.35),
                     random_color(rng)});
  }
  Tensor<float> t({1, 3, res, res});
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      Color c = bg;
      for (const auto& bl : blobs) {
        const double d2 = (x - bl.cx) * (x - bl.cx) + (y - bl.cy) * (y - bl.cy);
        c = lerp(c, bl.color, std::exp(-d2 / (2.0 * bl.radius * bl.radius)));
      }
      put(t, y, x, c);
    }
  }
  return t;
}

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

ToyKind parse_toy_kind(const std::string& name) {
  if (name == "gradients") return ToyKind::gradients;
  if (name == "checkers") return ToyKind::checkers;
  if (name == "blobs") return ToyKind::blobs;
  fail(ErrorCategory::config, "unknown toy dataset kind '" + name + "' (expected gradients|checkers|blobs)");
}

std::string toy_kind_name(ToyKind kind) {
  switch (kind) {
    case ToyKind::gradients: return "gradients";
    case ToyKind::checkers: return "checkers";
    case ToyKind::blobs: return "blobs";
  }
  return "unknown";
}

Dataset::Dataset(std::string root, int resolution, std::shared_ptr<const std::vector<Tensor<float>>> pool,
                 std::shared_ptr<const std::vector<std::string>> ids)
    : root_(std::move(root)), resolution_(resolution), pool_(std::move(pool)), ids_(std::move(ids)) {
  indices_.resize(pool_->size());
  for (std::size_t i = 0; i < indices_.size(); ++i) indices_[i] = static_cast<int>(i);
}

const Tensor<float>& Dataset::image(int i) const { return (*pool_)[static_cast<std::size_t>(indices_.at(i))]; }

const std::string& Dataset::source_id(int i) const { return (*ids_)[static_cast<std::size_t>(indices_.at(i))]; }

ImageBatch Dataset::gather(const std::vector<int>& positions) const {
  ImageBatch b;
  b.data = Tensor<float>({static_cast<int>(positions.size()), 3, resolution_, resolution_});
  const std::size_t per = static_cast<std::size_t>(3) * resolution_ * resolution_;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const Tensor<float>& img = image(positions[k]);
    std::copy_n(img.data(), per, b.data.data() + k * per);
    b.source_ids.push_back(source_id(positions[k]));
  }
  return b;
}

std::pair<Dataset, Dataset> Dataset::split_by(double ratio, std::uint64_t seed) const {
  if (count() < 2) fail(ErrorCategory::empty_input, "splitting needs at least 2 images");
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCategory::config, "split ratio must lie in (0, 1)");
  const auto order = shuffled_indices(count(), derive_seed(seed, {0x5911}));
  const int n_train = std::clamp(static_cast<int>(std::lround(ratio * count())), 1, count() - 1);
  Dataset train = *this, test = *this;
  train.split_ = Split::train;
  test.split_ = Split::test;
  train.indices_.clear();
  test.indices_.clear();
  for (int k = 0; k < count(); ++k) {
    (k < n_train ? train : test).indices_.push_back(indices_[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
  }
  std::sort(train.indices_.begin(), train.indices_.end());
  std::sort(test.indices_.begin(), test.indices_.end());
  return {std::move(train), std::move(test)};
}

Dataset load_folder_all(const std::string& root, int resolution) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) fail(ErrorCategory::io, "dataset folder not found: " + root);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root, ec)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  auto pool = std::make_shared<std::vector<Tensor<float>>>();
  auto ids = std::make_shared<std::vector<std::string>>();
  for (const auto& f : files) {
    try {
      pool->push_back(read_image(f.string(), resolution));
      ids->push_back(fs::relative(f, root, ec).generic_string());
    } catch (const Error& e) {
      warn("skipping " + f.string() + ": " + e.what());
    }
  }
  if (pool->empty()) fail(ErrorCategory::empty_input, "no decodable images under " + root);
  return Dataset(root, resolution, std::move(pool), std::move(ids));
}

std::pair<Dataset, Dataset> load_folder(const std::string& root, int resolution, double split_ratio,
                                        std::uint64_t seed) {
  Dataset all = load_folder_all(root, resolution);
  if (all.count() < 2) fail(ErrorCategory::empty_input, "need at least 2 decodable images under " + root);
  return all.split_by(split_ratio, seed);
}

Dataset synth_toy_dataset(ToyKind kind, int n, int resolution, std::uint64_t seed) {
  if (n < 2) fail(ErrorCategory::config, "toy dataset needs n >= 2");
  if (resolution < 4) fail(ErrorCategory::config, "toy dataset resolution must be >= 4");
  auto pool = std::make_shared<std::vector<Tensor<float>>>();
  auto ids = std::make_shared<std::vector<std::string>>();
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(i)}));
    switch (kind) {
      case ToyKind::checkers: pool->push_back(make_checkers(resolution, rng)); break;
      case ToyKind::gradients: pool->push_back(make_gradient(resolution, rng)); break;
      case ToyKind::blobs: pool->push_back(make_blobs(resolution, rng)); break;
    }
    std::ostringstream id;
    id << toy_kind_name(kind) << "/" << seed << "/" << i;
    ids->push_back(id.str());
  }
  std::ostringstream root;
  root << "synth:" << toy_kind_name(kind) << ":" << n << ":" << seed;
  return Dataset(root.str(), resolution, std::move(pool), std::move(ids));
}

Dataset open_dataset(const std::string& spec, int resolution) {
  if (spec.rfind("synth:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() < 3 || parts.size() > 4) {
      fail(ErrorCategory::config, "synthetic dataset spec must be synth:<kind>:<n>[:<seed>], got " + spec);
    }
    try {
      const int n = std::stoi(parts[2]);
      const std::uint64_t seed = parts.size() == 4 ? std::stoull(parts[3]) : 0;
      return synth_toy_dataset(parse_toy_kind(parts[1]), n, resolution, seed);
    } catch (const std::logic_error&) {
      fail(ErrorCategory::config, "malformed synthetic dataset spec " + spec);
    }
  }
  return load_folder_all(spec, resolution);
}

std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  return idx;
}

BatchIterator::BatchIterator(Dataset dataset, int batch_size, std::uint64_t shuffle_seed)
    : dataset_(std::move(dataset)), batch_size_(batch_size) {
  if (batch_size < 1) fail(ErrorCategory::config, "batch_size must be >= 1");
  if (dataset_.count() < 1) fail(ErrorCategory::empty_input, "dataset is empty");
  if (batch_size > dataset_.count()) {
    warn("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
         std::to_string(dataset_.count()) + "; using one short batch");
  }
  order_ = shuffled_indices(dataset_.count(), shuffle_seed);
}

bool BatchIterator::next(ImageBatch& out) {
  if (cursor_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
  out = dataset_.gather(std::vector<int>(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                         order_.begin() + static_cast<std::ptrdiff_t>(end)));
  cursor_ = end;
  return true;
}

int BatchIterator::batches_per_epoch() const noexcept {
  return static_cast<int>((order_.size() + static_cast<std::size_t>(batch_size_) - 1) /
                          static_cast<std::size_t>(batch_size_));
}

BatchIterator batches(const Dataset& dataset, int batch_size, std::uint64_t shuffle_seed) {
  return BatchIterator(dataset, batch_size, shuffle_seed);
}

}  // namespace cycpaint
