// SPDX-License-Identifier: Apache-2.0
//
// Image datasets: folders of PNG/JPEG files and procedural toy sets, with
// deterministic splits and shuffled batching.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cycpaint/tensor.hpp"

namespace cycpaint {

struct ImageBatch {
  Tensor<float> data;  // N x 3 x R x R, values in [-1, 1]
  std::vector<std::string> source_ids;

  int size() const noexcept { return data.shape().n; }
};

enum class Split { all, train, test };

enum class ToyKind { gradients, checkers, blobs };

ToyKind parse_toy_kind(const std::string& name);
std::string toy_kind_name(ToyKind kind);

/// Immutable view over a shared image pool. Copies are cheap.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string root, int resolution, std::shared_ptr<const std::vector<Tensor<float>>> pool,
          std::shared_ptr<const std::vector<std::string>> ids);

  const std::string& root() const noexcept { return root_; }
  int resolution() const noexcept { return resolution_; }
  Split split() const noexcept { return split_; }
  int count() const noexcept { return static_cast<int>(indices_.size()); }

  /// 1 x 3 x R x R
  const Tensor<float>& image(int i) const;
  const std::string& source_id(int i) const;

  ImageBatch gather(const std::vector<int>& positions) const;

  /// Deterministic disjoint split; the train part gets round(ratio * count)
  /// images, clamped so both parts are non-empty.
  std::pair<Dataset, Dataset> split_by(double ratio, std::uint64_t seed) const;

 private:
  std::string root_;
  int resolution_ = 0;
  Split split_ = Split::all;
  std::shared_ptr<const std::vector<Tensor<float>>> pool_;
  std::shared_ptr<const std::vector<std::string>> ids_;
  std::vector<int> indices_;
};

/// Loads every decodable image under `root` (sorted by file name), skipping
/// unreadable files with a warning, and splits into (train, test).
std::pair<Dataset, Dataset> load_folder(const std::string& root, int resolution, double split_ratio,
                                        std::uint64_t seed);

/// Loads the folder without splitting.
Dataset load_folder_all(const std::string& root, int resolution);

Dataset synth_toy_dataset(ToyKind kind, int n, int resolution, std::uint64_t seed);

/// "synth:<kind>:<n>[:<seed>]" or a folder path.
Dataset open_dataset(const std::string& spec, int resolution);

/// One epoch of shuffled batches; the final batch may be short.
class BatchIterator {
 public:
  BatchIterator(Dataset dataset, int batch_size, std::uint64_t shuffle_seed);

  bool next(ImageBatch& out);
  int batches_per_epoch() const noexcept;
  const std::vector<int>& order() const noexcept { return order_; }

 private:
  Dataset dataset_;
  int batch_size_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
};

BatchIterator batches(const Dataset& dataset, int batch_size, std::uint64_t shuffle_seed);

/// Deterministic permutation of [0, n).
std::vector<int> shuffled_indices(int n, std::uint64_t seed);

}  // namespace cycpaint
