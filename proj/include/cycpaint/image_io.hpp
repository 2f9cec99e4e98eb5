// SPDX-License-Identifier: Apache-2.0
//
// PNG/JPEG decoding and encoding. Images enter the numeric core as
// 1 x 3 x R x R tensors with values in [-1, 1] (RGB order).

#pragma once

#include <cstdint>
#include <string>

#include "cycpaint/masking.hpp"
#include "cycpaint/tensor.hpp"

namespace cycpaint {

/// 8-bit value v maps to v * 2 / 255 - 1.
inline float normalize_u8(std::uint8_t v) { return static_cast<float>(2 * static_cast<int>(v) - 255) / 255.0f; }

/// Inverse of normalize_u8 with rounding and clamping.
std::uint8_t quantize_unit(float v);

/// Decodes an image, center-crops it to a square and resizes it to
/// `resolution`. Throws an io error when the file cannot be decoded.
Tensor<float> read_image(const std::string& path, int resolution);

/// Decodes without cropping or resizing.
Tensor<float> read_image_native(const std::string& path);

/// Writes image `index` of a batch as an 8-bit RGB PNG.
void write_image(const std::string& path, const Tensor<float>& batch, int index = 0);

/// Any pixel brighter than mid-gray is a 1-cell.
BinaryMap read_mask_png(const std::string& path);

/// 1-bit-per-pixel PNG.
void write_mask_png(const std::string& path, const BinaryMap& mask);

}  // namespace cycpaint
