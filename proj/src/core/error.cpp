// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/error.hpp"

namespace cycpaint {

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::config: return "config";
    case ErrorCategory::shape_mismatch: return "shape-mismatch";
    case ErrorCategory::geometry: return "geometry";
    case ErrorCategory::io: return "io";
    case ErrorCategory::checkpoint: return "checkpoint";
    case ErrorCategory::non_finite: return "non-finite";
    case ErrorCategory::empty_input: return "empty-input";
    case ErrorCategory::internal: return "internal";
  }
  return "internal";
}

void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace cycpaint
