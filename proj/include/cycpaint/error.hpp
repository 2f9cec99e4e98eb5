// SPDX-License-Identifier: Apache-2.0
//
// Error categories shared by the C++ core, the C API and the CLI.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cycpaint {

enum class ErrorCategory {
  usage,
  config,
  shape_mismatch,
  geometry,
  io,
  checkpoint,
  non_finite,
  empty_input,
  internal,
};

/// Machine-parseable name, e.g. "shape-mismatch".
std::string_view category_name(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

}  // namespace cycpaint
