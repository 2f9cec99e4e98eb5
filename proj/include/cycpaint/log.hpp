// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

namespace cycpaint {

using LogSink = std::function<void(const std::string&)>;

/// Replaces the warning sink (stderr by default); returns the previous one.
LogSink set_warning_sink(LogSink sink);

void warn(const std::string& message);

}  // namespace cycpaint
