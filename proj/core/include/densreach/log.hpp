// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

namespace densreach {

enum class LogLevel { Debug, Info, Warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

/// Replaces the process-wide sink. The default writes warnings to stderr
/// and drops everything else. Pass an empty function to silence logging.
void set_log_sink(LogSink sink);

void log_message(LogLevel level, const std::string& message);

}  // namespace densreach
