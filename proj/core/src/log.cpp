// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/log.hpp"

#include <iostream>
#include <mutex>

namespace densreach {

namespace {

std::mutex g_mutex;

LogSink& sink() {
    static LogSink s = [](LogLevel level, const std::string& msg) {
        if (level == LogLevel::Warning) {
            std::cerr << "warning: " << msg << '\n';
        }
    };
    return s;
}

}  // namespace

void set_log_sink(LogSink s) {
    std::lock_guard<std::mutex> lock(g_mutex);
    sink() = std::move(s);
}

void log_message(LogLevel level, const std::string& message) {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (sink()) {
        sink()(level, message);
    }
}

}  // namespace densreach
