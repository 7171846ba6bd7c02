// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#include "swimlane/logging.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace swimlane {

bool set_log_level(std::string_view name) {
  if (name == "quiet") {
    spdlog::set_level(spdlog::level::err);
  } else if (name == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (name == "trace") {
    spdlog::set_level(spdlog::level::trace);
  } else {
    spdlog::set_level(spdlog::level::info);
    return false;
  }
  return true;
}

bool init_logging_from_env() {
  // Logs go to stderr so stdout stays machine-readable.
  if (!spdlog::get("swimlane")) spdlog::set_default_logger(spdlog::stderr_color_mt("swimlane"));
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  const char* v = std::getenv("DVLA_LOG");
  if (!v || !*v) return set_log_level("info");
  return set_log_level(v);
}

}  // namespace swimlane
