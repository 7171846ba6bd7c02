// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace swimlane {

// Sets the global log level from DVLA_LOG (quiet|info|trace, default info).
// Returns false, leaving the level at info, for an unrecognized value.
bool init_logging_from_env();
bool set_log_level(std::string_view name);

}  // namespace swimlane
