// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// Metric records (JSON lines), throughput summaries and the success curve.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "swimlane/runtime.hpp"

namespace swimlane {

inline constexpr int kMetricsSchema = 1;

// Fields excluded when comparing two metric streams.
inline constexpr const char* kTimestampKey = "ts";

nlohmann::json epoch_record(const EpochReport& e, const RunConfig& cfg, RunMode mode);
nlohmann::json update_record(const EpochReport& e);
nlohmann::json pool_record(const EpochReport& e);
nlohmann::json run_summary_record(const RunResult& r, const RunConfig& cfg);

// Every record of a run in emission order: per epoch an epoch, update and
// pool record, then one run_summary.
std::vector<nlohmann::json> run_records(const RunResult& r, const RunConfig& cfg);

// Appends records one per line. With `timestamps` each record carries "ts"
// (seconds since the Unix epoch).
void write_jsonl(std::ostream& out, const std::vector<nlohmann::json>& records, bool timestamps = true);
void write_jsonl_file(const std::string& path, const std::vector<nlohmann::json>& records, bool timestamps = true);

// A final line that fails to parse is dropped (a crashed writer); any other
// bad line, or a record without the current schema, is a ValidationError.
std::vector<nlohmann::json> read_jsonl(std::istream& in);
std::vector<nlohmann::json> read_jsonl_file(const std::string& path);

// Drops timestamp keys so two streams can be compared.
nlohmann::json strip_timestamps(nlohmann::json record);

struct ThroughputSummary {
  double transitions_per_sec = 0;
  double inference_steps_per_sec = 0;
  double wall_time = 0;  // seconds covered by the post-warmup epochs
  std::uint64_t transitions = 0;
  std::uint64_t inference_steps = 0;
  std::uint64_t epochs = 0;
  std::uint64_t chunk = 0;
};

// Totals over node-0 epoch records after dropping the first `warmup`.
// Throws ValidationError "no post-warmup epochs" when nothing remains, and
// when the chunk identity does not hold.
ThroughputSummary summarize(const std::vector<nlohmann::json>& records, std::uint32_t warmup = 1);

// (behavior version, mean episode outcome) from update records, ascending
// by version; epochs rolled out under the same version are averaged.
std::vector<std::pair<std::uint64_t, double>> success_rate_curve(const std::vector<nlohmann::json>& records);

// First version at which the trailing mean over `window` curve points
// reaches `threshold`, if any.
std::optional<std::uint64_t> versions_to_reach(const std::vector<std::pair<std::uint64_t, double>>& curve,
                                               double threshold, std::size_t window = 1);

}  // namespace swimlane
