// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// SVG figures from sweep CSVs and compare reports. Output depends only on
// the input rows, so re-plotting a file yields identical bytes.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace swimlane {

enum class PlotKind { Throughput, Breakdown, Scaling };
PlotKind parse_plot_kind(std::string_view s);

using PlotRow = std::map<std::string, std::string>;

// Header line names the columns. ValidationError on ragged rows.
std::vector<PlotRow> parse_csv(std::string_view text);
// Rows from a CSV file, or the "rows" array of a JSON report.
std::vector<PlotRow> load_plot_rows(const std::string& path);

// throughput: one bar per row; breakdown: rollout/actor/transfer stacked
// per row; scaling: throughput against n_envs. Rows need the columns the
// kind uses; ValidationError otherwise.
std::string render_svg(const std::vector<PlotRow>& rows, PlotKind kind);

}  // namespace swimlane
