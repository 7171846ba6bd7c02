// Copyright (c) 2026, The Swimlane Authors
// SPDX-License-Identifier: Apache-2.0
//
// swimlane train|simulate|compare|plot|membench
//
// Exit codes: 0 success, 1 invalid input, 2 runtime abort (a diagnostics
// file is written and its path printed).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "swimlane/config.hpp"
#include "swimlane/des.hpp"
#include "swimlane/errors.hpp"
#include "swimlane/logging.hpp"
#include "swimlane/membench.hpp"
#include "swimlane/metrics.hpp"
#include "swimlane/plot.hpp"
#include "swimlane/runtime.hpp"

using namespace swimlane;
using nlohmann::json;

namespace {

struct Overrides {
  std::string mode, strategy, ratio;
  std::optional<std::uint64_t> seed;
};

RunConfig load_with(const std::string& path, const Overrides& o) {
  RunConfig cfg = load_config(path);
  if (!o.mode.empty()) cfg.runtime.mode = parse_mode(o.mode);
  if (!o.strategy.empty()) cfg.placement.strategy = parse_strategy(o.strategy);
  if (!o.ratio.empty()) cfg.placement.ratio = parse_ratio(o.ratio);
  if (o.seed) cfg.runtime.seed = *o.seed;
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ValidationError("cannot open " + path + " for writing");
  f << text;
}

std::string diagnostics_path(const std::string& out) {
  return (out.empty() || out == "-" ? std::string("swimlane") : out) + ".diagnostics.txt";
}

json row_of(const StageAggregate& a, const RunConfig& cfg, std::string_view source) {
  return {{"source", source},
          {"mode", to_string(a.mode)},
          {"strategy", to_string(cfg.placement.strategy)},
          {"ratio", fmt::format("{}:{}", cfg.placement.ratio.rollout, cfg.placement.ratio.actor)},
          {"n_envs", cfg.env.n_envs},
          {"throughput", a.throughput},
          {"step_time", a.step_time},
          {"rollout_time", a.rollout_time},
          {"actor_time", a.actor_time},
          {"transfer_time", a.transfer_time}};
}

StageAggregate sim_aggregate(const SimResult& s) {
  return {s.mode, s.fingerprint, s.throughput, s.step_time, s.rollout_time, s.actor_time, s.transfer_time};
}

int cmd_train(const std::string& config, const Overrides& o, const std::string& out) {
  const RunConfig cfg = load_with(config, o);
  RunResult r;
  try {
    r = run(cfg, cfg.runtime.mode, cfg.runtime.epochs);
  } catch (const RuntimeAbort& e) {
    const std::string diag = diagnostics_path(out);
    std::ofstream(diag) << e.what() << '\n';
    std::cerr << "runtime abort: " << e.what() << "\ndiagnostics: " << diag << '\n';
    return 2;
  }
  const auto records = run_records(r, cfg);
  if (!out.empty()) {
    std::ofstream(out, std::ios::trunc);
    write_jsonl_file(out, records);
  } else {
    write_jsonl(std::cout, records);
  }
  if (r.epochs.size() > cfg.runtime.warmup_epochs) {
    const ThroughputSummary s = summarize(records, cfg.runtime.warmup_epochs);
    spdlog::info("{} run: {:.1f} transitions/s ({:.1f} inferences/s x chunk {}), final version {}",
                 to_string(r.mode), s.transitions_per_sec, s.inference_steps_per_sec, s.chunk, r.final_version);
  }
  return 0;
}

int cmd_simulate(const std::string& config, const std::string& sweep, const std::string& out) {
  const RunConfig cfg = load_with(config, {});
  std::vector<SimResult> curve;
  if (sweep.empty()) {
    curve.push_back(simulate(cfg, cfg.runtime.mode, cfg.runtime.epochs));
  } else {
    static const std::regex re(R"(envs=(\d+)\.\.(\d+):(\d+))");
    std::smatch m;
    if (!std::regex_match(sweep, m, re)) throw ValidationError("--sweep expects envs=A..B:step, got '" + sweep + "'");
    const std::size_t a = std::stoull(m[1]), b = std::stoull(m[2]), step = std::stoull(m[3]);
    if (step == 0 || a == 0 || b < a) throw ValidationError("--sweep needs 0 < A <= B and step > 0");
    std::vector<std::size_t> counts;
    for (std::size_t n = a; n <= b; n += step) counts.push_back(n);
    curve = sweep_envs(cfg, counts);
  }
  write_text(out, sweep_csv(curve));
  return 0;
}

int cmd_compare(const std::string& config, const std::string& out) {
  const RunConfig cfg = load_with(config, {});
  const std::uint32_t warmup = cfg.runtime.warmup_epochs;
  json report;
  report["schema"] = kMetricsSchema;
  report["config"] = config;
  json rows = json::array();
  StageAggregate live[2];
  SimResult sim[2];
  for (RunMode mode : {RunMode::Sync, RunMode::Async}) {
    const int i = mode == RunMode::Async;
    RunResult r;
    try {
      r = run(cfg, mode, cfg.runtime.epochs);
    } catch (const RuntimeAbort& e) {
      const std::string diag = diagnostics_path(out);
      std::ofstream(diag) << e.what() << '\n';
      std::cerr << "runtime abort: " << e.what() << "\ndiagnostics: " << diag << '\n';
      return 2;
    }
    live[i] = aggregate(r, warmup);
    sim[i] = simulate(cfg, mode, cfg.runtime.epochs);
    const BubbleStats bubbles = barrier_free_handoff_audit(r, warmup);
    json side = row_of(live[i], cfg, "live");
    side["sampler_bubble"] = bubbles.sampler_bubble;
    side["max_inference_staleness"] = r.max_inference_staleness;
    side["simulated_throughput"] = sim[i].throughput;
    side["bottleneck"] = to_string(sim[i].bottleneck);
    side["fit_max_deviation"] = fit_check(sim[i], live[i]).max_dev;
    report[std::string(to_string(mode))] = side;
    rows.push_back(row_of(live[i], cfg, "live"));
  }
  for (int i = 0; i < 2; ++i) rows.push_back(row_of(sim_aggregate(sim[i]), cfg, "simulated"));
  const double speedup = live[0].throughput > 0 ? live[1].throughput / live[0].throughput : 0.0;
  const double sim_speedup = sim[0].throughput > 0 ? sim[1].throughput / sim[0].throughput : 0.0;
  const double balance = sim[0].actor_time > 0 ? sim[0].rollout_time / sim[0].actor_time : 0.0;
  report["speedup"] = speedup;
  report["simulated_speedup"] = sim_speedup;
  report["rollout_actor_ratio"] = balance;
  // Asynchrony only hides the smaller stage; with one stage dominant the
  // pipeline runs at the pace of that stage.
  report["degenerate"] = speedup <= 1.4;
  report["diagnosis"] = speedup <= 1.4
                            ? fmt::format("quasi-synchronous: {} stage dominates (rollout/actor = {:.2f}); rebalance the "
                                          "resource ratio",
                                          to_string(sim[1].bottleneck), balance)
                            : fmt::format("overlapped: rollout/actor = {:.2f}", balance);
  report["rows"] = rows;
  write_text(out, report.dump(2) + "\n");
  return 0;
}

int cmd_plot(const std::string& in, const std::string& out, const std::string& kind) {
  write_text(out, render_svg(load_plot_rows(in), parse_plot_kind(kind)));
  return 0;
}

int cmd_membench(const std::string& config) {
  const RunConfig cfg = load_with(config, {});
  std::cout << membench_json(run_membench(MembenchConfig::from(cfg))) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (!init_logging_from_env()) spdlog::warn("DVLA_LOG must be quiet, info or trace; using info");

  CLI::App app{"swimlane: asynchronous rollout/training pipeline and its simulator"};
  app.require_subcommand(1);

  std::string config, out, in, kind, sweep;
  Overrides o;
  std::uint64_t seed = 0;

  auto* train = app.add_subcommand("train", "run the live runtime and write metric records");
  train->add_option("--config", config, "config file")->required();
  train->add_option("--mode", o.mode, "sync|async");
  train->add_option("--strategy", o.strategy, "colocated|disaggregated|hybrid");
  train->add_option("--ratio", o.ratio, "rollout:actor slots, e.g. 1:1");
  auto* seed_opt = train->add_option("--seed", seed, "seed");
  train->add_option("--out", out, "metrics JSONL (default stdout)");

  auto* sim = app.add_subcommand("simulate", "run the discrete-event model");
  sim->add_option("--config", config, "config file")->required();
  sim->add_option("--sweep", sweep, "envs=A..B:step");
  sim->add_option("--out", out, "curve CSV (default stdout)");

  auto* compare = app.add_subcommand("compare", "sync vs async on one config");
  compare->add_option("--config", config, "config file")->required();
  compare->add_option("--out", out, "report JSON")->required();

  auto* plot = app.add_subcommand("plot", "SVG figure from a curve CSV or compare report");
  plot->add_option("--in", in, "input file")->required();
  plot->add_option("--out", out, "SVG file")->required();
  plot->add_option("--kind", kind, "throughput|breakdown|scaling")->required();

  auto* membench = app.add_subcommand("membench", "dual-pool vs unified-pool churn");
  membench->add_option("--config", config, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*seed_opt) o.seed = seed;
    if (*train) return cmd_train(config, o, out);
    if (*sim) return cmd_simulate(config, sweep, out);
    if (*compare) return cmd_compare(config, out);
    if (*plot) return cmd_plot(in, out, kind);
    if (*membench) return cmd_membench(config);
  } catch (const RuntimeAbort& e) {
    const std::string diag = diagnostics_path(out);
    std::ofstream(diag) << e.what() << '\n';
    std::cerr << "runtime abort: " << e.what() << "\ndiagnostics: " << diag << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
