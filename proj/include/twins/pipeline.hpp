#pragma once

// End-to-end wiring: scenario -> grid -> polling -> locate -> tracker, plus
// the calibration sweeps.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twins/env.hpp"
#include "twins/fingerprint.hpp"
#include "twins/scenario.hpp"
#include "twins/tracker.hpp"

namespace twins::pipeline {

struct Prepared {
  scenario::Scenario scenario;
  env::TwinsGrid grid;
  std::map<int, double> powers;
};

/// Builds the grid and per-twin critical powers. ConfigError / CalibrationError.
Prepared prepare(scenario::Scenario s);

env::ScenarioRun simulate(const Prepared& p, std::uint64_t seed);

tracker::Fingerprint train(const Prepared& p, std::uint64_t seed, bool parallel = true);

/// n_i per interval rebuilt from a query trace.
std::vector<std::map<int, int>> counts_from_trace(const std::vector<env::QueryRecord>& trace,
                                                  int intervals, int n_max);

using PositionFn = std::function<std::optional<Vec2>(double t)>;

/// Ground truth from sampled positions, linear between samples; nullopt
/// outside the sampled span.
PositionFn truth_from_samples(std::vector<env::TruthSample> samples, double tick);

struct TrajectoryRow {
  int interval = 0;
  double t = 0.0;  // interval midpoint
  Vec2 estimate;
  std::optional<Vec2> truth;
  double error = 0.0;  // 0 when truth is absent
  bool diverged = false;
  int components = 0;
};

struct RunReport {
  std::vector<TrajectoryRow> rows;
  double mean_error = 0.0;
  double max_error = 0.0;
  std::vector<double> error_cdf;  // sorted errors of rows with truth
  double detection_rate = 0.0;    // jumping / queries with the object in the front region
  long front_queries = 0;
  long front_jumps = 0;
  int spills = 0;
  int divergences = 0;
};

/// Fraction of in-window queries with the object in the queried twin's front
/// region that came back jumping.
void detection_stats(const std::vector<env::QueryRecord>& trace, const Prepared& p,
                     const PositionFn& position, long& queries, long& jumps);

/// Intervals in which some reader's queries ran past the interval end.
int spills_from_trace(const std::vector<env::QueryRecord>& trace, double dt, double tau);

/// Runs the tracker over per-interval counts and scores it against `truth`.
RunReport track(const Prepared& p, const tracker::Fingerprint& fp,
                const std::vector<std::map<int, int>>& counts, const PositionFn& truth,
                std::uint64_t tracker_seed, bool parallel = true);

/// simulate + track with the seed conventions used by the CLI.
RunReport run_trial(const Prepared& p, const tracker::Fingerprint& fp, std::uint64_t seed,
                    bool parallel = true);

std::uint64_t tracker_seed(std::uint64_t seed);

struct TrialResult {
  std::uint64_t seed = 0;
  RunReport report;
};

struct Aggregate {
  std::vector<TrialResult> trials;  // ascending seed
  double mean_error = 0.0;
  double error_sd = 0.0;
  double ci95 = 0.0;  // half-width
  double max_error = 0.0;
  double detection_rate = 0.0;
  int spills = 0;
  int divergences = 0;
};

/// Trials use seeds seed, seed+1, ...; run in parallel, reduced in seed order.
Aggregate evaluate(const Prepared& p, const tracker::Fingerprint& fp, std::uint64_t seed, int trials,
                   bool parallel = true);

// Sweeps ---------------------------------------------------------------------

struct Table {
  std::string header;
  std::vector<std::vector<std::string>> rows;
};

/// min_power_vs_d | power_vs_D | placement | height | mount_height
Table sweep(const Prepared& p, const std::string& kind, std::uint64_t seed);

bool known_sweep(const std::string& kind);

}  // namespace twins::pipeline
