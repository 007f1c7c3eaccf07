#include "twins/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "twins/error.hpp"
#include "twins/io.hpp"
#include "twins/log.hpp"
#include "twins/scheduler.hpp"

namespace twins::pipeline {

Prepared prepare(scenario::Scenario s) {
  s.detection.validate();
  env::TwinsGrid grid = env::build_grid(s.grid);
  auto powers = scheduler::calibrate_powers(grid);
  const auto over = scheduler::over_budget_readers(grid, s.timing.dt, s.timing.tau_query);
  for (int r : over) {
    log::warn("reader " + std::to_string(r) + " cannot finish a round within one interval; rounds will spill");
  }
  return Prepared{std::move(s), std::move(grid), std::move(powers)};
}

env::ScenarioRun simulate(const Prepared& p, std::uint64_t seed) {
  const auto& s = p.scenario;
  scheduler::MpllPoller poller(p.grid, p.powers);
  return env::run_scenario(p.grid, s.detection, s.object, poller, s.duration(), s.timing.dt,
                           s.timing.tau_query, seed, s.timing.truth_tick);
}

tracker::Fingerprint train(const Prepared& p, std::uint64_t seed, bool parallel) {
  const auto& s = p.scenario;
  return parallel ? tracker::train_offline(p.grid, p.powers, s.detection, s.training, seed)
                  : tracker::train_offline_serial(p.grid, p.powers, s.detection, s.training, seed);
}

std::vector<std::map<int, int>> counts_from_trace(const std::vector<env::QueryRecord>& trace,
                                                  int intervals, int n_max) {
  std::vector<std::map<int, int>> out(static_cast<std::size_t>(std::max(intervals, 0)));
  for (const auto& q : trace) {
    if (q.outcome != env::QueryOutcome::Jumping) continue;
    if (q.interval < 0 || q.interval >= intervals) continue;
    int& n = out[static_cast<std::size_t>(q.interval)][q.twin];
    n = std::min(n + 1, n_max);
  }
  return out;
}

namespace {

int interval_count(const scenario::Scenario& s) {
  return static_cast<int>(std::ceil(s.duration() / s.timing.dt - 1e-9));
}

PositionFn object_truth(const scenario::Scenario& s) {
  return [obj = s.object](double t) -> std::optional<Vec2> {
    if (!obj || !obj->present(t)) return std::nullopt;
    return env::object_position(*obj, t);
  };
}

}  // namespace

int spills_from_trace(const std::vector<env::QueryRecord>& trace, double dt, double tau) {
  std::vector<int> spilled;
  for (const auto& q : trace) {
    if (q.t + tau > (q.interval + 1) * dt + 1e-9) spilled.push_back(q.interval);
  }
  std::sort(spilled.begin(), spilled.end());
  return static_cast<int>(std::unique(spilled.begin(), spilled.end()) - spilled.begin());
}

PositionFn truth_from_samples(std::vector<env::TruthSample> samples, double tick) {
  return [samples = std::move(samples), tick](double t) -> std::optional<Vec2> {
    if (samples.empty()) return std::nullopt;
    if (t < samples.front().t - 1e-9 || t > samples.back().t + 1e-9) return std::nullopt;
    auto it = std::lower_bound(samples.begin(), samples.end(), t,
                               [](const env::TruthSample& s, double v) { return s.t < v; });
    if (it == samples.end()) return samples.back().position;
    if (it == samples.begin() || std::abs(it->t - t) < 1e-12) return it->position;
    const auto& a = *(it - 1);
    const auto& b = *it;
    if (b.t - a.t > 2.0 * tick + 1e-9) return std::nullopt;  // object absent between samples
    const double w = (t - a.t) / (b.t - a.t);
    return a.position + (b.position - a.position) * w;
  };
}

void detection_stats(const std::vector<env::QueryRecord>& trace, const Prepared& p,
                     const PositionFn& position, long& queries, long& jumps) {
  queries = 0;
  jumps = 0;
  for (const auto& q : trace) {
    if (q.outcome == env::QueryOutcome::NotInCriticalState) continue;
    const auto pos = position(q.t);
    if (!pos) continue;
    const auto& twin = p.grid.twin(q.twin);
    const auto& reader = p.grid.reader(twin.reader_id);
    if (env::in_effective_region(twin, reader, *pos, p.scenario.detection) != env::Region::Front) continue;
    ++queries;
    if (q.outcome == env::QueryOutcome::Jumping) ++jumps;
  }
}

RunReport track(const Prepared& p, const tracker::Fingerprint& fp,
                const std::vector<std::map<int, int>>& counts, const PositionFn& truth,
                std::uint64_t seed, bool parallel) {
  const auto& s = p.scenario;
  if (std::abs(fp.meta().dt - s.timing.dt) > 1e-12) {
    throw ConfigError("fingerprint was trained with dt=" + io::fmt(fp.meta().dt) +
                      " s but the scenario uses dt=" + io::fmt(s.timing.dt) + " s");
  }
  auto cfg = s.tracker;
  cfg.parallel = parallel;
  tracker::ParticleTracker tr(p.grid, fp, cfg, seed);
  RunReport rep;
  double sum = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double t = (static_cast<double>(k) + 0.5) * s.timing.dt;
    const auto st = tr.step(static_cast<int>(k), t, counts[k]);
    TrajectoryRow row;
    row.interval = static_cast<int>(k);
    row.t = t;
    row.estimate = st.estimate;
    row.truth = truth(t);
    row.diverged = st.diverged;
    row.components = st.coarse ? st.coarse->component_count : 0;
    if (row.truth) {
      row.error = distance(row.estimate, *row.truth);
      rep.error_cdf.push_back(row.error);
      sum += row.error;
      rep.max_error = std::max(rep.max_error, row.error);
    }
    if (st.diverged) ++rep.divergences;
    rep.rows.push_back(row);
  }
  std::sort(rep.error_cdf.begin(), rep.error_cdf.end());
  if (!rep.error_cdf.empty()) rep.mean_error = sum / static_cast<double>(rep.error_cdf.size());
  return rep;
}

std::uint64_t tracker_seed(std::uint64_t seed) { return mix_seed(seed, 0x5eedULL); }

RunReport run_trial(const Prepared& p, const tracker::Fingerprint& fp, std::uint64_t seed, bool parallel) {
  const auto& s = p.scenario;
  const auto run = simulate(p, seed);
  const int intervals = interval_count(s);
  const auto counts = counts_from_trace(run.trace, intervals, s.training.meta.n_max);
  const auto truth = object_truth(s);
  RunReport rep = track(p, fp, counts, truth, tracker_seed(seed), parallel);
  detection_stats(run.trace, p, truth, rep.front_queries, rep.front_jumps);
  rep.detection_rate = rep.front_queries ? static_cast<double>(rep.front_jumps) / rep.front_queries : 0.0;
  rep.spills = spills_from_trace(run.trace, s.timing.dt, s.timing.tau_query);
  return rep;
}

Aggregate evaluate(const Prepared& p, const tracker::Fingerprint& fp, std::uint64_t seed, int trials,
                   bool parallel) {
  if (trials < 1) throw ConfigError("at least one trial is required");
  std::vector<TrialResult> results(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    results[static_cast<std::size_t>(i)] = {s, run_trial(p, fp, s, false)};
  }
  std::sort(results.begin(), results.end(),
            [](const TrialResult& a, const TrialResult& b) { return a.seed < b.seed; });

  Aggregate agg;
  double sum = 0.0;
  double det = 0.0;
  for (const auto& r : results) {
    sum += r.report.mean_error;
    det += r.report.detection_rate;
    agg.max_error = std::max(agg.max_error, r.report.max_error);
    agg.spills += r.report.spills;
    agg.divergences += r.report.divergences;
  }
  const double n = static_cast<double>(results.size());
  agg.mean_error = sum / n;
  agg.detection_rate = det / n;
  double ss = 0.0;
  for (const auto& r : results) ss += (r.report.mean_error - agg.mean_error) * (r.report.mean_error - agg.mean_error);
  agg.error_sd = results.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  agg.ci95 = 1.96 * agg.error_sd / std::sqrt(n);
  agg.trials = std::move(results);
  return agg;
}

// Sweeps ---------------------------------------------------------------------

namespace {

std::string opt(const std::optional<double>& v) { return v ? io::fmt(*v) : "NA"; }

Table sweep_min_power_vs_d(const Prepared& p) {
  const auto& s = p.scenario;
  const auto& ex = p.grid.excitation();
  const auto& g = s.grid.geometry;
  Table t{"d_mm,fore_dbm,rear_dbm,gap_db,critical_window", {}};
  const int first = static_cast<int>(std::ceil(g.tag().line_gap() * 1000.0 - 1e-9));
  for (int mm = std::max(first, 6); mm <= 26; ++mm) {
    const auto geo = g.with_separation(mm / 1000.0);
    const auto fore = coupling::min_activation_power(geo, ex, s.targets.distance, coupling::TagRole::Fore);
    const auto rear = coupling::min_activation_power(geo, ex, s.targets.distance, coupling::TagRole::Rear);
    const auto window = coupling::critical_window(geo, ex, s.targets.distance);
    const std::optional<double> gap = fore && rear ? std::optional<double>(*rear - *fore) : std::nullopt;
    t.rows.push_back({std::to_string(mm), opt(fore), opt(rear), opt(gap), window ? "1" : "0"});
  }
  return t;
}

Table sweep_power_vs_distance(const Prepared& p) {
  const auto& s = p.scenario;
  const auto& ex = p.grid.excitation();
  const auto& g = s.grid.geometry;
  Table t{"D_m,fore_dbm,rear_dbm,window_lower_dbm,window_upper_dbm,p_tx_dbm", {}};
  for (int i = 5; i <= 70; ++i) {
    const double d = i / 10.0;
    const auto fore = coupling::min_activation_power(g, ex, d, coupling::TagRole::Fore);
    const auto rear = coupling::min_activation_power(g, ex, d, coupling::TagRole::Rear);
    const auto w = coupling::critical_window(g, ex, d);
    t.rows.push_back({io::fmt(d), opt(fore), opt(rear), w ? io::fmt(w->lower) : "NA",
                      w ? io::fmt(w->upper) : "NA", w ? io::fmt(w->grid_midpoint()) : "NA"});
  }
  return t;
}

Table sweep_placement(const Prepared& p) {
  const auto& s = p.scenario;
  const auto& ex = p.grid.excitation();
  Table t{"placement,shadowing,fore_dbm,rear_dbm,gap_db", {}};
  for (int i = 0; i < 8; ++i) {
    const auto pl = static_cast<coupling::Placement>(i);
    const auto geo = s.grid.geometry.with_placement(pl);
    const auto fore = coupling::min_activation_power(geo, ex, s.targets.distance, coupling::TagRole::Fore);
    const auto rear = coupling::min_activation_power(geo, ex, s.targets.distance, coupling::TagRole::Rear);
    const std::optional<double> gap = fore && rear ? std::optional<double>(*rear - *fore) : std::nullopt;
    t.rows.push_back({std::string(1, coupling::placement_letter(pl)), coupling::is_shadowing(pl) ? "1" : "0",
                      opt(fore), opt(rear), opt(gap)});
  }
  return t;
}

std::vector<std::string> detection_row(const Prepared& p, double x, std::uint64_t seed) {
  const auto run = simulate(p, seed);
  long q = 0;
  long j = 0;
  detection_stats(run.trace, p, object_truth(p.scenario), q, j);
  return {io::fmt(x), q ? io::fmt(static_cast<double>(j) / q) : "NA", std::to_string(q)};
}

Table sweep_height(const Prepared& p, std::uint64_t seed) {
  const auto& s = p.scenario;
  if (!s.object) throw ConfigError("the height sweep needs a moving object in the scenario");
  Table t{"height_m,detection_rate,front_queries", {}};
  for (int i = 0; i <= 8; ++i) {
    const double h = 1.50 + 0.05 * i;
    Prepared q = p;
    q.scenario.object = env::MovingObject(s.object->waypoints(), h, s.object->max_speed());
    t.rows.push_back(detection_row(q, h, seed));
  }
  return t;
}

Table sweep_mount_height(const Prepared& p, std::uint64_t seed) {
  const auto& s = p.scenario;
  if (!s.object) throw ConfigError("the mount height sweep needs a moving object in the scenario");
  Table t{"mount_height_m,detection_rate,front_queries", {}};
  for (int i = 0; i <= 14; ++i) {
    const double h = 0.40 + 0.05 * i;
    scenario::Scenario changed = s;
    for (auto& tw : changed.grid.twins) tw.mount_height = h;
    t.rows.push_back(detection_row(prepare(std::move(changed)), h, seed));
  }
  return t;
}

}  // namespace

bool known_sweep(const std::string& kind) {
  return kind == "min_power_vs_d" || kind == "power_vs_D" || kind == "placement" || kind == "height" ||
         kind == "mount_height";
}

Table sweep(const Prepared& p, const std::string& kind, std::uint64_t seed) {
  if (kind == "min_power_vs_d") return sweep_min_power_vs_d(p);
  if (kind == "power_vs_D") return sweep_power_vs_distance(p);
  if (kind == "placement") return sweep_placement(p);
  if (kind == "height") return sweep_height(p, seed);
  if (kind == "mount_height") return sweep_mount_height(p, seed);
  throw ConfigError("unknown sweep kind \"" + kind + "\"");
}

}  // namespace twins::pipeline
