// twins: scenario runner. Verbs simulate | sweep | train | track | evaluate.
// Exit codes: 0 success, 1 runtime failure, 2 configuration failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "twins/error.hpp"
#include "twins/io.hpp"
#include "twins/log.hpp"
#include "twins/pipeline.hpp"

namespace fs = std::filesystem;
using namespace twins;

namespace {

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--scenario", c.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "RNG seed (defaults to the scenario seed)");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
}

struct Loaded {
  pipeline::Prepared prepared;
  std::uint64_t seed;
  io::Provenance prov;
};

Loaded load(const Common& c) {
  auto s = scenario::load_scenario(c.scenario);
  const std::uint64_t seed = c.seed.value_or(s.seed);
  const std::string hash = s.hash;
  return {pipeline::prepare(std::move(s)), seed, {hash, seed}};
}

void print_report(const pipeline::RunReport& r) {
  std::printf("intervals=%zu mean_error_m=%s max_error_m=%s detection_rate=%s spills=%d divergences=%d\n",
              r.rows.size(), io::fmt(r.mean_error).c_str(), io::fmt(r.max_error).c_str(),
              io::fmt(r.detection_rate).c_str(), r.spills, r.divergences);
}

void write_report(const fs::path& dir, const io::Provenance& prov, const pipeline::RunReport& r) {
  std::vector<std::vector<std::string>> traj;
  for (const auto& row : r.rows) {
    traj.push_back({io::fmt(row.t), io::fmt(row.estimate.x), io::fmt(row.estimate.y),
                    row.truth ? io::fmt(row.truth->x) : "NA", row.truth ? io::fmt(row.truth->y) : "NA",
                    row.truth ? io::fmt(row.error) : "NA"});
  }
  io::write_table(dir / "trajectory.csv", prov, "t_s,x_est,y_est,x_true,y_true,error_m", traj);

  io::write_table(dir / "report.csv", prov, "metric,value",
                  {{"intervals", std::to_string(r.rows.size())},
                   {"mean_error_m", io::fmt(r.mean_error)},
                   {"max_error_m", io::fmt(r.max_error)},
                   {"detection_rate", io::fmt(r.detection_rate)},
                   {"front_queries", std::to_string(r.front_queries)},
                   {"spills", std::to_string(r.spills)},
                   {"divergences", std::to_string(r.divergences)}});

  std::vector<std::vector<std::string>> cdf;
  const double n = static_cast<double>(r.error_cdf.size());
  for (std::size_t i = 0; i < r.error_cdf.size(); ++i) {
    cdf.push_back({io::fmt(r.error_cdf[i]), io::fmt(static_cast<double>(i + 1) / n)});
  }
  io::write_table(dir / "error_cdf.csv", prov, "error_m,fraction", cdf);
}

int cmd_simulate(const Common& c) {
  auto l = load(c);
  const auto run = pipeline::simulate(l.prepared, l.seed);
  const fs::path dir(c.out);
  io::write_events(dir / "events.csv", l.prov, run.events);
  io::write_truth(dir / "truth.csv", l.prov, run.truth);
  io::write_trace(dir / "trace.csv", l.prov, run.trace);
  std::printf("events=%zu queries=%zu intervals=%zu\n", run.events.size(), run.trace.size(),
              run.intervals.size());
  return 0;
}

int cmd_sweep(const Common& c, const std::string& kind) {
  auto l = load(c);
  const auto table = pipeline::sweep(l.prepared, kind, l.seed);
  io::write_table(fs::path(c.out) / ("sweep_" + kind + ".csv"), l.prov, table.header, table.rows);
  std::printf("rows=%zu\n", table.rows.size());
  return 0;
}

int cmd_train(const Common& c) {
  auto l = load(c);
  const auto fp = pipeline::train(l.prepared, l.seed);
  io::write_fingerprint(fs::path(c.out) / "fingerprint.txt", l.prov, fp);
  std::printf("cells=%d\n", fp.cells());
  return 0;
}

int cmd_track(const Common& c, const std::string& fingerprint, const std::string& trace_dir) {
  auto l = load(c);
  const auto fp = io::read_fingerprint(fingerprint);
  const auto& s = l.prepared.scenario;
  pipeline::RunReport rep;
  if (trace_dir.empty()) {
    rep = pipeline::run_trial(l.prepared, fp, l.seed);
  } else {
    io::Provenance from_files;
    const auto trace = io::read_trace(fs::path(trace_dir) / "trace.csv", &from_files);
    auto truth = pipeline::truth_from_samples(io::read_truth(fs::path(trace_dir) / "truth.csv"),
                                              s.timing.truth_tick);
    if (from_files.scenario_hash != s.hash) log::warn("trace was produced from a different scenario");
    if (!c.seed) l.seed = from_files.seed;
    l.prov.seed = l.seed;
    const int intervals = static_cast<int>(std::ceil(s.duration() / s.timing.dt - 1e-9));
    const auto counts = pipeline::counts_from_trace(trace, intervals, s.training.meta.n_max);
    rep = pipeline::track(l.prepared, fp, counts, truth, pipeline::tracker_seed(l.seed));
    pipeline::detection_stats(trace, l.prepared, truth, rep.front_queries, rep.front_jumps);
    rep.detection_rate = rep.front_queries ? static_cast<double>(rep.front_jumps) / rep.front_queries : 0.0;
    rep.spills = pipeline::spills_from_trace(trace, s.timing.dt, s.timing.tau_query);
  }
  write_report(c.out, l.prov, rep);
  print_report(rep);
  return 0;
}

int cmd_evaluate(const Common& c, std::optional<int> trials, const std::string& fingerprint) {
  auto l = load(c);
  const int n = trials.value_or(l.prepared.scenario.trials);
  const auto fp = fingerprint.empty() ? pipeline::train(l.prepared, l.seed) : io::read_fingerprint(fingerprint);
  const auto agg = pipeline::evaluate(l.prepared, fp, l.seed, n);
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : agg.trials) {
    const auto& r = t.report;
    rows.push_back({std::to_string(t.seed), io::fmt(r.mean_error), io::fmt(r.max_error),
                    io::fmt(r.detection_rate), std::to_string(r.spills), std::to_string(r.divergences)});
  }
  const fs::path dir(c.out);
  io::write_table(dir / "trials.csv", l.prov, "seed,mean_error_m,max_error_m,detection_rate,spills,divergences",
                  rows);
  io::write_table(dir / "summary.csv", l.prov, "metric,value",
                  {{"trials", std::to_string(agg.trials.size())},
                   {"mean_error_m", io::fmt(agg.mean_error)},
                   {"error_sd_m", io::fmt(agg.error_sd)},
                   {"ci95_half_width_m", io::fmt(agg.ci95)},
                   {"max_error_m", io::fmt(agg.max_error)},
                   {"detection_rate", io::fmt(agg.detection_rate)},
                   {"spills", std::to_string(agg.spills)},
                   {"divergences", std::to_string(agg.divergences)}});
  std::printf("trials=%zu mean_error_m=%s ci95=%s max_error_m=%s detection_rate=%s\n", agg.trials.size(),
              io::fmt(agg.mean_error).c_str(), io::fmt(agg.ci95).c_str(), io::fmt(agg.max_error).c_str(),
              io::fmt(agg.detection_rate).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twins device-free tracking simulator"};
  app.require_subcommand(1);

  Common sim_c, sweep_c, train_c, track_c, eval_c;
  auto* sim = app.add_subcommand("simulate", "run the warehouse and write events, truth and query trace");
  add_common(sim, sim_c);

  auto* sw = app.add_subcommand("sweep", "calibration and detection-rate sweeps");
  add_common(sw, sweep_c);
  std::string kind;
  sw->add_option("--kind", kind, "min_power_vs_d | power_vs_D | height | mount_height | placement")
      ->required()
      ->check(CLI::IsMember({"min_power_vs_d", "power_vs_D", "height", "mount_height", "placement"}));

  auto* tr = app.add_subcommand("train", "train the fingerprint");
  add_common(tr, train_c);

  auto* tk = app.add_subcommand("track", "track the walker and score the estimate");
  add_common(tk, track_c);
  std::string fingerprint;
  std::string trace_dir;
  tk->add_option("--fingerprint", fingerprint, "fingerprint file from `train`")->required();
  tk->add_option("--trace-dir", trace_dir, "consume trace.csv and truth.csv from `simulate`");

  auto* ev = app.add_subcommand("evaluate", "multi-seed evaluation");
  add_common(ev, eval_c);
  std::optional<int> trials;
  std::string eval_fp;
  ev->add_option("--trials", trials, "number of seeds (defaults to the scenario)")->check(CLI::PositiveNumber);
  ev->add_option("--fingerprint", eval_fp, "reuse a trained fingerprint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  int rc = 0;
  try {
    if (*sim) rc = cmd_simulate(sim_c);
    if (*sw) rc = cmd_sweep(sweep_c, kind);
    if (*tr) rc = cmd_train(train_c);
    if (*tk) rc = cmd_track(track_c, fingerprint, trace_dir);
    if (*ev) rc = cmd_evaluate(eval_c, trials, eval_fp);
  } catch (const ConfigError& e) {
    log::error(e.what());
    return 2;
  } catch (const CalibrationError& e) {
    log::error(e.what());
    return 2;
  } catch (const std::exception& e) {
    log::error(e.what());
    return 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "runtime_s=%s\n", io::fmt(secs).c_str());
  return rc;
}
