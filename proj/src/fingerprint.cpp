#include "twins/fingerprint.hpp"

#include <algorithm>
#include <set>

#include "twins/error.hpp"
#include "twins/rng.hpp"
#include "twins/scheduler.hpp"

namespace twins::tracker {

Fingerprint::Fingerprint(FingerprintMeta meta, int cells) : meta_(meta) {
  if (cells < 0) throw ArgumentError("negative cell count");
  if (meta_.n_max < 0) throw ArgumentError("n_max must be non-negative");
  cells_.resize(static_cast<std::size_t>(cells));
  background_.assign(static_cast<std::size_t>(bins()), 1.0 / bins());
}

bool Fingerprint::has(int cell, int twin) const {
  const auto& t = twins_of(cell);
  return std::binary_search(t.begin(), t.end(), twin);
}

std::span<const double> Fingerprint::histogram(int cell, int twin) const {
  const auto& rows = cells_.at(static_cast<std::size_t>(cell));
  const auto it = std::lower_bound(rows.twins.begin(), rows.twins.end(), twin);
  if (it == rows.twins.end() || *it != twin) return background_;
  const auto row = static_cast<std::size_t>(it - rows.twins.begin());
  return std::span<const double>(rows.probs).subspan(row * static_cast<std::size_t>(bins()),
                                                     static_cast<std::size_t>(bins()));
}

double Fingerprint::probability(int cell, int twin, int n) const {
  const int bin = std::clamp(n, 0, meta_.n_max);
  return histogram(cell, twin)[static_cast<std::size_t>(bin)];
}

void Fingerprint::set_histogram(int cell, int twin, std::vector<double> probs) {
  if (static_cast<int>(probs.size()) != bins()) throw ArgumentError("histogram has the wrong bin count");
  auto& rows = cells_.at(static_cast<std::size_t>(cell));
  const auto it = std::lower_bound(rows.twins.begin(), rows.twins.end(), twin);
  const auto row = static_cast<std::size_t>(it - rows.twins.begin());
  const auto offset = static_cast<std::ptrdiff_t>(row * probs.size());
  if (it != rows.twins.end() && *it == twin) {
    std::copy(probs.begin(), probs.end(), rows.probs.begin() + offset);
    return;
  }
  rows.twins.insert(it, twin);
  rows.probs.insert(rows.probs.begin() + offset, probs.begin(), probs.end());
}

void Fingerprint::set_background(std::vector<double> probs) {
  if (static_cast<int>(probs.size()) != bins()) throw ArgumentError("histogram has the wrong bin count");
  background_ = std::move(probs);
}

std::vector<double> smooth_histogram(const std::vector<long>& counts, double alpha) {
  if (alpha < 0.0) throw ArgumentError("smoothing pseudo-count must be non-negative");
  double total = 0.0;
  for (long c : counts) total += static_cast<double>(c) + alpha;
  if (!(total > 0.0)) throw ArgumentError("empty histogram without smoothing");
  std::vector<double> out;
  out.reserve(counts.size());
  for (long c : counts) out.push_back((static_cast<double>(c) + alpha) / total);
  return out;
}

std::map<int, int> jump_counts(const env::IntervalRecord& interval, int n_max) {
  std::map<int, int> out;
  for (const auto& round : interval.rounds) {
    for (int t : round.jumping) {
      int& n = out[t];
      n = std::min(n + 1, n_max);
    }
  }
  return out;
}

namespace {

struct CellCounts {
  std::vector<int> twins;
  std::vector<std::vector<long>> counts;  // parallel to twins
  std::vector<long> background;
};

Vec2 clamp_into(const Vec2& p, const Area& area) {
  return {std::clamp(p.x, 0.0, area.width), std::clamp(p.y, 0.0, area.height)};
}

CellCounts train_cell(int cell, const env::TwinsGrid& grid, const std::map<int, double>& powers,
                      const env::DetectionProfile& profile, const TrainingConfig& config,
                      std::uint64_t seed) {
  const auto& meta = config.meta;
  const std::size_t bins = static_cast<std::size_t>(meta.n_max + 1);
  CellCounts out;
  out.background.assign(bins, 0);

  const Vec2 where = clamp_into(grid.lattice().center(cell), grid.area());
  out.twins = grid.twins_within(where, meta.radius);
  out.counts.assign(out.twins.size(), std::vector<long>(bins, 0));

  std::set<int> readers;
  for (int t : out.twins) readers.insert(grid.twin(t).reader_id);
  if (readers.empty()) return out;
  const std::vector<int> active(readers.begin(), readers.end());

  std::vector<int> observed;  // every twin polled for this cell
  for (int r : active) {
    const auto& tw = grid.twins_of_reader(r);
    observed.insert(observed.end(), tw.begin(), tw.end());
  }

  auto tally = [&](const env::IntervalRecord& rec) {
    const auto n = jump_counts(rec, meta.n_max);
    for (int t : observed) {
      const auto it = n.find(t);
      const std::size_t bin = it == n.end() ? 0 : static_cast<std::size_t>(it->second);
      const auto pos = std::lower_bound(out.twins.begin(), out.twins.end(), t);
      if (pos != out.twins.end() && *pos == t) {
        ++out.counts[static_cast<std::size_t>(pos - out.twins.begin())][bin];
      } else {
        ++out.background[bin];
      }
    }
  };

  const std::uint64_t cell_seed = mix_seed(seed, static_cast<std::uint64_t>(cell));
  scheduler::MpllPoller poller(grid, powers, active);
  if (config.object_speed <= 0.0) {
    const double span = meta.dt * (meta.runs + 1);
    env::Environment environment(grid, profile,
                                 env::MovingObject::stationary(where, span, config.object_height),
                                 config.tau_query, cell_seed);
    for (int k = 0; k < meta.runs; ++k) tally(poller.poll_interval(k, k * meta.dt, meta.dt, environment, nullptr));
    return out;
  }

  Rng headings(mix_seed(cell_seed, 0));
  const double half = 0.5 * config.object_speed * meta.dt;
  for (int k = 0; k < meta.runs; ++k) {
    const double theta = 2.0 * coupling::kPi * headings.uniform();
    const Vec2 u{std::cos(theta), std::sin(theta)};
    const auto walker = env::MovingObject::walk({where - u * half, where + u * half}, config.object_speed,
                                                config.object_height, k * meta.dt);
    env::Environment environment(grid, profile, walker, config.tau_query,
                                 mix_seed(cell_seed, static_cast<std::uint64_t>(k) + 1));
    tally(poller.poll_interval(k, k * meta.dt, meta.dt, environment, nullptr));
  }
  return out;
}

Fingerprint assemble(const std::vector<CellCounts>& per_cell, const TrainingConfig& config) {
  Fingerprint fp(config.meta, static_cast<int>(per_cell.size()));
  std::vector<long> background(static_cast<std::size_t>(config.meta.n_max + 1), 0);
  for (std::size_t c = 0; c < per_cell.size(); ++c) {
    const auto& cc = per_cell[c];
    for (std::size_t i = 0; i < cc.twins.size(); ++i) {
      fp.set_histogram(static_cast<int>(c), cc.twins[i], smooth_histogram(cc.counts[i], config.meta.alpha));
    }
    for (std::size_t b = 0; b < background.size(); ++b) background[b] += cc.background[b];
  }
  fp.set_background(smooth_histogram(background, config.meta.alpha));
  return fp;
}

void check_config(const TrainingConfig& config) {
  if (config.meta.runs < 1) throw ConfigError("training runs per cell must be at least 1");
  if (!(config.meta.dt > 0.0)) throw ConfigError("training interval must be positive");
  if (!(config.meta.radius > 0.0)) throw ConfigError("fingerprint radius must be positive");
  if (config.meta.n_max < 1) throw ConfigError("n_max must be at least 1");
}

}  // namespace

Fingerprint train_offline(const env::TwinsGrid& grid, const std::map<int, double>& powers,
                          const env::DetectionProfile& profile, const TrainingConfig& config,
                          std::uint64_t seed) {
  check_config(config);
  const int cells = grid.lattice().size();
  std::vector<CellCounts> per_cell(static_cast<std::size_t>(cells));
#pragma omp parallel for schedule(dynamic, 8)
  for (int c = 0; c < cells; ++c) {
    per_cell[static_cast<std::size_t>(c)] = train_cell(c, grid, powers, profile, config, seed);
  }
  return assemble(per_cell, config);
}

Fingerprint train_offline_serial(const env::TwinsGrid& grid, const std::map<int, double>& powers,
                                 const env::DetectionProfile& profile,
                                 const TrainingConfig& config, std::uint64_t seed) {
  check_config(config);
  const int cells = grid.lattice().size();
  std::vector<CellCounts> per_cell;
  per_cell.reserve(static_cast<std::size_t>(cells));
  for (int c = 0; c < cells; ++c) per_cell.push_back(train_cell(c, grid, powers, profile, config, seed));
  return assemble(per_cell, config);
}

}  // namespace twins::tracker
