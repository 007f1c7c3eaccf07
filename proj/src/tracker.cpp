#include "twins/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "twins/error.hpp"

namespace twins::tracker {

void TrackerConfig::validate() const {
  if (particles < 1) throw ConfigError("tracker needs at least one particle");
  if (!(dt > 0.0)) throw ConfigError("tracker interval must be positive");
  if (noise.sigma_pos < 0.0 || noise.sigma_vel < 0.0) throw ConfigError("motion noise must be non-negative");
  if (spread < 0.0) throw ConfigError("initial spread must be non-negative");
  if (!(obs_radius > 0.0)) throw ConfigError("observation radius must be positive");
  if (divergence_ratio < 0.0 || divergence_ratio > 1.0) {
    throw ConfigError("divergence ratio must lie in [0, 1]");
  }
}

std::vector<int> region_twins(const locate::ActiveRegion& region, const env::TwinsGrid& grid) {
  std::vector<int> out;
  for (int c : region.cells) {
    const auto& in_cell = grid.twins_in_cell(c);
    out.insert(out.end(), in_cell.begin(), in_cell.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ParticleTracker::ParticleTracker(const env::TwinsGrid& grid, const Fingerprint& fp,
                                 TrackerConfig config, std::uint64_t seed)
    : grid_(&grid), fp_(&fp), config_(std::move(config)), rng_(seed) {
  config_.validate();
  if (fp.cells() != grid.lattice().size()) {
    throw ConfigError("fingerprint covers " + std::to_string(fp.cells()) + " cells, grid has " +
                      std::to_string(grid.lattice().size()));
  }
  particles_ = pf_init(config_.particles, config_.origin, config_.v0, config_.spread, rng_);
  for (auto& p : particles_) {
    p.pos.x = std::clamp(p.pos.x, 0.0, grid.area().width);
    p.pos.y = std::clamp(p.pos.y, 0.0, grid.area().height);
  }
}

std::vector<int> ParticleTracker::zone_cells(const locate::ActiveRegion& region) const {
  const auto& lattice = grid_->lattice();
  const double reach = config_.regions.front_length + config_.regions.front_width;
  std::vector<int> out;
  for (int t : region_twins(region, *grid_)) {
    const auto& twin = grid_->twin(t);
    const auto& reader = grid_->reader(twin.reader_id);
    for (int c = 0; c < lattice.size(); ++c) {
      const Vec2 center = lattice.center(c);
      if (distance(center, twin.position) > reach) continue;
      if (env::in_effective_region(twin, reader, center, config_.regions) == env::Region::Front) {
        out.push_back(c);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Each active twin's front rectangle is picked with equal probability, then a
// point uniformly inside it.
void ParticleTracker::reseed(const locate::ActiveRegion& region) {
  const auto twins = region_twins(region, *grid_);
  const double speed = config_.v0.norm();
  const Area& area = grid_->area();
  const double w = 1.0 / static_cast<double>(particles_.size());
  for (auto& p : particles_) {
    const auto pick = std::min(twins.size() - 1,
                               static_cast<std::size_t>(rng_.uniform() * static_cast<double>(twins.size())));
    const auto& twin = grid_->twin(twins[pick]);
    const auto& reader = grid_->reader(twin.reader_id);
    const Vec2 axis_full = reader.position - twin.position;
    const double d = axis_full.norm();
    const Vec2 axis = d > 0.0 ? axis_full * (1.0 / d) : Vec2{1.0, 0.0};
    const Vec2 lateral{-axis.y, axis.x};
    const double along = rng_.uniform() * std::min(config_.regions.front_length, d);
    const double across = (rng_.uniform() - 0.5) * config_.regions.front_width;
    const double heading = rng_.uniform() * 2.0 * coupling::kPi;
    const Vec2 pos = twin.position + axis * along + lateral * across;
    p.pos = {std::clamp(pos.x, 0.0, area.width), std::clamp(pos.y, 0.0, area.height)};
    p.vel = {speed * std::cos(heading), speed * std::sin(heading)};
    p.w = w;
  }
}

TrackStep ParticleTracker::step(int interval, double t, const std::map<int, int>& counts) {
  TrackStep out;
  out.interval = interval;
  out.t = t;

  std::vector<int> jump_set;
  for (const auto& [twin, n] : counts) {
    if (n > 0) jump_set.push_back(twin);
  }
  out.jumping = static_cast<int>(jump_set.size());
  out.coarse = locate::locate(jump_set, *grid_, last_);

  pf_predict(particles_, config_.dt, config_.noise, grid_->area(), rng_);

  const Vec2 center = out.coarse ? out.coarse->centroid : pf_estimate(particles_);
  const Observation v = observe(counts, center, *grid_, config_.obs_radius, config_.scope);
  out.observed = static_cast<int>(v.counts.size());

  const auto& lattice = grid_->lattice();
  const WeightResult wr = pf_weight(particles_, v, *fp_, lattice, config_.parallel);

  bool diverged = wr.degenerate;
  if (out.coarse && !diverged) {
    double best_cell = 0.0;
    for (int c : zone_cells(*out.coarse)) best_cell = std::max(best_cell, cell_likelihood(c, v, *fp_));
    diverged = wr.best_likelihood < config_.divergence_ratio * best_cell;
  }
  if (diverged && out.coarse && !region_twins(*out.coarse, *grid_).empty()) {
    reseed(*out.coarse);
    const WeightResult again = pf_weight(particles_, v, *fp_, lattice, config_.parallel);
    if (again.degenerate) {
      for (auto& p : particles_) p.w = 1.0 / static_cast<double>(particles_.size());
    }
  } else if (wr.degenerate) {
    for (auto& p : particles_) p.w = 1.0 / static_cast<double>(particles_.size());
  }
  out.diverged = diverged;

  pf_resample(particles_, rng_);
  out.estimate = pf_estimate(particles_);
  last_ = out.estimate;
  return out;
}

}  // namespace twins::tracker
