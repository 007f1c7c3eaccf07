#pragma once

// Online phase: per interval, coarse locate -> predict -> weight -> resample
// -> estimate.

#include <cstdint>
#include <map>
#include <optional>

#include "twins/fingerprint.hpp"
#include "twins/locate.hpp"
#include "twins/particle_filter.hpp"

namespace twins::tracker {

struct TrackerConfig {
  int particles = 500;
  MotionNoise noise;
  double dt = 1.0;
  Vec2 origin{0.0, 1.3};
  Vec2 v0{1.5, 0.0};
  double spread = 0.5;
  double obs_radius = 1.5;
  ObservationScope scope = ObservationScope::Radius;
  // Diverged when the best particle explains V this much worse than the best
  // cell in the active region's detection zones.
  double divergence_ratio = 1e-2;
  bool parallel = true;
  env::DetectionProfile regions;  // only the front-region geometry is used

  void validate() const;
};

struct TrackStep {
  int interval = 0;
  double t = 0.0;
  std::optional<locate::ActiveRegion> coarse;
  Vec2 estimate;
  bool diverged = false;
  int observed = 0;  // |V|
  int jumping = 0;   // |J|
};

class ParticleTracker {
 public:
  ParticleTracker(const env::TwinsGrid& grid, const Fingerprint& fp, TrackerConfig config,
                  std::uint64_t seed);

  /// One interval. `counts` holds n_i for the twins that jumped at least once.
  TrackStep step(int interval, double t, const std::map<int, int>& counts);

  const ParticleSet& particles() const { return particles_; }
  const TrackerConfig& config() const { return config_; }

 private:
  std::vector<int> zone_cells(const locate::ActiveRegion& region) const;
  void reseed(const locate::ActiveRegion& region);

  const env::TwinsGrid* grid_;
  const Fingerprint* fp_;
  TrackerConfig config_;
  Rng rng_;
  ParticleSet particles_;
  std::optional<Vec2> last_;
};

/// Twins located in the region's cells, ascending.
std::vector<int> region_twins(const locate::ActiveRegion& region, const env::TwinsGrid& grid);

}  // namespace twins::tracker
