#pragma once

// Offline phase of tracking: per-cell histograms of jump counts n_i, used as
// the observation likelihood P(n_i | cell).

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "twins/env.hpp"

namespace twins::tracker {

struct FingerprintMeta {
  double dt = 1.0;
  double radius = 2.5;  // twins closer than this to a cell centre get their own histogram
  int runs = 50;
  int n_max = 10;
  double alpha = 1.0;  // Laplace pseudo-count

  bool operator==(const FingerprintMeta&) const = default;
};

/// Twins outside a cell's radius share one background histogram.
class Fingerprint {
 public:
  Fingerprint() = default;
  Fingerprint(FingerprintMeta meta, int cells);

  const FingerprintMeta& meta() const { return meta_; }
  int cells() const { return static_cast<int>(cells_.size()); }
  int bins() const { return meta_.n_max + 1; }

  /// Histogram rows of one cell, ascending twin id.
  const std::vector<int>& twins_of(int cell) const { return cells_.at(static_cast<std::size_t>(cell)).twins; }
  std::span<const double> histogram(int cell, int twin) const;
  std::span<const double> background() const { return background_; }
  bool has(int cell, int twin) const;

  /// P(n | cell) for one twin; n is capped at n_max.
  double probability(int cell, int twin, int n) const;

  void set_histogram(int cell, int twin, std::vector<double> probs);
  void set_background(std::vector<double> probs);

  bool operator==(const Fingerprint&) const = default;

 private:
  struct CellRows {
    std::vector<int> twins;
    std::vector<double> probs;  // twins.size() * bins, row-major
    bool operator==(const CellRows&) const = default;
  };

  FingerprintMeta meta_;
  std::vector<CellRows> cells_;
  std::vector<double> background_;
};

/// Laplace-smoothed, normalized histogram of raw counts.
std::vector<double> smooth_histogram(const std::vector<long>& counts, double alpha);

/// n_i per twin for one interval: the number of rounds in which the twin was
/// in J, capped at n_max. Twins absent from the map have n_i = 0.
std::map<int, int> jump_counts(const env::IntervalRecord& interval, int n_max);

struct TrainingConfig {
  FingerprintMeta meta;
  double tau_query = 0.02;
  double object_height = 1.70;
  // 0: the object stands still at the cell centre. Otherwise every run walks a
  // straight line through the centre at this speed, heading drawn uniformly,
  // passing the centre at mid-interval.
  double object_speed = 0.0;
};

/// Places an object at every cell centre (clamped into the area), polls the
/// readers of nearby twins for `runs` intervals and histograms n_i.
/// Each cell uses its own generator, mix_seed(seed, cell), so the result does
/// not depend on the thread count.
Fingerprint train_offline(const env::TwinsGrid& grid, const std::map<int, double>& powers,
                          const env::DetectionProfile& profile, const TrainingConfig& config,
                          std::uint64_t seed);

/// Single-threaded reference of train_offline; identical output.
Fingerprint train_offline_serial(const env::TwinsGrid& grid, const std::map<int, double>& powers,
                                 const env::DetectionProfile& profile,
                                 const TrainingConfig& config, std::uint64_t seed);

}  // namespace twins::tracker
