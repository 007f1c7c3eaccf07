#pragma once

// Scenario files: versioned JSON describing the warehouse, the physics knobs,
// the walker and the tracker. Parse and validation errors carry line numbers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "twins/env.hpp"
#include "twins/fingerprint.hpp"
#include "twins/tracker.hpp"

namespace twins::scenario {

inline constexpr int kSchemaVersion = 1;

struct Timing {
  double dt = 1.0;
  double tau_query = 0.02;
  std::optional<double> duration;  // defaults to the end of the walk
  double truth_tick = 0.1;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  std::string hash;  // FNV-1a 64 of the canonical JSON, 16 hex digits

  env::GridConfig grid;
  bool calibrate = true;
  coupling::CalibrationTargets targets;
  env::DetectionProfile detection;
  std::optional<env::MovingObject> object;
  Timing timing;
  tracker::TrackerConfig tracker;
  tracker::TrainingConfig training;
  int trials = 20;

  double duration() const;
};

/// `source` names the input in error messages.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Line of the value at a JSON pointer ("/readers/3/x"), or 0 if not found.
/// Only meaningful for text that already parsed.
int line_of(const std::string& text, const std::string& pointer);

}  // namespace twins::scenario
