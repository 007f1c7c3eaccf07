#pragma once

// Virtual warehouse: Twin-pair lattice, readers, a moving object and the
// stochastic state-jumping response of each Twin pair.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twins/coupling.hpp"
#include "twins/geometry.hpp"
#include "twins/rng.hpp"

namespace twins::env {

inline constexpr double kDegree = coupling::kPi / 180.0;

struct ReaderRecord {
  int id = 0;
  Vec2 position;
  double facing_rad = 0.0;           // boresight direction
  double half_angle_rad = 35.0 * kDegree;
  double min_power_dbm = coupling::PowerGrid::kMin;
  double max_power_dbm = coupling::PowerGrid::kMax;

  Vec2 boresight() const;
  bool covers(const Vec2& p) const;
};

struct TwinRecord {
  int id = 0;
  Vec2 position;
  double mount_height = 0.75;
  int reader_id = 0;
  coupling::TwinGeometry geometry;
  double reader_distance = 0.0;
  std::optional<coupling::PowerWindow> window;  // at reader_distance
};

/// Regular square lattice anchored at the origin; cell ids are row-major.
class Lattice {
 public:
  Lattice() = default;
  Lattice(double edge, int nx, int ny);

  double edge() const { return edge_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return nx_ * ny_; }

  int id(int ix, int iy) const { return iy * nx_ + ix; }
  int ix(int cell) const { return cell % nx_; }
  int iy(int cell) const { return cell / nx_; }
  bool valid(int cell) const { return cell >= 0 && cell < size(); }

  /// -1 when p lies outside the lattice.
  int cell_of(const Vec2& p) const;
  Vec2 center(int cell) const;
  /// 4-connected neighbours in fixed order: -x, +x, -y, +y.
  std::vector<int> neighbors(int cell) const;
  bool adjacent(int a, int b) const;

 private:
  double edge_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
};

struct TwinSpec {
  Vec2 position;
  double mount_height = 0.75;
  std::optional<int> reader;  // nearest covering reader when absent
};

struct GridConfig {
  Area area;
  double cell_edge = 0.6;
  std::vector<TwinSpec> twins;
  std::vector<ReaderRecord> readers;
  coupling::TwinGeometry geometry{coupling::TagGeometry::reference(), 0.010};
  coupling::ExcitationModel excitation;
};

class TwinsGrid {
 public:
  const Area& area() const { return area_; }
  const Lattice& lattice() const { return lattice_; }
  const coupling::ExcitationModel& excitation() const { return excitation_; }

  std::span<const TwinRecord> twins() const { return twins_; }
  std::span<const ReaderRecord> readers() const { return readers_; }
  const TwinRecord& twin(int id) const;
  const ReaderRecord& reader(int id) const { return readers_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return twins_.size(); }

  int cell_of_twin(int id) const { return twin_cell_.at(static_cast<std::size_t>(id)); }
  const std::vector<int>& twins_in_cell(int cell) const { return cell_twins_.at(static_cast<std::size_t>(cell)); }
  /// Twins in 4-adjacent cells, ascending id.
  const std::vector<int>& twin_neighbors(int id) const { return neighbors_.at(static_cast<std::size_t>(id)); }
  const std::vector<int>& twins_of_reader(int reader) const { return reader_twins_.at(static_cast<std::size_t>(reader)); }

  /// Twins whose position lies within `radius` of p, ascending id.
  std::vector<int> twins_within(const Vec2& p, double radius) const;

 private:
  friend TwinsGrid build_grid(const GridConfig& config);

  Area area_;
  Lattice lattice_;
  coupling::ExcitationModel excitation_;
  std::vector<TwinRecord> twins_;
  std::vector<ReaderRecord> readers_;
  std::vector<int> twin_cell_;
  std::vector<std::vector<int>> cell_twins_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> reader_twins_;
};

/// Deterministic for identical configs. Throws ConfigError on overlapping
/// twins, twins outside the area, or twins outside every reader lobe.
TwinsGrid build_grid(const GridConfig& config);

struct Waypoint {
  Vec2 position;
  double t = 0.0;
};

class MovingObject {
 public:
  MovingObject(std::vector<Waypoint> waypoints, double height, double max_speed);

  /// Constant-speed walk through `path` starting at t0.
  static MovingObject walk(const std::vector<Vec2>& path, double speed, double height,
                           double t0 = 0.0);
  static MovingObject stationary(Vec2 p, double t_end, double height);

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  double height() const { return height_; }
  double max_speed() const { return max_speed_; }
  double t_begin() const { return waypoints_.front().t; }
  double t_end() const { return waypoints_.back().t; }
  bool present(double t) const { return t >= t_begin() && t <= t_end(); }

 private:
  std::vector<Waypoint> waypoints_;
  double height_;
  double max_speed_;
};

/// Piecewise-linear interpolation; throws ArgumentError outside the span.
Vec2 object_position(const MovingObject& obj, double t);

struct CurvePoint {
  double x;
  double y;
};

/// Piecewise linear, clamped beyond the end points.
double interpolate(const std::vector<CurvePoint>& curve, double x);

struct DetectionProfile {
  double p_front = 0.95;
  double p_behind = 0.5;
  double p_false = 2.0e-5;
  double front_length = 2.0;
  double front_width = 1.0;
  double behind_range = 1.0;
  double reference_height = 1.70;
  std::vector<CurvePoint> height_curve{{1.60, 0.85}, {1.70, 0.92}, {1.80, 0.97}};
  std::vector<CurvePoint> mount_curve{{0.50, 0.80}, {0.75, 1.00}, {1.00, 0.80}};

  void validate() const;
  /// Object-height multiplier, normalized to the reference height.
  double height_multiplier(double object_height) const;
  double mount_multiplier(double mount_height) const;
};

enum class Region { Front, Behind, Outside };

const char* region_name(Region r);

Region in_effective_region(const TwinRecord& twin, const ReaderRecord& reader, const Vec2& obj,
                           const DetectionProfile& profile);

/// Per-query jump probability for an object in `region`.
double jump_probability(Region region, const DetectionProfile& profile, double object_height,
                        double mount_height);

enum class EventKind { Jump, Restore };
const char* event_kind_name(EventKind k);

struct StateJumpEvent {
  double t = 0.0;
  int twin_id = 0;
  EventKind kind = EventKind::Jump;
};

enum class QueryOutcome { Jumping, Quiescent, NotInCriticalState };
const char* outcome_name(QueryOutcome o);

struct QueryRecord {
  double t = 0.0;
  int reader = 0;
  int twin = 0;
  double p_tx = 0.0;
  QueryOutcome outcome = QueryOutcome::Quiescent;
  int interval = 0;
  int round = 0;
};

struct RoundRecord {
  int reader = 0;
  int round = 0;  // within the interval
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<int> jumping;  // detection order
};

struct IntervalRecord {
  int index = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
  bool spill = false;
  std::vector<RoundRecord> rounds;

  /// J: union of the per-round jump sets, ascending id.
  std::vector<int> jump_set() const;
};

struct TruthSample {
  double t = 0.0;
  Vec2 position;
};

/// Owns the per-twin state machine and the generator. Each query consumes
/// exactly one uniform draw.
class Environment {
 public:
  Environment(const TwinsGrid& grid, DetectionProfile profile,
              std::optional<MovingObject> object, double tau_query, std::uint64_t seed);

  const TwinsGrid& grid() const { return *grid_; }
  const DetectionProfile& profile() const { return profile_; }
  const std::optional<MovingObject>& object() const { return object_; }
  double tau_query() const { return tau_query_; }

  std::optional<Vec2> object_at(double t) const;

  /// Interrogates one twin at p_tx over [t, t + tau_query). Throws
  /// ArgumentError for unknown twins or powers outside the reader range, and
  /// std::logic_error if the reader is still busy with another query.
  QueryOutcome query(int twin_id, double p_tx, double t);

  const std::vector<StateJumpEvent>& events() const { return events_; }
  /// Stable time order across readers; call once a batch of readers has run.
  void sort_events();
  bool jumped(int twin_id) const { return jumped_.at(static_cast<std::size_t>(twin_id)) != 0; }
  void reset_states();

 private:
  const TwinsGrid* grid_;
  DetectionProfile profile_;
  std::optional<MovingObject> object_;
  double tau_query_;
  Rng rng_;
  std::vector<char> jumped_;
  std::vector<double> reader_busy_until_;
  std::vector<StateJumpEvent> events_;
  std::size_t sorted_prefix_ = 0;
};

/// Strategy that decides what each reader interrogates within one interval.
class Poller {
 public:
  virtual ~Poller() = default;
  virtual IntervalRecord poll_interval(int index, double t_begin, double dt, Environment& env,
                                       std::vector<QueryRecord>* trace) = 0;
};

struct ScenarioRun {
  std::vector<StateJumpEvent> events;
  std::vector<TruthSample> truth;
  std::vector<QueryRecord> trace;
  std::vector<IntervalRecord> intervals;
};

/// Main simulation loop. Intervals start on the dt grid; ground truth is
/// sampled every truth_tick while the object is present.
ScenarioRun run_scenario(const TwinsGrid& grid, const DetectionProfile& profile,
                         const std::optional<MovingObject>& object, Poller& poller,
                         double duration, double dt, double tau_query, std::uint64_t seed,
                         double truth_tick = 0.1);

}  // namespace twins::env
