#include "twins/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "twins/error.hpp"

namespace twins::env {

namespace {

constexpr double kTimeEps = 1e-9;

}  // namespace

Vec2 ReaderRecord::boresight() const { return {std::cos(facing_rad), std::sin(facing_rad)}; }

bool ReaderRecord::covers(const Vec2& p) const {
  const Vec2 d = p - position;
  const double len = d.norm();
  if (len <= 0.0) return false;
  const double cos_angle = d.dot(boresight()) / len;
  return cos_angle >= std::cos(half_angle_rad) - 1e-12;
}

Lattice::Lattice(double edge, int nx, int ny) : edge_(edge), nx_(nx), ny_(ny) {
  if (!(edge > 0.0) || nx <= 0 || ny <= 0) throw ArgumentError("lattice needs a positive edge and size");
}

int Lattice::cell_of(const Vec2& p) const {
  if (p.x < 0.0 || p.y < 0.0) return -1;
  const int ix = static_cast<int>(std::floor(p.x / edge_));
  const int iy = static_cast<int>(std::floor(p.y / edge_));
  // Points on the far boundary belong to the last cell.
  const int cx = ix == nx_ && p.x <= nx_ * edge_ + 1e-9 ? nx_ - 1 : ix;
  const int cy = iy == ny_ && p.y <= ny_ * edge_ + 1e-9 ? ny_ - 1 : iy;
  if (cx < 0 || cx >= nx_ || cy < 0 || cy >= ny_) return -1;
  return id(cx, cy);
}

Vec2 Lattice::center(int cell) const {
  return {(ix(cell) + 0.5) * edge_, (iy(cell) + 0.5) * edge_};
}

std::vector<int> Lattice::neighbors(int cell) const {
  std::vector<int> out;
  out.reserve(4);
  const int x = ix(cell);
  const int y = iy(cell);
  if (x > 0) out.push_back(id(x - 1, y));
  if (x + 1 < nx_) out.push_back(id(x + 1, y));
  if (y > 0) out.push_back(id(x, y - 1));
  if (y + 1 < ny_) out.push_back(id(x, y + 1));
  return out;
}

bool Lattice::adjacent(int a, int b) const {
  return std::abs(ix(a) - ix(b)) + std::abs(iy(a) - iy(b)) == 1;
}

const TwinRecord& TwinsGrid::twin(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= twins_.size()) {
    throw ArgumentError("unknown twin id " + std::to_string(id));
  }
  return twins_[static_cast<std::size_t>(id)];
}

std::vector<int> TwinsGrid::twins_within(const Vec2& p, double radius) const {
  std::vector<int> out;
  const double edge = lattice_.edge();
  const int reach = static_cast<int>(std::ceil(radius / edge)) + 1;
  const int cx = static_cast<int>(std::floor(p.x / edge));
  const int cy = static_cast<int>(std::floor(p.y / edge));
  for (int y = std::max(0, cy - reach); y <= std::min(lattice_.ny() - 1, cy + reach); ++y) {
    for (int x = std::max(0, cx - reach); x <= std::min(lattice_.nx() - 1, cx + reach); ++x) {
      for (int t : cell_twins_[static_cast<std::size_t>(lattice_.id(x, y))]) {
        if (distance(twins_[static_cast<std::size_t>(t)].position, p) <= radius) out.push_back(t);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

TwinsGrid build_grid(const GridConfig& config) {
  if (!(config.area.width > 0.0) || !(config.area.height > 0.0)) {
    throw ConfigError("area dimensions must be positive");
  }
  if (!(config.cell_edge > 0.0)) throw ConfigError("cell edge must be positive");
  if (config.readers.empty()) throw ConfigError("at least one reader is required");
  config.excitation.validate();

  TwinsGrid grid;
  grid.area_ = config.area;
  grid.excitation_ = config.excitation;
  const int nx = static_cast<int>(std::ceil(config.area.width / config.cell_edge - 1e-9));
  const int ny = static_cast<int>(std::ceil(config.area.height / config.cell_edge - 1e-9));
  grid.lattice_ = Lattice(config.cell_edge, nx, ny);

  grid.readers_ = config.readers;
  for (std::size_t i = 0; i < grid.readers_.size(); ++i) grid.readers_[i].id = static_cast<int>(i);

  std::vector<std::string> problems;
  for (std::size_t i = 0; i < config.twins.size(); ++i) {
    const auto& spec = config.twins[i];
    if (!config.area.contains(spec.position)) {
      problems.push_back("twin " + std::to_string(i) + " lies outside the area");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (distance(config.twins[j].position, spec.position) < 1e-9) {
        problems.push_back("twins " + std::to_string(j) + " and " + std::to_string(i) +
                           " overlap");
      }
    }
  }
  if (!problems.empty()) {
    std::ostringstream msg;
    for (std::size_t i = 0; i < problems.size(); ++i) msg << (i ? "; " : "") << problems[i];
    throw ConfigError(msg.str());
  }

  std::vector<int> uncovered;
  for (std::size_t i = 0; i < config.twins.size(); ++i) {
    const auto& spec = config.twins[i];
    int reader = -1;
    if (spec.reader) {
      if (*spec.reader < 0 || static_cast<std::size_t>(*spec.reader) >= grid.readers_.size()) {
        throw ConfigError("twin " + std::to_string(i) + " references unknown reader " +
                          std::to_string(*spec.reader));
      }
      if (grid.readers_[static_cast<std::size_t>(*spec.reader)].covers(spec.position)) reader = *spec.reader;
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : grid.readers_) {
        const double d = distance(r.position, spec.position);
        if (r.covers(spec.position) && d < best) {
          best = d;
          reader = r.id;
        }
      }
    }
    if (reader < 0) {
      uncovered.push_back(static_cast<int>(i));
      continue;
    }
    const auto& r = grid.readers_[static_cast<std::size_t>(reader)];
    const double d = distance(r.position, spec.position);
    TwinRecord rec{static_cast<int>(i), spec.position, spec.mount_height, reader, config.geometry, d,
                   coupling::critical_window(config.geometry, config.excitation, d)};
    grid.twins_.push_back(rec);
  }
  if (!uncovered.empty()) {
    std::ostringstream msg;
    msg << "twins outside every reader lobe:";
    for (int t : uncovered) msg << ' ' << t;
    throw ConfigError(msg.str());
  }

  grid.cell_twins_.assign(static_cast<std::size_t>(grid.lattice_.size()), {});
  grid.reader_twins_.assign(grid.readers_.size(), {});
  for (const auto& t : grid.twins_) {
    const int cell = grid.lattice_.cell_of(t.position);
    grid.twin_cell_.push_back(cell);
    grid.cell_twins_[static_cast<std::size_t>(cell)].push_back(t.id);
    grid.reader_twins_[static_cast<std::size_t>(t.reader_id)].push_back(t.id);
  }
  for (const auto& t : grid.twins_) {
    std::vector<int> nb;
    for (int c : grid.lattice_.neighbors(grid.twin_cell_[static_cast<std::size_t>(t.id)])) {
      const auto& in_cell = grid.cell_twins_[static_cast<std::size_t>(c)];
      nb.insert(nb.end(), in_cell.begin(), in_cell.end());
    }
    std::sort(nb.begin(), nb.end());
    grid.neighbors_.push_back(std::move(nb));
  }
  return grid;
}

MovingObject::MovingObject(std::vector<Waypoint> waypoints, double height, double max_speed)
    : waypoints_(std::move(waypoints)), height_(height), max_speed_(max_speed) {
  if (waypoints_.empty()) throw ArgumentError("trajectory needs at least one waypoint");
  if (!(height_ > 0.0)) throw ArgumentError("object height must be positive");
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    const double dt = waypoints_[i].t - waypoints_[i - 1].t;
    if (!(dt > 0.0)) throw ArgumentError("waypoint times must be strictly increasing");
    const double v = distance(waypoints_[i].position, waypoints_[i - 1].position) / dt;
    if (v > max_speed_ * (1.0 + 1e-9)) {
      throw ArgumentError("leg " + std::to_string(i) + " exceeds the maximum speed");
    }
  }
}

MovingObject MovingObject::walk(const std::vector<Vec2>& path, double speed, double height,
                                double t0) {
  if (!(speed > 0.0)) throw ArgumentError("walking speed must be positive");
  std::vector<Waypoint> wps;
  double t = t0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0) {
      const double leg = distance(path[i], path[i - 1]);
      if (leg <= 0.0) continue;
      t += leg / speed;
    }
    wps.push_back({path[i], t});
  }
  return MovingObject(std::move(wps), height, speed);
}

MovingObject MovingObject::stationary(Vec2 p, double t_end, double height) {
  if (!(t_end > 0.0)) throw ArgumentError("stationary object needs a positive duration");
  return MovingObject({{p, 0.0}, {p, t_end}}, height, 0.0);
}

Vec2 object_position(const MovingObject& obj, double t) {
  const auto& w = obj.waypoints();
  if (t < w.front().t - kTimeEps || t > w.back().t + kTimeEps) {
    throw ArgumentError("time outside the trajectory span");
  }
  if (t <= w.front().t) return w.front().position;
  if (t >= w.back().t) return w.back().position;
  auto it = std::upper_bound(w.begin(), w.end(), t,
                             [](double v, const Waypoint& wp) { return v < wp.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  if (t == a.t) return a.position;
  const double s = (t - a.t) / (b.t - a.t);
  return a.position + (b.position - a.position) * s;
}

double interpolate(const std::vector<CurvePoint>& curve, double x) {
  if (curve.empty()) return 1.0;
  if (x <= curve.front().x) return curve.front().y;
  if (x >= curve.back().x) return curve.back().y;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (x <= curve[i].x) {
      const auto& a = curve[i - 1];
      const auto& b = curve[i];
      return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
    }
  }
  return curve.back().y;
}

void DetectionProfile::validate() const {
  for (double p : {p_front, p_behind, p_false}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("detection probabilities must lie in [0, 1]");
  }
  if (!(front_length > 0.0 && front_width > 0.0 && behind_range > 0.0)) {
    throw ConfigError("detection region extents must be positive");
  }
  if (!(reference_height > 0.0)) throw ConfigError("reference height must be positive");
  for (const auto* c : {&height_curve, &mount_curve}) {
    for (std::size_t i = 1; i < c->size(); ++i) {
      if (!((*c)[i].x > (*c)[i - 1].x)) throw ConfigError("curve abscissae must increase");
    }
    for (const auto& p : *c) {
      if (!(p.y >= 0.0)) throw ConfigError("curve multipliers must be non-negative");
    }
  }
}

double DetectionProfile::height_multiplier(double object_height) const {
  const double ref = interpolate(height_curve, reference_height);
  if (ref <= 0.0) return 0.0;
  return interpolate(height_curve, object_height) / ref;
}

double DetectionProfile::mount_multiplier(double mount_height) const {
  return interpolate(mount_curve, mount_height);
}

const char* region_name(Region r) {
  switch (r) {
    case Region::Front:
      return "front";
    case Region::Behind:
      return "behind";
    default:
      return "outside";
  }
}

Region in_effective_region(const TwinRecord& twin, const ReaderRecord& reader, const Vec2& obj,
                           const DetectionProfile& profile) {
  const Vec2 axis = reader.position - twin.position;
  const double d = axis.norm();
  if (d <= 0.0) return Region::Outside;
  const Vec2 u = axis * (1.0 / d);
  const Vec2 rel = obj - twin.position;
  const double along = rel.dot(u);
  const double lateral = std::abs(rel.x * u.y - rel.y * u.x);
  if (along >= 0.0 && along <= std::min(profile.front_length, d) &&
      lateral <= 0.5 * profile.front_width) {
    return Region::Front;
  }
  if (along < 0.0 && rel.norm() < profile.behind_range) return Region::Behind;
  return Region::Outside;
}

double jump_probability(Region region, const DetectionProfile& profile, double object_height,
                        double mount_height) {
  if (region == Region::Outside) return profile.p_false;
  const double base = region == Region::Front ? profile.p_front : profile.p_behind;
  const double p =
      base * profile.height_multiplier(object_height) * profile.mount_multiplier(mount_height);
  return std::clamp(p, 0.0, 1.0);
}

const char* event_kind_name(EventKind k) { return k == EventKind::Jump ? "jump" : "restore"; }

const char* outcome_name(QueryOutcome o) {
  switch (o) {
    case QueryOutcome::Jumping:
      return "jumping";
    case QueryOutcome::Quiescent:
      return "quiescent";
    default:
      return "not_in_critical_state";
  }
}

std::vector<int> IntervalRecord::jump_set() const {
  std::vector<int> out;
  for (const auto& r : rounds) out.insert(out.end(), r.jumping.begin(), r.jumping.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Environment::Environment(const TwinsGrid& grid, DetectionProfile profile,
                         std::optional<MovingObject> object, double tau_query, std::uint64_t seed)
    : grid_(&grid),
      profile_(std::move(profile)),
      object_(std::move(object)),
      tau_query_(tau_query),
      rng_(seed),
      jumped_(grid.size(), 0),
      reader_busy_until_(grid.readers().size(), -std::numeric_limits<double>::infinity()) {
  profile_.validate();
  if (!(tau_query_ > 0.0)) throw ConfigError("tau_query must be positive");
}

std::optional<Vec2> Environment::object_at(double t) const {
  if (!object_ || !object_->present(t)) return std::nullopt;
  return object_position(*object_, t);
}

QueryOutcome Environment::query(int twin_id, double p_tx, double t) {
  const TwinRecord& twin = grid_->twin(twin_id);
  const ReaderRecord& reader = grid_->reader(twin.reader_id);
  if (p_tx < reader.min_power_dbm - 1e-9 || p_tx > reader.max_power_dbm + 1e-9) {
    throw ArgumentError("transmit power outside the reader range");
  }
  double& busy = reader_busy_until_[static_cast<std::size_t>(twin.reader_id)];
  if (t < busy - kTimeEps) {
    throw std::logic_error("reader " + std::to_string(twin.reader_id) +
                           " interrogated two twins at once");
  }
  busy = t + tau_query_;

  const double u = rng_.uniform();
  if (!twin.window || p_tx < twin.window->lower || p_tx >= twin.window->upper) {
    return QueryOutcome::NotInCriticalState;
  }

  const auto pos = object_at(t);
  const Region region =
      pos ? in_effective_region(twin, reader, *pos, profile_) : Region::Outside;
  const double p = pos ? jump_probability(region, profile_, object_->height(), twin.mount_height)
                       : profile_.p_false;
  const bool readable = u < p;

  char& state = jumped_[static_cast<std::size_t>(twin_id)];
  if (state && region == Region::Outside) {
    events_.push_back({t, twin_id, EventKind::Restore});
    state = 0;
  }
  if (readable && !state) {
    events_.push_back({t, twin_id, EventKind::Jump});
    state = 1;
  }
  return readable ? QueryOutcome::Jumping : QueryOutcome::Quiescent;
}

void Environment::sort_events() {
  std::stable_sort(events_.begin() + static_cast<std::ptrdiff_t>(sorted_prefix_), events_.end(),
                   [](const StateJumpEvent& a, const StateJumpEvent& b) { return a.t < b.t; });
  sorted_prefix_ = events_.size();
}

void Environment::reset_states() {
  std::fill(jumped_.begin(), jumped_.end(), 0);
  std::fill(reader_busy_until_.begin(), reader_busy_until_.end(),
            -std::numeric_limits<double>::infinity());
}

ScenarioRun run_scenario(const TwinsGrid& grid, const DetectionProfile& profile,
                         const std::optional<MovingObject>& object, Poller& poller,
                         double duration, double dt, double tau_query, std::uint64_t seed,
                         double truth_tick) {
  if (duration < 0.0) throw ConfigError("duration must be non-negative");
  if (!(dt > 0.0)) throw ConfigError("interval length must be positive");
  if (!(truth_tick > 0.0)) throw ConfigError("truth tick must be positive");
  Environment env(grid, profile, object, tau_query, seed);
  ScenarioRun run;
  const int intervals = static_cast<int>(std::ceil(duration / dt - 1e-9));
  for (int k = 0; k < intervals; ++k) {
    run.intervals.push_back(poller.poll_interval(k, k * dt, dt, env, &run.trace));
    env.sort_events();
  }
  run.events = env.events();
  if (object && duration > 0.0) {
    const long samples = static_cast<long>(std::floor(duration / truth_tick + 1e-9));
    for (long i = 0; i <= samples; ++i) {
      const double t = static_cast<double>(i) * truth_tick;
      if (object->present(t)) run.truth.push_back({t, object_position(*object, t)});
    }
  }
  return run;
}

}  // namespace twins::env
