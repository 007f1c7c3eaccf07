#include "twins/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "twins/error.hpp"

namespace twins::scenario {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

int line_of(const std::string& text, const std::string& pointer) {
  struct Frame {
    bool object;
    std::string key;
    int index = 0;
    bool expect_key = false;
  };
  std::vector<Frame> stack;
  auto current = [&] {
    std::string p;
    for (const auto& f : stack) p += "/" + (f.object ? escape_token(f.key) : std::to_string(f.index));
    return p;
  };
  int line = 1;
  std::size_t i = 0;
  auto skip_string = [&] {
    std::string s;
    for (++i; i < text.size() && text[i] != '"'; ++i) {
      if (text[i] == '\\' && i + 1 < text.size()) {
        s += text[++i];
        continue;
      }
      if (text[i] == '\n') ++line;
      s += text[i];
    }
    return s;
  };
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == ':') continue;
    if (!stack.empty() && stack.back().object && stack.back().expect_key) {
      if (c == '"') {
        stack.back().key = skip_string();
        stack.back().expect_key = false;
      } else if (c == '}') {
        stack.pop_back();
      }
      continue;
    }
    if (c == ',') {
      if (stack.back().object) {
        stack.back().expect_key = true;
      } else {
        ++stack.back().index;
      }
      continue;
    }
    if (c == '}' || c == ']') {
      stack.pop_back();
      continue;
    }
    if (current() == pointer) return line;
    if (c == '{') {
      stack.push_back({true, "", 0, true});
    } else if (c == '[') {
      stack.push_back({false, "", 0, false});
    } else if (c == '"') {
      skip_string();
    } else {
      while (i + 1 < text.size() && std::string(",]} \t\r\n").find(text[i + 1]) == std::string::npos) ++i;
    }
  }
  return 0;
}

namespace {

struct Context {
  const std::string* text;
  std::string source;
};

// A JSON value plus its pointer, so every complaint can name a line.
class Node {
 public:
  Node(const json& j, std::string pointer, const Context& ctx)
      : j_(&j), pointer_(std::move(pointer)), ctx_(&ctx) {}

  [[noreturn]] void fail(const std::string& msg, const std::string& key = "") const {
    const std::string p = key.empty() ? pointer_ : pointer_ + "/" + escape_token(key);
    int line = line_of(*ctx_->text, p);
    if (line == 0) line = line_of(*ctx_->text, pointer_);
    throw ConfigError((p.empty() ? std::string("/") : p) + ": " + msg, line, ctx_->source);
  }

  const json& raw() const { return *j_; }
  const std::string& pointer() const { return pointer_; }

  void expect_object() const {
    if (!j_->is_object()) fail("expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    expect_object();
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_->items()) {
      if (!ok.count(k)) fail("unknown key \"" + k + "\"", k);
    }
  }

  bool has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

  std::optional<Node> child(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return Node((*j_)[key], pointer_ + "/" + escape_token(key), *ctx_);
  }

  Node item(std::size_t index) const {
    return Node((*j_)[index], pointer_ + "/" + std::to_string(index), *ctx_);
  }

  std::size_t size() const { return j_->size(); }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return child(key)->number();
  }

  double positive(const std::string& key, double fallback) const {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail("must be positive", key);
    return v;
  }

  double non_negative(const std::string& key, double fallback) const {
    const double v = number(key, fallback);
    if (v < 0.0) fail("must be non-negative", key);
    return v;
  }

  std::optional<double> optional_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return child(key)->number();
  }

  long integer(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const json& v = (*j_)[key];
    if (!v.is_number_integer()) fail("expected an integer", key);
    return v.get<long>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = (*j_)[key];
    if (!v.is_boolean()) fail("expected true or false", key);
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = (*j_)[key];
    if (!v.is_string()) fail("expected a string", key);
    return v.get<std::string>();
  }

  Node array(const std::string& key) const {
    auto c = child(key);
    if (!c) fail("missing required key \"" + key + "\"");
    if (!c->raw().is_array()) c->fail("expected an array");
    return *c;
  }

  Vec2 vec2() const {
    if (!j_->is_array() || j_->size() != 2) fail("expected [x, y]");
    return {item(0).number(), item(1).number()};
  }

  Vec2 vec2(const std::string& key, Vec2 fallback) const {
    if (!has(key)) return fallback;
    return child(key)->vec2();
  }

 private:
  const json* j_;
  std::string pointer_;
  const Context* ctx_;
};

std::vector<env::CurvePoint> parse_curve(const Node& n) {
  if (!n.raw().is_array() || n.size() < 1) n.fail("expected a non-empty array of [x, y] pairs");
  std::vector<env::CurvePoint> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const Vec2 p = n.item(i).vec2();
    if (i > 0 && !(p.x > out.back().x)) n.item(i).fail("abscissae must increase");
    if (p.y < 0.0) n.item(i).fail("multiplier must be non-negative");
    out.push_back({p.x, p.y});
  }
  return out;
}

coupling::TagGeometry parse_tag(const std::optional<Node>& n) {
  const auto ref = coupling::TagGeometry::reference();
  if (!n) return ref;
  n->allow({"loop_width", "loop_length", "line_gap", "dipole_length", "frequency"});
  const double f = n->positive("frequency", ref.frequency());
  const double a = n->positive("loop_width", ref.loop_width());
  const double b = n->positive("loop_length", ref.loop_length());
  const double r = n->positive("line_gap", ref.line_gap());
  const double len = n->positive("dipole_length", coupling::wavelength(f) / 2.0);
  if (r > b) n->fail("line_gap must not exceed loop_length", "line_gap");
  return coupling::TagGeometry(a, b, r, len, f);
}

void parse_shelves(const Node& n, env::GridConfig& grid) {
  n.allow({"count", "first_y", "pitch", "x_start", "x_end", "spacing", "twins_per_reader",
           "reader_offset", "mount_height", "half_angle_deg"});
  const long count = n.integer("count", 1);
  if (count < 1) n.fail("must be at least 1", "count");
  const double first_y = n.number("first_y", 0.3);
  const double pitch = n.positive("pitch", 2.0);
  const double x_start = n.number("x_start", 0.3);
  const double x_end = n.number("x_end", x_start);
  const double spacing = n.positive("spacing", 0.6);
  const long per_reader = n.integer("twins_per_reader", 5);
  if (per_reader < 1) n.fail("must be at least 1", "twins_per_reader");
  const double offset = n.number("reader_offset", 2.0);
  if (offset == 0.0) n.fail("must be non-zero", "reader_offset");
  const double mount = n.positive("mount_height", 0.75);
  const double half_angle = n.positive("half_angle_deg", 35.0);
  if (x_end < x_start) n.fail("must not be below x_start", "x_end");
  const long per_shelf = std::lround(std::floor((x_end - x_start) / spacing + 1e-9)) + 1;

  for (long k = 0; k < count; ++k) {
    const double y = first_y + pitch * static_cast<double>(k);
    for (long g = 0; g < per_shelf; g += per_reader) {
      const long end = std::min(per_shelf, g + per_reader);
      double mean_x = 0.0;
      for (long i = g; i < end; ++i) mean_x += x_start + spacing * static_cast<double>(i);
      mean_x /= static_cast<double>(end - g);
      env::ReaderRecord r;
      r.id = static_cast<int>(grid.readers.size());
      r.position = {mean_x, y + offset};
      r.facing_rad = offset > 0.0 ? -coupling::kPi / 2.0 : coupling::kPi / 2.0;
      r.half_angle_rad = half_angle * env::kDegree;
      grid.readers.push_back(r);
      for (long i = g; i < end; ++i) {
        grid.twins.push_back({{x_start + spacing * static_cast<double>(i), y}, mount, r.id});
      }
    }
  }
}

std::optional<env::MovingObject> parse_object(const Node& n) {
  const std::string kind = n.string("kind", "none");
  if (kind == "none") {
    n.allow({"kind"});
    return std::nullopt;
  }
  const double height = n.positive("height", 1.70);
  try {
    if (kind == "stationary") {
      n.allow({"kind", "height", "position", "until"});
      if (!n.has("position")) n.fail("missing required key \"position\"");
      return env::MovingObject::stationary(n.child("position")->vec2(), n.positive("until", 60.0), height);
    }
    if (kind == "path") {
      n.allow({"kind", "height", "speed", "points", "t0"});
      const Node pts = n.array("points");
      std::vector<Vec2> path;
      for (std::size_t i = 0; i < pts.size(); ++i) path.push_back(pts.item(i).vec2());
      if (path.empty()) pts.fail("needs at least one point");
      return env::MovingObject::walk(path, n.positive("speed", 1.5), height, n.non_negative("t0", 0.0));
    }
    if (kind == "waypoints") {
      n.allow({"kind", "height", "max_speed", "points"});
      const Node pts = n.array("points");
      std::vector<env::Waypoint> wps;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Node p = pts.item(i);
        if (!p.raw().is_array() || p.size() != 3) p.fail("expected [x, y, t]");
        wps.push_back({{p.item(0).number(), p.item(1).number()}, p.item(2).number()});
      }
      if (wps.empty()) pts.fail("needs at least one point");
      return env::MovingObject(std::move(wps), height, n.positive("max_speed", 1.5));
    }
    if (kind == "serpentine") {
      n.allow({"kind", "height", "speed", "start", "lanes", "x_min", "x_max", "t0"});
      const Node lanes = n.array("lanes");
      const Vec2 start = n.vec2("start", {0.0, 0.0});
      const double x_min = n.number("x_min", 0.0);
      const double x_max = n.number("x_max", 1.0);
      if (!(x_max > x_min)) n.fail("must exceed x_min", "x_max");
      std::vector<Vec2> path{start};
      bool rightward = true;
      for (std::size_t i = 0; i < lanes.size(); ++i) {
        const double y = lanes.item(i).number();
        const double x_from = rightward ? x_min : x_max;
        const double x_to = rightward ? x_max : x_min;
        if (i > 0) path.push_back({x_from, y});
        path.push_back({x_to, y});
        rightward = !rightward;
      }
      if (lanes.size() == 0) lanes.fail("needs at least one lane");
      return env::MovingObject::walk(path, n.positive("speed", 1.5), height, n.non_negative("t0", 0.0));
    }
  } catch (const ArgumentError& e) {
    n.fail(e.what());
  }
  n.fail("unknown object kind \"" + kind + "\"", "kind");
}

}  // namespace

double Scenario::duration() const {
  if (timing.duration) return *timing.duration;
  if (object) return object->t_end();
  return 0.0;
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    std::size_t line_start = 0;
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        line_start = i + 1;
      }
    }
    const std::size_t col = upto - line_start + 1;
    std::string what = e.what();
    const auto cut = what.find("syntax error");
    if (cut != std::string::npos) what = what.substr(cut);
    throw ConfigError("column " + std::to_string(col) + ": " + what, line, source);
  }

  const Context ctx{&text, source};
  const Node top(root, "", ctx);
  top.allow({"schema_version", "name", "seed", "area", "cell_edge", "tag", "twin", "excitation",
             "calibration", "shelves", "twins", "readers", "detection", "object", "timing",
             "tracker", "training", "evaluate"});

  Scenario s;
  if (!top.has("schema_version")) top.fail("missing required key \"schema_version\"");
  if (top.integer("schema_version", 0) != kSchemaVersion) {
    top.fail("unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")",
             "schema_version");
  }
  s.name = top.string("name", "unnamed");
  if (!top.has("seed")) top.fail("missing required key \"seed\"");
  {
    const json& seed = root["seed"];
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
      top.fail("seed must be a non-negative integer", "seed");
    }
    s.seed = seed.get<std::uint64_t>();
  }
  s.hash = hex64(fnv1a64(root.dump()));

  // Grid and physics.
  auto& g = s.grid;
  {
    auto area = top.child("area");
    if (!area) top.fail("missing required key \"area\"");
    area->allow({"width", "height"});
    g.area = {area->positive("width", 1.0), area->positive("height", 1.0)};
  }
  g.cell_edge = top.positive("cell_edge", 0.6);

  const auto tag = parse_tag(top.child("tag"));
  double separation = 0.010;
  coupling::Placement placement = coupling::Placement::A;
  if (auto tw = top.child("twin")) {
    tw->allow({"separation", "placement"});
    separation = tw->positive("separation", separation);
    const auto p = coupling::parse_placement(tw->string("placement", "a"));
    if (!p) tw->fail("placement must be one of a-h", "placement");
    placement = *p;
    if (separation < tag.line_gap()) tw->fail("separation must be at least the tag line_gap", "separation");
  }
  g.geometry = coupling::TwinGeometry(tag, separation, placement);

  coupling::ExcitationModel base;
  if (auto ex = top.child("excitation")) {
    ex->allow({"calibrate", "resistance", "threshold_current", "kappa", "reader_gain_dbi",
               "tag_gain_dbi", "loop_loop_current"});
    s.calibrate = ex->boolean("calibrate", true);
    base.resistance = ex->positive("resistance", base.resistance);
    base.threshold_current = ex->positive("threshold_current", base.threshold_current);
    base.kappa = ex->positive("kappa", base.kappa);
    base.reader_gain_dbi = ex->number("reader_gain_dbi", base.reader_gain_dbi);
    base.tag_gain_dbi = ex->number("tag_gain_dbi", base.tag_gain_dbi);
    base.loop_loop_current = ex->non_negative("loop_loop_current", base.loop_loop_current);
  }
  if (auto cal = top.child("calibration")) {
    cal->allow({"separation", "distance", "gap_db", "max_distance", "max_power_dbm"});
    auto& t = s.targets;
    t.separation = cal->positive("separation", t.separation);
    t.distance = cal->positive("distance", t.distance);
    t.gap_db = cal->positive("gap_db", t.gap_db);
    t.max_distance = cal->positive("max_distance", t.max_distance);
    t.max_power_dbm = cal->number("max_power_dbm", t.max_power_dbm);
  }
  if (s.calibrate) {
    try {
      g.excitation = coupling::calibrate_excitation(tag, base, s.targets);
    } catch (const std::exception& e) {
      const Node at = top.child("calibration").value_or(top);
      at.fail(std::string("calibration failed: ") + e.what());
    }
  } else {
    g.excitation = base;
  }

  if (auto sh = top.child("shelves")) parse_shelves(*sh, g);
  const int generated_readers = static_cast<int>(g.readers.size());
  if (top.has("readers")) {
    const Node rs = top.array("readers");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const Node r = rs.item(i);
      r.allow({"x", "y", "facing_deg", "half_angle_deg", "min_power_dbm", "max_power_dbm"});
      env::ReaderRecord rec;
      rec.id = static_cast<int>(g.readers.size());
      rec.position = {r.number("x", 0.0), r.number("y", 0.0)};
      rec.facing_rad = r.number("facing_deg", 0.0) * env::kDegree;
      rec.half_angle_rad = r.positive("half_angle_deg", 35.0) * env::kDegree;
      rec.min_power_dbm = r.number("min_power_dbm", coupling::PowerGrid::kMin);
      rec.max_power_dbm = r.number("max_power_dbm", coupling::PowerGrid::kMax);
      if (!(rec.max_power_dbm > rec.min_power_dbm)) r.fail("max_power_dbm must exceed min_power_dbm");
      g.readers.push_back(rec);
    }
  }
  if (top.has("twins")) {
    const Node ts = top.array("twins");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const Node t = ts.item(i);
      t.allow({"x", "y", "mount_height", "reader"});
      env::TwinSpec spec{{t.number("x", 0.0), t.number("y", 0.0)}, t.positive("mount_height", 0.75), {}};
      if (t.has("reader")) {
        const long r = t.integer("reader", 0);
        if (r < 0 || r >= static_cast<long>(g.readers.size()) - generated_readers) {
          t.fail("unknown reader " + std::to_string(r), "reader");
        }
        spec.reader = static_cast<int>(r) + generated_readers;
      }
      g.twins.push_back(spec);
    }
  }
  if (g.twins.empty()) top.fail("scenario has no twins (give \"shelves\" or \"twins\")");

  // Detection model.
  if (auto d = top.child("detection")) {
    d->allow({"p_front", "p_behind", "p_false", "front_length", "front_width", "behind_range",
              "reference_height", "height_curve", "mount_curve"});
    auto& p = s.detection;
    p.p_front = d->number("p_front", p.p_front);
    p.p_behind = d->number("p_behind", p.p_behind);
    p.p_false = d->number("p_false", p.p_false);
    for (const char* k : {"p_front", "p_behind", "p_false"}) {
      const double v = d->number(k, 0.0);
      if (v < 0.0 || v > 1.0) d->fail("must lie in [0, 1]", k);
    }
    p.front_length = d->positive("front_length", p.front_length);
    p.front_width = d->positive("front_width", p.front_width);
    p.behind_range = d->positive("behind_range", p.behind_range);
    p.reference_height = d->positive("reference_height", p.reference_height);
    if (auto c = d->child("height_curve")) p.height_curve = parse_curve(*c);
    if (auto c = d->child("mount_curve")) p.mount_curve = parse_curve(*c);
  }

  if (auto o = top.child("object")) s.object = parse_object(*o);

  if (auto t = top.child("timing")) {
    t->allow({"dt", "tau_query", "duration", "truth_tick"});
    s.timing.dt = t->positive("dt", s.timing.dt);
    s.timing.tau_query = t->positive("tau_query", s.timing.tau_query);
    s.timing.truth_tick = t->positive("truth_tick", s.timing.truth_tick);
    if (t->has("duration")) s.timing.duration = t->positive("duration", 1.0);
  }
  if (!s.object && !s.timing.duration) top.fail("timing.duration is required when there is no object");

  auto& tr = s.tracker;
  tr.dt = s.timing.dt;
  if (auto t = top.child("tracker")) {
    t->allow({"particles", "sigma_pos", "sigma_vel", "origin", "v0", "spread", "obs_radius",
              "scope", "divergence_ratio"});
    const long n = t->integer("particles", tr.particles);
    if (n < 1) t->fail("must be at least 1", "particles");
    tr.particles = static_cast<int>(n);
    tr.noise.sigma_pos = t->non_negative("sigma_pos", tr.noise.sigma_pos);
    tr.noise.sigma_vel = t->non_negative("sigma_vel", tr.noise.sigma_vel);
    tr.origin = t->vec2("origin", tr.origin);
    tr.v0 = t->vec2("v0", tr.v0);
    tr.spread = t->non_negative("spread", tr.spread);
    tr.obs_radius = t->positive("obs_radius", tr.obs_radius);
    const std::string scope = t->string("scope", "radius");
    if (scope == "radius") {
      tr.scope = tracker::ObservationScope::Radius;
    } else if (scope == "patch3x3") {
      tr.scope = tracker::ObservationScope::Patch3x3;
    } else {
      t->fail("scope must be \"radius\" or \"patch3x3\"", "scope");
    }
    tr.divergence_ratio = t->non_negative("divergence_ratio", tr.divergence_ratio);
    if (tr.divergence_ratio > 1.0) t->fail("must not exceed 1", "divergence_ratio");
  }
  tr.regions = s.detection;

  auto& tc = s.training;
  tc.meta.dt = s.timing.dt;
  tc.tau_query = s.timing.tau_query;
  tc.object_height = s.object ? s.object->height() : s.detection.reference_height;
  if (auto t = top.child("training")) {
    t->allow({"radius", "runs", "n_max", "alpha", "object_speed"});
    tc.object_speed = t->non_negative("object_speed", tc.object_speed);
    tc.meta.radius = t->positive("radius", tc.meta.radius);
    const long runs = t->integer("runs", tc.meta.runs);
    if (runs < 1) t->fail("must be at least 1", "runs");
    tc.meta.runs = static_cast<int>(runs);
    const long n_max = t->integer("n_max", tc.meta.n_max);
    if (n_max < 1) t->fail("must be at least 1", "n_max");
    tc.meta.n_max = static_cast<int>(n_max);
    tc.meta.alpha = t->positive("alpha", tc.meta.alpha);
  }
  if (auto e = top.child("evaluate")) {
    e->allow({"trials"});
    const long trials = e->integer("trials", s.trials);
    if (trials < 1) e->fail("must be at least 1", "trials");
    s.trials = static_cast<int>(trials);
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file", 0, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

}  // namespace twins::scenario
