#include <map>

#include "doctest.h"
#include "support.hpp"
#include "twins/error.hpp"
#include "twins/pipeline.hpp"
#include "twins/scheduler.hpp"

using namespace twins;

namespace {

// Query `twin` n times with the object parked at `where`, one query per tau.
long count_jumps(const env::TwinsGrid& grid, const env::DetectionProfile& profile, int twin, Vec2 where,
                 long n, std::uint64_t seed, double height = 1.70) {
  const double tau = 0.02;
  env::Environment e(grid, profile, env::MovingObject::stationary(where, n * tau + 1.0, height), tau, seed);
  const double p_tx = grid.twin(twin).window->grid_midpoint();
  long hits = 0;
  for (long i = 0; i < n; ++i) hits += e.query(twin, p_tx, i * tau) == env::QueryOutcome::Jumping;
  return hits;
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("lattice indexing and boundaries") {
  const env::Lattice l(0.5, 4, 3);
  CHECK(l.size() == 12);
  CHECK(l.cell_of({0.0, 0.0}) == 0);
  CHECK(l.cell_of({1.99, 0.1}) == 3);
  CHECK(l.cell_of({2.0, 1.5}) == l.id(3, 2));  // far corner belongs to the last cell
  CHECK(l.cell_of({-0.01, 0.2}) == -1);
  CHECK(l.cell_of({2.3, 0.2}) == -1);
  CHECK(l.neighbors(l.id(1, 1)) == std::vector<int>{l.id(0, 1), l.id(2, 1), l.id(1, 0), l.id(1, 2)});
  CHECK(l.neighbors(0) == std::vector<int>{1, 4});
  CHECK(l.adjacent(5, 6));
  CHECK_FALSE(l.adjacent(3, 4));
}

TEST_CASE("grid construction rejects bad layouts") {
  env::GridConfig cfg;
  cfg.area = {3.0, 3.0};
  env::ReaderRecord r;
  r.position = {1.5, 5.0};
  r.facing_rad = -0.5 * coupling::kPi;
  cfg.readers.push_back(r);
  cfg.twins.push_back({{1.5, 1.5}, 0.75, {}});

  SUBCASE("valid") { CHECK(env::build_grid(cfg).size() == 1); }
  SUBCASE("outside the area") {
    cfg.twins.push_back({{3.5, 1.0}, 0.75, {}});
    CHECK_THROWS_AS(env::build_grid(cfg), ConfigError);
  }
  SUBCASE("overlapping") {
    cfg.twins.push_back({{1.5, 1.5}, 0.75, {}});
    CHECK_THROWS_AS(env::build_grid(cfg), ConfigError);
  }
  SUBCASE("outside every reader lobe") {
    cfg.readers[0].facing_rad = 0.5 * coupling::kPi;
    CHECK_THROWS_AS(env::build_grid(cfg), ConfigError);
  }
}

TEST_CASE("twin neighbours and radius queries") {
  const auto g = testing::lattice_grid(4, 4);
  CHECK(g.twin_neighbors(0) == std::vector<int>{1, 4});
  CHECK(g.twins_within({0.3, 0.3}, 0.61) == std::vector<int>{0, 1, 4});
  CHECK(g.twins_of_reader(0).size() == 16);
}

TEST_CASE("effective regions follow the twin-reader axis") {
  env::TwinRecord t{0, {0.0, 0.0}, 0.75, 0, coupling::TwinGeometry(coupling::TagGeometry::reference(), 0.01), 2.0, {}};
  env::ReaderRecord r;
  r.position = {0.0, 2.0};
  const env::DetectionProfile p;
  CHECK(env::in_effective_region(t, r, {0.0, 1.0}, p) == env::Region::Front);
  CHECK(env::in_effective_region(t, r, {0.45, 1.9}, p) == env::Region::Front);
  CHECK(env::in_effective_region(t, r, {0.55, 1.0}, p) == env::Region::Outside);
  CHECK(env::in_effective_region(t, r, {0.0, -0.5}, p) == env::Region::Behind);
  CHECK(env::in_effective_region(t, r, {0.0, -1.5}, p) == env::Region::Outside);
}

TEST_CASE("height and mount multipliers are normalized at the reference") {
  const env::DetectionProfile p;
  CHECK(p.height_multiplier(1.70) == doctest::Approx(1.0));
  CHECK(p.height_multiplier(1.60) == doctest::Approx(0.85 / 0.92));
  CHECK(p.mount_multiplier(0.75) == doctest::Approx(1.0));
  CHECK(env::jump_probability(env::Region::Front, p, 1.70, 0.75) == doctest::Approx(0.95));
  CHECK(env::jump_probability(env::Region::Front, p, 1.90, 0.75) == doctest::Approx(1.0));  // clamped
  CHECK(env::jump_probability(env::Region::Outside, p, 1.70, 0.75) == p.p_false);
}

TEST_CASE("measured jump rates match the configured probabilities") {
  const auto g = testing::lattice_grid(5, 5);
  env::DetectionProfile profile;
  profile.p_false = 0.05;
  const int twin = 12;  // centre cell, reader straight above
  const Vec2 at = g.twin(twin).position;
  const long n = 20000;

  SUBCASE("front") {
    const long hits = count_jumps(g, profile, twin, at + Vec2{0.0, 0.5}, n, 1);
    CHECK(testing::within_sigma(hits, n, 0.95));
  }
  SUBCASE("behind") {
    const long hits = count_jumps(g, profile, twin, at - Vec2{0.0, 0.5}, n, 2);
    CHECK(testing::within_sigma(hits, n, 0.5));
  }
  SUBCASE("outside") {
    const long hits = count_jumps(g, profile, twin, at + Vec2{1.2, 0.0}, n, 3);
    CHECK(testing::within_sigma(hits, n, 0.05));
  }
  SUBCASE("shorter object") {
    const long hits = count_jumps(g, profile, twin, at + Vec2{0.0, 0.5}, n, 4, 1.60);
    CHECK(testing::within_sigma(hits, n, 0.95 * 0.85 / 0.92));
  }
}

TEST_CASE("events alternate jump and restore per twin") {
  const auto s = scenario::load_scenario(testing::scenario_path("reference_warehouse"));
  const auto p = pipeline::prepare(s);
  const auto run = pipeline::simulate(p, 99);
  REQUIRE(!run.events.empty());
  std::map<int, env::EventKind> last;
  for (std::size_t i = 0; i < run.events.size(); ++i) {
    const auto& e = run.events[i];
    if (i > 0) CHECK(e.t >= run.events[i - 1].t);
    const auto it = last.find(e.twin_id);
    if (it == last.end()) {
      CHECK(e.kind == env::EventKind::Jump);
    } else {
      CHECK(e.kind != it->second);
    }
    last[e.twin_id] = e.kind;
  }
}

TEST_CASE("one uniform draw per query regardless of outcome") {
  const auto g = testing::lattice_grid(3, 3);
  const env::DetectionProfile profile;
  const double tau = 0.02;
  // Same seed, different twin queried: the draws line up one to one, so the
  // front twin jumps exactly when u < p_front.
  env::Environment a(g, profile, env::MovingObject::stationary({0.9, 1.2}, 100.0, 1.70), tau, 42);
  Rng ref(42);
  const double p_tx = g.twin(4).window->grid_midpoint();
  for (int i = 0; i < 500; ++i) {
    const double u = ref.uniform();
    const auto out = a.query(4, p_tx, i * tau);
    CHECK((out == env::QueryOutcome::Jumping) == (u < 0.95));
  }
}

TEST_CASE("a reader interrogates one twin at a time") {
  const auto g = testing::lattice_grid(2, 2);
  env::Environment e(g, {}, std::nullopt, 0.02, 1);
  const double p0 = g.twin(0).window->grid_midpoint();
  e.query(0, p0, 0.0);
  CHECK_THROWS_AS(e.query(1, p0, 0.01), std::logic_error);
  CHECK_NOTHROW(e.query(1, p0, 0.02));
  CHECK_THROWS_AS(e.query(1, 40.0, 0.04), ArgumentError);
}

TEST_CASE("walker interpolation") {
  const auto w = env::MovingObject::walk({{0.0, 0.0}, {3.0, 0.0}, {3.0, 3.0}}, 1.5, 1.7, 10.0);
  CHECK(w.t_begin() == 10.0);
  CHECK(w.t_end() == doctest::Approx(14.0));
  const auto p = env::object_position(w, 11.0);
  CHECK(p.x == doctest::Approx(1.5));
  CHECK(env::object_position(w, 13.0).y == doctest::Approx(1.5));
  CHECK_THROWS_AS(env::object_position(w, 9.0), ArgumentError);
  CHECK_THROWS_AS(env::MovingObject({{{0, 0}, 0.0}, {{10, 0}, 1.0}}, 1.7, 2.0), ArgumentError);
}

TEST_CASE("simulation is reproducible for a seed") {
  const auto p = pipeline::prepare(scenario::load_scenario(testing::scenario_path("tiny_3x3")));
  const auto a = pipeline::simulate(p, 5);
  const auto b = pipeline::simulate(p, 5);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].t == b.trace[i].t);
    CHECK(a.trace[i].outcome == b.trace[i].outcome);
  }
  CHECK(a.events.size() == b.events.size());
}

}  // TEST_SUITE
