#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "twins/error.hpp"
#include "twins/particle_filter.hpp"
#include "twins/pipeline.hpp"
#include "twins/tracker.hpp"

using namespace twins;
using namespace twins::tracker;

namespace {

ParticleSet spread_over(const env::Lattice& l, int per_cell) {
  ParticleSet ps;
  for (int c = 0; c < l.size(); ++c) {
    for (int k = 0; k < per_cell; ++k) ps.push_back({l.center(c), {}, 0.0});
  }
  for (auto& p : ps) p.w = 1.0 / static_cast<double>(ps.size());
  return ps;
}

Observation random_observation(int twins, int n_max, Rng& rng) {
  Observation v;
  for (int t = 0; t < twins; ++t) v.counts.emplace_back(t, static_cast<int>(rng.uniform() * (n_max + 1)));
  return v;
}

}  // namespace

TEST_SUITE("tracker") {

TEST_CASE("likelihood is the product of per-twin histogram entries") {
  Rng rng(1);
  const env::Lattice l(0.6, 5, 5);
  const auto fp = testing::random_fingerprint(l.size(), 6, 10, rng);
  const auto v = random_observation(6, 10, rng);
  const auto ps = spread_over(l, 2);
  std::vector<double> got;
  likelihood_serial(ps, v, fp, l, got);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const int cell = l.cell_of(ps[k].pos);
    double expect = 1.0;
    for (const auto& [twin, n] : v.counts) expect *= fp.histogram(cell, twin)[static_cast<std::size_t>(n)];
    CHECK(got[k] == expect);
  }
}

TEST_CASE("serial and parallel likelihood kernels agree bitwise") {
  Rng rng(2);
  const env::Lattice l(0.6, 20, 20);
  const auto fp = testing::random_fingerprint(l.size(), 12, 10, rng);
  const auto v = random_observation(12, 10, rng);
  ParticleSet ps(3000);
  for (auto& p : ps) p.pos = {rng.uniform() * 12.0, rng.uniform() * 12.0};
  std::vector<double> a, b;
  likelihood_serial(ps, v, fp, l, a);
  likelihood_parallel(ps, v, fp, l, b);
  CHECK(a == b);
}

TEST_CASE("weighting normalizes and keeps the particle count") {
  Rng rng(3);
  const env::Lattice l(0.6, 5, 5);
  const auto fp = testing::random_fingerprint(l.size(), 4, 10, rng);
  auto ps = spread_over(l, 4);
  for (int round = 0; round < 20; ++round) {
    const auto r = pf_weight(ps, random_observation(4, 10, rng), fp, l);
    CHECK_FALSE(r.degenerate);
    CHECK(std::abs(weight_sum(ps) - 1.0) <= 1e-9);
    pf_resample(ps, rng);
    CHECK(ps.size() == 100);
    CHECK(std::abs(weight_sum(ps) - 1.0) <= 1e-9);
  }
}

TEST_CASE("all-zero likelihood leaves the weights alone") {
  const env::Lattice l(1.0, 2, 1);
  FingerprintMeta meta;
  meta.n_max = 2;
  Fingerprint fp(meta, 2);
  fp.set_histogram(0, 0, {1.0, 0.0, 0.0});
  fp.set_histogram(1, 0, {1.0, 0.0, 0.0});
  ParticleSet ps{{{0.5, 0.5}, {}, 0.25}, {{1.5, 0.5}, {}, 0.75}};
  const auto r = pf_weight(ps, Observation{{{0, 2}}}, fp, l);
  CHECK(r.degenerate);
  CHECK(ps[0].w == 0.25);
  CHECK(ps[1].w == 0.75);
}

TEST_CASE("multinomial resampling is unbiased") {
  const std::vector<double> w{0.05, 0.3, 0.15, 0.1, 0.25, 0.02, 0.08, 0.05};
  const int trials = 10000;
  Rng rng(9);
  std::vector<long> offspring(w.size(), 0);
  for (int t = 0; t < trials; ++t) {
    ParticleSet ps;
    for (std::size_t k = 0; k < w.size(); ++k) ps.push_back({{static_cast<double>(k), 0.0}, {}, w[k]});
    pf_resample(ps, rng);
    for (const auto& p : ps) ++offspring[static_cast<std::size_t>(p.pos.x)];
  }
  const double total = static_cast<double>(trials) * static_cast<double>(w.size());
  double chi2 = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double e = total * w[k];
    chi2 += (offspring[k] - e) * (offspring[k] - e) / e;
    CHECK(testing::within_sigma(offspring[k], static_cast<long>(total), w[k], 4.0));
  }
  CHECK(chi2 < testing::chi2_critical(static_cast<int>(w.size()) - 1));
}

TEST_CASE("resampling refuses unnormalized weights") {
  Rng rng(1);
  ParticleSet ps{{{0, 0}, {}, 0.3}, {{1, 0}, {}, 0.3}};
  CHECK_THROWS_AS(pf_resample(ps, rng), ArgumentError);
}

TEST_CASE("a cell's own training mode gives it the top weight") {
  Rng rng(12);
  const env::Lattice l(0.6, 5, 5);
  const int twins = 5;
  for (int trial = 0; trial < 25; ++trial) {
    const auto fp = testing::random_fingerprint(l.size(), twins, 10, rng);
    const int target = trial;
    Observation v;
    for (int t = 0; t < twins; ++t) {
      const auto h = fp.histogram(target, t);
      v.counts.emplace_back(t, static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin()));
    }
    int best_cell = 0;
    for (int c = 1; c < l.size(); ++c) {
      if (cell_likelihood(c, v, fp) > cell_likelihood(best_cell, v, fp)) best_cell = c;
    }
    auto ps = spread_over(l, 3);
    pf_weight(ps, v, fp, l);
    const auto top = std::max_element(ps.begin(), ps.end(), [](auto& a, auto& b) { return a.w < b.w; });
    CHECK(l.cell_of(top->pos) == best_cell);
  }
}

TEST_CASE("prediction without noise is constant velocity with wall reflection") {
  Rng rng(1);
  const Area area{10.0, 5.0};
  ParticleSet ps{{{1.0, 1.0}, {1.0, 0.5}, 1.0}, {{9.5, 4.8}, {1.0, 0.5}, 1.0}};
  pf_predict(ps, 1.0, {0.0, 0.0}, area, rng);
  CHECK(ps[0].pos == Vec2{2.0, 1.5});
  CHECK(ps[1].pos.x == doctest::Approx(9.5));
  CHECK(ps[1].pos.y == doctest::Approx(4.7));
  CHECK(ps[1].vel == Vec2{-1.0, -0.5});

  ParticleSet noisy(500, {{5.0, 2.5}, {0.0, 0.0}, 1.0});
  for (int i = 0; i < 50; ++i) pf_predict(noisy, 1.0, {1.0, 0.5}, area, rng);
  for (const auto& p : noisy) CHECK(area.contains(p.pos));
}

TEST_CASE("estimate is the weighted mean") {
  const ParticleSet ps{{{0.0, 0.0}, {}, 0.25}, {{4.0, 2.0}, {}, 0.75}};
  CHECK(pf_estimate(ps) == Vec2{3.0, 1.5});
}

TEST_CASE("observation scopes") {
  const auto g = testing::lattice_grid(5, 5);
  const std::map<int, int> counts{{12, 7}, {0, 2}};
  const auto radius = observe(counts, g.twin(12).position, g, 0.61);
  CHECK(radius.counts == std::vector<std::pair<int, int>>{{7, 0}, {11, 0}, {12, 7}, {13, 0}, {17, 0}});
  const auto patch = observe(counts, g.twin(0).position, g, 0.0, ObservationScope::Patch3x3);
  CHECK(patch.counts == std::vector<std::pair<int, int>>{{0, 2}, {1, 0}, {5, 0}, {6, 0}});
}

TEST_CASE("smoothing and jump counts") {
  const auto h = smooth_histogram({0, 3, 1}, 1.0);
  CHECK(h == std::vector<double>{1.0 / 7, 4.0 / 7, 2.0 / 7});
  env::IntervalRecord iv;
  iv.rounds = {{0, 0, 0, 0, {3, 4}}, {0, 1, 0, 0, {3}}, {1, 0, 0, 0, {3}}};
  const auto n = jump_counts(iv, 2);
  CHECK(n.at(3) == 2);
  CHECK(n.at(4) == 1);
}

TEST_CASE("trained histograms are valid and training is reproducible") {
  auto s = scenario::load_scenario(testing::scenario_path("tiny_3x3"));
  s.detection.p_front = 0.4;  // keep counts below n_max so seeds matter
  const auto p = pipeline::prepare(s);
  const auto par = pipeline::train(p, 4, true);
  const auto ser = pipeline::train(p, 4, false);
  CHECK(par == ser);
  CHECK_FALSE(par == pipeline::train(p, 5, true));
  for (int c = 0; c < par.cells(); ++c) {
    for (int t : par.twins_of(c)) {
      const auto h = par.histogram(c, t);
      CHECK(std::accumulate(h.begin(), h.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      for (double v : h) CHECK(v > 0.0);
    }
  }
  const auto bg = par.background();
  CHECK(std::accumulate(bg.begin(), bg.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("moving-object training is reproducible too") {
  auto s = scenario::load_scenario(testing::scenario_path("tiny_3x3"));
  s.training.object_speed = 0.3;
  const auto p = pipeline::prepare(s);
  CHECK(pipeline::train(p, 4, true) == pipeline::train(p, 4, false));
}

TEST_CASE("noise-free parked object converges within a cell edge") {
  const auto p = pipeline::prepare(scenario::load_scenario(testing::scenario_path("static_noise_free")));
  const auto fp = pipeline::train(p, 1);
  const auto rep = pipeline::run_trial(p, fp, 2);
  REQUIRE(rep.rows.size() == 30);
  double sq = 0.0;
  for (std::size_t k = 10; k < 30; ++k) sq += rep.rows[k].error * rep.rows[k].error;
  CHECK(std::sqrt(sq / 20.0) <= 0.6);
}

TEST_CASE("a lost filter is reseeded into the active region") {
  const auto p = pipeline::prepare(scenario::load_scenario(testing::scenario_path("static_noise_free")));
  const auto fp = pipeline::train(p, 1);
  auto cfg = p.scenario.tracker;
  cfg.origin = {1.0, 5.5};  // far from the object
  cfg.spread = 0.1;
  ParticleTracker tr(p.grid, fp, cfg, 3);
  const std::map<int, int> counts{{5, 10}, {6, 10}, {7, 10}, {8, 10}, {9, 10}};
  const auto first = tr.step(0, 0.5, counts);
  CHECK(first.diverged);
  CHECK(first.jumping == 5);
  for (int k = 1; k < 5; ++k) tr.step(k, k + 0.5, counts);
  const auto last = tr.step(5, 5.5, counts);
  CHECK(distance(last.estimate, {6.3, 1.5}) <= 0.6);
}

TEST_CASE("tracker config validation") {
  TrackerConfig c;
  c.particles = 0;
  CHECK_THROWS(c.validate());
}

}  // TEST_SUITE
