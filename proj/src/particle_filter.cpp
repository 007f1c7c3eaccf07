#include "twins/particle_filter.hpp"

#include <algorithm>
#include <cmath>

#include "twins/error.hpp"

namespace twins::tracker {

Observation observe(const std::map<int, int>& jump_counts, const Vec2& center,
                    const env::TwinsGrid& grid, double radius, ObservationScope scope) {
  std::vector<int> twins;
  if (scope == ObservationScope::Radius) {
    twins = grid.twins_within(center, radius);
  } else {
    const auto& lattice = grid.lattice();
    const Vec2 p{std::clamp(center.x, 0.0, grid.area().width), std::clamp(center.y, 0.0, grid.area().height)};
    const int c = lattice.cell_of(p);
    if (c >= 0) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ix = lattice.ix(c) + dx;
          const int iy = lattice.iy(c) + dy;
          if (ix < 0 || iy < 0 || ix >= lattice.nx() || iy >= lattice.ny()) continue;
          const auto& in_cell = grid.twins_in_cell(lattice.id(ix, iy));
          twins.insert(twins.end(), in_cell.begin(), in_cell.end());
        }
      }
      std::sort(twins.begin(), twins.end());
    }
  }
  Observation v;
  v.counts.reserve(twins.size());
  for (int t : twins) {
    const auto it = jump_counts.find(t);
    v.counts.emplace_back(t, it == jump_counts.end() ? 0 : it->second);
  }
  return v;
}

ParticleSet pf_init(int n, const Vec2& origin, const Vec2& v0, double spread, Rng& rng) {
  if (n < 1) throw ArgumentError("particle count must be at least 1");
  if (spread < 0.0) throw ArgumentError("spread must be non-negative");
  ParticleSet out(static_cast<std::size_t>(n));
  const double w = 1.0 / n;
  for (auto& p : out) {
    const double x = rng.normal(origin.x, spread);
    const double y = rng.normal(origin.y, spread);
    p = {{x, y}, v0, w};
  }
  return out;
}

namespace {

// Mirror a coordinate into [0, hi]; flips the matching velocity component on
// every bounce.
void reflect(double& x, double& v, double hi) {
  if (hi <= 0.0) {
    x = 0.0;
    return;
  }
  for (int guard = 0; guard < 64 && (x < 0.0 || x > hi); ++guard) {
    if (x < 0.0) {
      x = -x;
    } else {
      x = 2.0 * hi - x;
    }
    v = -v;
  }
  x = std::clamp(x, 0.0, hi);
}

}  // namespace

void pf_predict(ParticleSet& particles, double dt, const MotionNoise& noise, const Area& area, Rng& rng) {
  for (auto& p : particles) {
    p.pos.x += p.vel.x * dt + rng.normal(0.0, noise.sigma_pos);
    p.pos.y += p.vel.y * dt + rng.normal(0.0, noise.sigma_pos);
    p.vel.x += rng.normal(0.0, noise.sigma_vel);
    p.vel.y += rng.normal(0.0, noise.sigma_vel);
    reflect(p.pos.x, p.vel.x, area.width);
    reflect(p.pos.y, p.vel.y, area.height);
  }
}

double weight_sum(const ParticleSet& particles) {
  double s = 0.0;
  for (const auto& p : particles) s += p.w;
  return s;
}

WeightResult pf_weight(ParticleSet& particles, const Observation& v, const Fingerprint& fp,
                       const env::Lattice& lattice, bool parallel) {
  std::vector<double> l;
  if (parallel) {
    likelihood_parallel(particles, v, fp, lattice, l);
  } else {
    likelihood_serial(particles, v, fp, lattice, l);
  }
  WeightResult out;
  out.best_likelihood = l.empty() ? 0.0 : *std::max_element(l.begin(), l.end());
  double total = 0.0;
  for (std::size_t k = 0; k < particles.size(); ++k) total += particles[k].w * l[k];
  if (!(total > 0.0) || !std::isfinite(total)) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t k = 0; k < particles.size(); ++k) particles[k].w = particles[k].w * l[k] / total;
  return out;
}

void pf_resample(ParticleSet& particles, Rng& rng) {
  if (particles.empty()) return;
  const double total = weight_sum(particles);
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("resampling needs normalized weights");
  std::vector<double> cumulative(particles.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < particles.size(); ++k) {
    acc += particles[k].w;
    cumulative[k] = acc;
  }
  ParticleSet out;
  out.reserve(particles.size());
  const double w = 1.0 / static_cast<double>(particles.size());
  for (std::size_t k = 0; k < particles.size(); ++k) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    Particle p = particles[static_cast<std::size_t>(it - cumulative.begin())];
    p.w = w;
    out.push_back(p);
  }
  particles = std::move(out);
}

Vec2 pf_estimate(const ParticleSet& particles) {
  if (particles.empty()) throw ArgumentError("no particles to estimate from");
  Vec2 acc;
  double total = 0.0;
  for (const auto& p : particles) {
    acc = acc + p.pos * p.w;
    total += p.w;
  }
  if (!(total > 0.0)) throw ArgumentError("particle weights sum to zero");
  return acc * (1.0 / total);
}

}  // namespace twins::tracker
