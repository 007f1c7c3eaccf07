#pragma once

// Particle filter steps: init, predict, weight, resample, estimate.

#include <utility>
#include <vector>

#include "twins/env.hpp"
#include "twins/fingerprint.hpp"
#include "twins/rng.hpp"

namespace twins::tracker {

struct Particle {
  Vec2 pos;
  Vec2 vel;
  double w = 0.0;
};

using ParticleSet = std::vector<Particle>;

/// V: (twin, n_i) pairs, ascending twin id.
struct Observation {
  std::vector<std::pair<int, int>> counts;
};

enum class ObservationScope { Radius, Patch3x3 };

/// Radius: twins within `radius` of `center`. Patch3x3: twins in the 3x3 block
/// of cells around the cell containing `center`.
Observation observe(const std::map<int, int>& jump_counts, const Vec2& center,
                    const env::TwinsGrid& grid, double radius,
                    ObservationScope scope = ObservationScope::Radius);

struct MotionNoise {
  double sigma_pos = 0.2;
  double sigma_vel = 0.1;
};

/// N particles Gaussian-spread around origin, velocity v0, weights 1/N.
ParticleSet pf_init(int n, const Vec2& origin, const Vec2& v0, double spread, Rng& rng);

/// Constant-velocity step with Gaussian noise; walls reflect position and
/// velocity. Weights are untouched.
void pf_predict(ParticleSet& particles, double dt, const MotionNoise& noise, const Area& area, Rng& rng);

/// L_k = prod_i P(n_i | cell(particle_k)) for every particle.
void likelihood_serial(const ParticleSet& particles, const Observation& v, const Fingerprint& fp,
                       const env::Lattice& lattice, std::vector<double>& out);
/// OpenMP version of likelihood_serial; bitwise identical output.
void likelihood_parallel(const ParticleSet& particles, const Observation& v, const Fingerprint& fp,
                         const env::Lattice& lattice, std::vector<double>& out);

/// Likelihood of V for an object in `cell`.
double cell_likelihood(int cell, const Observation& v, const Fingerprint& fp);

struct WeightResult {
  bool degenerate = false;  // every product was zero; weights left as they were
  double best_likelihood = 0.0;
};

/// w_k <- w_k * L_k, then normalized.
WeightResult pf_weight(ParticleSet& particles, const Observation& v, const Fingerprint& fp,
                       const env::Lattice& lattice, bool parallel = true);

/// Multinomial resampling; throws ArgumentError if weights do not sum to 1.
void pf_resample(ParticleSet& particles, Rng& rng);

/// Weighted mean position.
Vec2 pf_estimate(const ParticleSet& particles);

double weight_sum(const ParticleSet& particles);

}  // namespace twins::tracker
