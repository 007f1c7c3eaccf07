#include "twins/particle_filter.hpp"

namespace twins::tracker {

double cell_likelihood(int cell, const Observation& v, const Fingerprint& fp) {
  double l = 1.0;
  for (const auto& [twin, n] : v.counts) l *= fp.probability(cell, twin, n);
  return l;
}

void likelihood_serial(const ParticleSet& particles, const Observation& v, const Fingerprint& fp,
                       const env::Lattice& lattice, std::vector<double>& out) {
  out.resize(particles.size());
  for (std::size_t k = 0; k < particles.size(); ++k) {
    out[k] = cell_likelihood(lattice.cell_of(particles[k].pos), v, fp);
  }
}

void likelihood_parallel(const ParticleSet& particles, const Observation& v, const Fingerprint& fp,
                         const env::Lattice& lattice, std::vector<double>& out) {
  out.resize(particles.size());
  const long n = static_cast<long>(particles.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    out[i] = cell_likelihood(lattice.cell_of(particles[i].pos), v, fp);
  }
}

}  // namespace twins::tracker
