// Serial reference vs OpenMP kernels: particle likelihood and fingerprint
// training.

#include <benchmark/benchmark.h>

#include "twins/particle_filter.hpp"
#include "twins/pipeline.hpp"

#ifndef TWINS_SCENARIO_DIR
#define TWINS_SCENARIO_DIR "scenarios"
#endif

using namespace twins;

namespace {

struct LikelihoodFixture {
  env::Lattice lattice{0.6, 50, 34};
  tracker::Fingerprint fp;
  tracker::Observation v;
  tracker::ParticleSet particles;

  explicit LikelihoodFixture(int n) : fp(tracker::FingerprintMeta{}, lattice.size()) {
    Rng rng(1);
    for (int c = 0; c < lattice.size(); ++c) {
      for (int t = 0; t < 20; ++t) {
        std::vector<double> h(11);
        double sum = 0.0;
        for (auto& x : h) sum += x = 0.05 + rng.uniform();
        for (auto& x : h) x /= sum;
        fp.set_histogram(c, t, h);
      }
    }
    for (int t = 0; t < 20; ++t) v.counts.emplace_back(t, static_cast<int>(rng.uniform() * 11));
    particles.resize(static_cast<std::size_t>(n));
    for (auto& p : particles) p.pos = {rng.uniform() * 30.0, rng.uniform() * 20.0};
  }
};

template <bool Parallel>
void BM_likelihood(benchmark::State& state) {
  const LikelihoodFixture f(static_cast<int>(state.range(0)));
  std::vector<double> out;
  for (auto _ : state) {
    if constexpr (Parallel) {
      tracker::likelihood_parallel(f.particles, f.v, f.fp, f.lattice, out);
    } else {
      tracker::likelihood_serial(f.particles, f.v, f.fp, f.lattice, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

const pipeline::Prepared& training_scenario() {
  static const auto p =
      pipeline::prepare(scenario::load_scenario(std::string(TWINS_SCENARIO_DIR) + "/static_noise_free.json"));
  return p;
}

template <bool Parallel>
void BM_training(benchmark::State& state) {
  const auto& p = training_scenario();
  for (auto _ : state) {
    auto fp = pipeline::train(p, 1, Parallel);
    benchmark::DoNotOptimize(fp);
  }
  state.SetItemsProcessed(state.iterations() * p.grid.lattice().size());
}

}  // namespace

BENCHMARK_TEMPLATE(BM_likelihood, false)->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK_TEMPLATE(BM_likelihood, true)->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK_TEMPLATE(BM_training, false)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_training, true)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
