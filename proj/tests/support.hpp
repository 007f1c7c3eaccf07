#pragma once

// Fixtures and independent oracles shared by the unit and acceptance suites.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "twins/coupling.hpp"
#include "twins/env.hpp"
#include "twins/fingerprint.hpp"
#include "twins/rng.hpp"

#ifndef TWINS_SCENARIO_DIR
#define TWINS_SCENARIO_DIR "scenarios"
#endif

namespace twins::testing {

inline std::string scenario_path(const std::string& name) {
  return std::string(TWINS_SCENARIO_DIR) + "/" + name + ".json";
}

/// One twin per cell centre of an nx x ny lattice and a single reader two
/// metres past the top edge, facing down.
inline env::TwinsGrid lattice_grid(int nx, int ny, double edge = 0.6) {
  env::GridConfig cfg;
  cfg.area = {nx * edge, ny * edge};
  cfg.cell_edge = edge;
  env::ReaderRecord r;
  r.position = {0.5 * nx * edge, ny * edge + 2.0};
  r.facing_rad = -0.5 * coupling::kPi;
  r.half_angle_rad = 85.0 * env::kDegree;
  cfg.readers.push_back(r);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) cfg.twins.push_back({{(ix + 0.5) * edge, (iy + 0.5) * edge}, 0.75, 0});
  }
  cfg.excitation = coupling::calibrate_excitation(cfg.geometry.tag(), {});
  return env::build_grid(cfg);
}

// Inductance oracle -----------------------------------------------------------

/// Mutual inductance between a straight wire and a coplanar rectangle, by
/// brute-force quadrature: Biot-Savart along a finite wire of `wire` metres,
/// then the flux integral over the rectangle. The rectangle's `width` side runs
/// parallel to the wire, `gap` is the near edge's distance from it.
inline double numeric_mutual_inductance(double width, double gap, double length, double mu0,
                                        double wire = 100.0) {
  using boost::math::quadrature::gauss;
  using boost::math::quadrature::gauss_kronrod;
  const double half = 0.5 * wire;

  // |B| at perpendicular distance rho and axial offset z, unit current.
  auto field = [&](double rho, double z) {
    auto dl = [&](double s) {
      const double dz = z - s;
      return rho / std::pow(rho * rho + dz * dz, 1.5);
    };
    const double near = 50.0 * rho;
    double sum = gauss_kronrod<double, 61>::integrate(dl, z - near, z + near, 12, 1e-13);
    sum += gauss_kronrod<double, 61>::integrate(dl, -half, z - near, 12, 1e-13);
    sum += gauss_kronrod<double, 61>::integrate(dl, z + near, half, 12, 1e-13);
    return mu0 / (4.0 * coupling::kPi) * sum;
  };
  auto strip = [&](double z) {
    return gauss_kronrod<double, 31>::integrate([&](double rho) { return field(rho, z); }, gap, gap + length, 8,
                                                1e-11);
  };
  return gauss<double, 7>::integrate(strip, -0.5 * width, 0.5 * width);
}

// Steiner oracle -------------------------------------------------------------

inline std::uint32_t mask_of(const std::vector<int>& cells) {
  std::uint32_t m = 0;
  for (int c : cells) m |= 1u << c;
  return m;
}

inline bool mask_connected(std::uint32_t cells, const env::Lattice& lattice) {
  if (cells == 0) return true;
  std::uint32_t seen = cells & (~cells + 1);  // lowest set bit
  std::uint32_t frontier = seen;
  while (frontier) {
    std::uint32_t next = 0;
    for (std::uint32_t f = frontier; f; f &= f - 1) {
      const int c = std::countr_zero(f);
      for (int nb : lattice.neighbors(c)) next |= 1u << nb;
    }
    next &= cells & ~seen;
    seen |= next;
    frontier = next;
  }
  return seen == cells;
}

/// Fewest extra cells that make `cells` 4-connected, found by trying every
/// subset of the free cells in order of size. Lattices up to 32 cells.
/// Returns -1 when more than `max_extra` would be needed.
inline int min_extra_cells(const std::vector<int>& cells, const env::Lattice& lattice, int max_extra) {
  const std::uint32_t base = mask_of(cells);
  std::vector<int> free;
  for (int c = 0; c < lattice.size(); ++c) {
    if (!(base >> c & 1u)) free.push_back(c);
  }
  const int n = static_cast<int>(free.size());
  std::vector<int> pick;
  std::function<bool(int, int, std::uint32_t)> choose = [&](int from, int left, std::uint32_t acc) {
    if (left == 0) return mask_connected(acc, lattice);
    for (int i = from; i <= n - left; ++i) {
      if (choose(i + 1, left - 1, acc | 1u << free[static_cast<std::size_t>(i)])) return true;
    }
    return false;
  };
  for (int k = 0; k <= std::min(max_extra, n); ++k) {
    if (choose(0, k, base)) return k;
  }
  return -1;
}

// Statistics -----------------------------------------------------------------

/// Upper critical value of chi-squared with `dof` degrees of freedom.
inline double chi2_critical(int dof, double alpha = 1e-3) {
  boost::math::chi_squared_distribution<double> d(dof);
  return boost::math::quantile(boost::math::complement(d, alpha));
}

/// |observed - n p| <= k sigma for a binomial count.
inline bool within_sigma(long hits, long n, double p, double k = 3.0) {
  const double sigma = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
  const double dev = std::abs(static_cast<double>(hits) - static_cast<double>(n) * p);
  return dev <= k * sigma + 1e-12;
}

// Synthetic fingerprints -----------------------------------------------------

/// Random strictly positive histograms for every (cell, twin) pair.
inline tracker::Fingerprint random_fingerprint(int cells, int twins, int n_max, Rng& rng) {
  tracker::FingerprintMeta meta;
  meta.n_max = n_max;
  tracker::Fingerprint fp(meta, cells);
  for (int c = 0; c < cells; ++c) {
    for (int t = 0; t < twins; ++t) {
      std::vector<double> h(static_cast<std::size_t>(n_max + 1));
      double sum = 0.0;
      for (auto& v : h) sum += v = 0.05 + rng.uniform();
      for (auto& v : h) v /= sum;
      fp.set_histogram(c, t, h);
    }
  }
  return fp;
}

}  // namespace twins::testing
