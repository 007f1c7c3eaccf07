#include "doctest.h"
#include "support.hpp"
#include "twins/coupling.hpp"
#include "twins/error.hpp"

using namespace twins;
using namespace twins::coupling;

namespace {

TwinGeometry reference_twin(double l = 0.010, Placement p = Placement::A) {
  return TwinGeometry(TagGeometry::reference(), l, p);
}

ExcitationModel calibrated() { return calibrate_excitation(TagGeometry::reference(), {}); }

}  // namespace

TEST_SUITE("coupling") {

TEST_CASE("line-loop inductance agrees with flux quadrature") {
  Rng rng(11);
  for (int i = 0; i < 12; ++i) {
    const double a = 0.001 + 0.009 * rng.uniform();
    const double gap = 0.0005 + 0.02 * rng.uniform();
    const double b = 0.002 + 0.018 * rng.uniform();
    const double closed = mutual_inductance_line_loop(a, gap, b);
    const double numeric = testing::numeric_mutual_inductance(a, gap, b, kMu0);
    CHECK(std::abs(closed - numeric) / numeric <= 1e-3);
  }
}

TEST_CASE("rear loop always carries the smaller current") {
  Rng rng(5);
  const auto ex = calibrated();
  for (int i = 0; i < 2000; ++i) {
    const double b = 0.002 + 0.03 * rng.uniform();
    const double r = b * (0.05 + 0.95 * rng.uniform());
    const double l = r * (1.0 + 50.0 * rng.uniform());
    const TwinGeometry g(TagGeometry(0.001 + 0.01 * rng.uniform(), b, r, 0.16, 915e6), l);
    const auto c = tag_currents(g, ex, 10.0 + 22.5 * rng.uniform(), 0.5 + 6.0 * rng.uniform());
    REQUIRE(c.rear.magnitude() < c.fore.magnitude());
  }
}

TEST_CASE("coupling difference vanishes as the tags separate") {
  const auto ex = calibrated();
  const auto tag = TagGeometry::reference();
  double previous = 1e300;
  for (double ratio : {1.0, 10.0, 100.0, 1e3, 1e4}) {
    const TwinGeometry g(tag, ratio * tag.loop_length());
    const auto k = twin_coupling_terms(g, ex, 1.0);
    const double gap = (k.fore - k.rear) / k.scale;
    CHECK(gap > 0.0);
    CHECK(gap < previous);
    previous = gap;
  }
  CHECK(previous <= 2.1e-4);
}

TEST_CASE("induced current sign follows flux sense") {
  const double m = mutual_inductance_line_loop(0.005, 0.006, 0.010);
  const double opp = induced_current(m, 1.0, 2 * kPi * 915e6, 50.0, FluxSense::Opposing);
  const double aid = induced_current(m, 1.0, 2 * kPi * 915e6, 50.0, FluxSense::Aiding);
  CHECK(opp > 0.0);
  CHECK(aid == doctest::Approx(-opp));
  CHECK_THROWS_AS(induced_current(m, 1.0, 1.0, 0.0, FluxSense::Aiding), ArgumentError);
}

TEST_CASE("non-shadowing placements show no gap") {
  const auto ex = calibrated();
  for (auto p : {Placement::E, Placement::F, Placement::G, Placement::H}) {
    CHECK(continuous_gap_db(reference_twin(0.010, p), ex) == doctest::Approx(0.0).epsilon(1e-12));
  }
  for (auto p : {Placement::A, Placement::B, Placement::C, Placement::D}) {
    CHECK(continuous_gap_db(reference_twin(0.010, p), ex) > 5.0);
  }
}

TEST_CASE("structure-oblivious model predicts identical currents") {
  const auto [i1, i2] = structure_oblivious_currents(20.0, 2.0, ExcitationModel{});
  CHECK(i1 == i2);
}

TEST_CASE("calibration pins the gap and the deployment range") {
  const auto ex = calibrated();
  CHECK(continuous_gap_db(reference_twin(), ex) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(continuous_min_power(reference_twin(), ex, 5.8, TagRole::Rear) == doctest::Approx(32.5).epsilon(1e-9));
  // The gap does not depend on kappa or the activation threshold.
  auto scaled = ex;
  scaled.kappa *= 3.0;
  scaled.threshold_current *= 7.0;
  CHECK(continuous_gap_db(reference_twin(), scaled) == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("unreachable gap target raises CalibrationError") {
  const TagGeometry narrow(0.005, 0.010, 0.001, 0.16, 915e6);
  CHECK(saturated_gap_db(narrow, 0.010) < 10.0);
  CHECK_THROWS_AS(calibrate_excitation(narrow, {}), CalibrationError);
}

TEST_CASE("critical window narrows with separation") {
  const auto ex = calibrated();
  double previous = 1e300;
  for (int mm = 6; mm <= 26; ++mm) {
    const auto w = critical_window(reference_twin(mm * 1e-3), ex, 2.0);
    REQUIRE(w);
    CHECK(w->width() <= previous + 1e-12);
    previous = w->width();
  }
}

TEST_CASE("required power grows with reader distance") {
  const auto ex = calibrated();
  double previous = 0.0;
  for (double d = 0.5; d <= 5.8; d += 0.1) {
    const double p = continuous_min_power(reference_twin(), ex, d, TagRole::Rear);
    CHECK(p > previous);
    previous = p;
  }
  CHECK_FALSE(min_activation_power(reference_twin(), ex, 6.5, TagRole::Rear));
  CHECK(min_activation_power(reference_twin(), ex, 5.0, TagRole::Rear));
}

TEST_CASE("grid midpoint snaps down to the power grid") {
  const PowerWindow w{13.5, 23.5};
  CHECK(w.grid_midpoint() == 18.5);
  const PowerWindow odd{13.5, 23.75};
  CHECK(odd.grid_midpoint() == 18.5);
}

TEST_CASE("rayleigh length and wavelength") {
  CHECK(wavelength(915e6) == doctest::Approx(0.32764));
  CHECK(rayleigh_length(0.1, 0.32764) == doctest::Approx(2 * 0.01 / 0.32764));
}

TEST_CASE("geometry validation") {
  CHECK_THROWS_AS(TagGeometry(0.0, 0.01, 0.005, 0.16, 915e6), ArgumentError);
  CHECK_THROWS_AS(TagGeometry(0.005, 0.01, 0.02, 0.16, 915e6), ArgumentError);
  CHECK_THROWS_AS(TwinGeometry(TagGeometry::reference(), 0.001), ArgumentError);
  CHECK(parse_placement("C") == Placement::C);
  CHECK_FALSE(parse_placement("z"));
  CHECK_THROWS_AS(tag_currents(reference_twin(), calibrated(), 40.0, 2.0), ArgumentError);
}

}  // TEST_SUITE
