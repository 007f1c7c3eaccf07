#include <cmath>
#include <sstream>

#include "twins/coupling.hpp"
#include "twins/error.hpp"

namespace twins::coupling {

double saturated_gap_db(const TagGeometry& tag, double separation) {
  const TwinGeometry g(tag, separation, Placement::A);
  const double b = tag.loop_length();
  const double r = tag.line_gap();
  const double l = separation;
  const double own = std::log((r + b) / r);
  const double rear = own - std::log((l + b) / l);
  const double fore = own + std::log((2.0 * r + 2.0 * b + l) / (2.0 * r + b + l));
  if (rear <= 0.0) return INFINITY;
  return 20.0 * std::log10(fore / rear);
}

ExcitationModel calibrate_excitation(const TagGeometry& tag, const ExcitationModel& base,
                                     const CalibrationTargets& targets) {
  base.validate();
  const TwinGeometry g(tag, targets.separation, Placement::A);
  if (targets.gap_db >= saturated_gap_db(tag, targets.separation)) {
    std::ostringstream msg;
    msg << "gap target " << targets.gap_db << " dB exceeds the geometric limit "
        << saturated_gap_db(tag, targets.separation) << " dB for this loop geometry";
    throw CalibrationError(msg.str());
  }

  ExcitationModel ex = base;
  ex.loop_loop_current = 0.0;
  ex.threshold_current = 1.0;
  // The gap grows monotonically as R shrinks; bisect in log R.
  double lo = std::log(1e-9);
  double hi = std::log(1e9);
  auto gap_at = [&](double log_r) {
    ExcitationModel trial = ex;
    trial.resistance = std::exp(log_r);
    return continuous_gap_db(g, trial);
  };
  if (gap_at(hi) > targets.gap_db) throw CalibrationError("gap target below the weakest coupling");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gap_at(mid) > targets.gap_db) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  ex.resistance = std::exp(0.5 * (lo + hi));

  // Threshold: the Rear-tag needs exactly max_power at max_distance.
  const auto k = twin_coupling_terms(g, ex, 1.0);
  const double i_l0 = line_current(targets.max_power_dbm, targets.max_distance, tag.frequency(), ex);
  // A hair under the exact current so the boundary point itself stays reachable.
  ex.threshold_current = i_l0 * std::hypot(1.0, k.rear) * (1.0 - 1e-12);
  ex.loop_loop_current = base.loop_loop_current;
  return ex;
}

}  // namespace twins::coupling
