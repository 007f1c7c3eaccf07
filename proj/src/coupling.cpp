#include "twins/coupling.hpp"

#include <cmath>

#include "twins/error.hpp"

namespace twins::coupling {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ArgumentError(std::string(name) + " must be positive");
  }
}

// ln((r+b)/r) and friends, in units of K.
struct LogTerms {
  double own_line;     // L1 -> S1 and L2 -> S2
  double cross_rear;   // L2 -> S1 (aiding)
  double cross_fore;   // L1 -> S2
};

LogTerms log_terms(const TwinGeometry& g) {
  const double b = g.tag().loop_length();
  const double r = g.tag().line_gap();
  const double l = g.separation();
  return {std::log((r + b) / r), std::log((l + b) / l),
          std::log((2.0 * r + 2.0 * b + l) / (2.0 * r + b + l))};
}

double coupling_scale(const TwinGeometry& g, const ExcitationModel& ex) {
  return ex.mu0 * g.tag().loop_width() * g.tag().omega() / (2.0 * kPi * ex.resistance);
}

// Per unit line current: |I_S| / I_L0 for the given role, with I_H = 0.
double magnitude_factor(const TwinGeometry& g, const ExcitationModel& ex, TagRole role) {
  const auto k = twin_coupling_terms(g, ex, 1.0);
  return std::hypot(1.0, role == TagRole::Rear ? k.rear : k.fore);
}

}  // namespace

double wavelength(double frequency_hz) {
  require_positive(frequency_hz, "frequency");
  return kSpeedOfLight / frequency_hz;
}

double rayleigh_length(double antenna_size, double lambda) {
  require_positive(antenna_size, "antenna size");
  require_positive(lambda, "wavelength");
  return 2.0 * antenna_size * antenna_size / lambda;
}

TagGeometry::TagGeometry(double loop_width, double loop_length, double line_gap,
                         double dipole_length, double frequency_hz)
    : a_(loop_width), b_(loop_length), r_(line_gap), length_(dipole_length), f_(frequency_hz) {
  require_positive(a_, "loop width a");
  require_positive(b_, "loop length b");
  require_positive(r_, "line gap r");
  require_positive(length_, "dipole length L");
  require_positive(f_, "frequency f");
  if (r_ > b_) throw ArgumentError("line gap r must not exceed loop length b");
}

TagGeometry TagGeometry::reference() {
  const double f = 915.0e6;
  return TagGeometry(0.005, 0.010, 0.006, wavelength(f) / 2.0, f);
}

bool is_shadowing(Placement p) {
  switch (p) {
    case Placement::A:
    case Placement::B:
    case Placement::C:
    case Placement::D:
      return true;
    default:
      return false;
  }
}

char placement_letter(Placement p) { return static_cast<char>('a' + static_cast<int>(p)); }

std::optional<Placement> parse_placement(std::string_view s) {
  if (s.size() != 1) return std::nullopt;
  char c = s[0];
  if (c >= 'A' && c <= 'H') c = static_cast<char>(c - 'A' + 'a');
  if (c < 'a' || c > 'h') return std::nullopt;
  return static_cast<Placement>(c - 'a');
}

TwinGeometry::TwinGeometry(TagGeometry tag, double separation, Placement placement)
    : tag_(tag), l_(separation), placement_(placement) {
  require_positive(l_, "separation l");
  if (l_ < tag_.line_gap()) {
    throw ArgumentError("separation l must be at least the line gap r");
  }
}

void ExcitationModel::validate() const {
  require_positive(mu0, "mu0");
  require_positive(resistance, "loop resistance R");
  require_positive(kappa, "kappa");
  if (!(threshold_current >= 0.0)) throw ArgumentError("activation threshold must be >= 0");
  if (!(loop_loop_current >= 0.0)) throw ArgumentError("I_H must be >= 0");
}

double PhasorCurrent::magnitude() const { return std::hypot(baseline, quadrature); }

double mutual_inductance_line_loop(double width, double gap, double length, double mu0) {
  require_positive(width, "loop width");
  require_positive(gap, "gap");
  require_positive(length, "loop length");
  require_positive(mu0, "mu0");
  return mu0 * width / (2.0 * kPi) * std::log((gap + length) / gap);
}

double induced_current(double mutual, double line_current, double omega, double resistance,
                       FluxSense sense) {
  if (!(resistance > 0.0)) throw ArgumentError("resistance must be positive");
  if (!(omega > 0.0)) throw ArgumentError("omega must be positive");
  if (mutual < 0.0) throw ArgumentError("mutual inductance must be non-negative");
  const double magnitude = omega * mutual * line_current / resistance;
  return sense == FluxSense::Opposing ? magnitude : -magnitude;
}

CouplingTerms twin_coupling_terms(const TwinGeometry& g, const ExcitationModel& ex,
                                  double line_current) {
  ex.validate();
  const double k = coupling_scale(g, ex) * line_current;
  const auto t = log_terms(g);
  if (!g.shadowing()) {
    // Symmetric placements: each loop sees only its own line.
    return {k * t.own_line, k * t.own_line, k};
  }
  return {k * (t.own_line - t.cross_rear), k * (t.cross_fore + t.own_line), k};
}

double free_space_path_loss_db(double distance, double frequency_hz) {
  require_positive(distance, "distance");
  return 20.0 * std::log10(4.0 * kPi * distance / wavelength(frequency_hz));
}

double received_power_dbm(double p_tx_dbm, double distance, double frequency_hz,
                          const ExcitationModel& ex) {
  return p_tx_dbm + ex.reader_gain_dbi + ex.tag_gain_dbi -
         free_space_path_loss_db(distance, frequency_hz);
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double line_current(double p_tx_dbm, double distance, double frequency_hz,
                    const ExcitationModel& ex) {
  return ex.kappa * std::sqrt(dbm_to_watts(received_power_dbm(p_tx_dbm, distance, frequency_hz, ex)));
}

TwinCurrents tag_currents(const TwinGeometry& g, const ExcitationModel& ex, double p_tx_dbm,
                          double distance) {
  if (!PowerGrid::contains(p_tx_dbm)) throw ArgumentError("transmit power outside [10, 32.5] dBm");
  require_positive(distance, "distance");
  const double omega = g.tag().omega();
  const double i_l0 = line_current(p_tx_dbm, distance, g.tag().frequency(), ex);
  const auto k = twin_coupling_terms(g, ex, i_l0);
  const double baseline = i_l0 - ex.loop_loop_current;
  return {{baseline, k.rear, omega}, {baseline, k.fore, omega}};
}

std::pair<double, double> structure_oblivious_currents(double p_tx_dbm, double distance,
                                                       const ExcitationModel& ex,
                                                       double frequency_hz, double beta_mutual) {
  if (!PowerGrid::contains(p_tx_dbm)) throw ArgumentError("transmit power outside [10, 32.5] dBm");
  require_positive(distance, "distance");
  ex.validate();
  if (beta_mutual < 0.0) throw ArgumentError("beta * M must be non-negative");
  const double i0 = line_current(p_tx_dbm, distance, frequency_hz, ex);
  // [1 bm; bm 1] [I1; I2] = [I01; I02], solved by Cramer's rule.
  const double det = 1.0 - beta_mutual * beta_mutual;
  if (det == 0.0) throw ArgumentError("degenerate loop coupling");
  const double i1 = (i0 - beta_mutual * i0) / det;
  const double i2 = (i0 - beta_mutual * i0) / det;
  return {i1, i2};
}

std::optional<double> min_activation_power(const TwinGeometry& g, const ExcitationModel& ex,
                                           double distance, TagRole role) {
  require_positive(distance, "distance");
  for (int i = 0; i < PowerGrid::kPoints; ++i) {
    const double p = PowerGrid::at(i);
    const auto c = tag_currents(g, ex, p, distance);
    const double mag = role == TagRole::Rear ? c.rear.magnitude() : c.fore.magnitude();
    if (mag >= ex.threshold_current) return p;
  }
  return std::nullopt;
}

double PowerWindow::grid_midpoint() const {
  const double mid = 0.5 * (lower + upper);
  const double snapped = PowerGrid::kMin +
                         std::floor((mid - PowerGrid::kMin) / PowerGrid::kStep + 1e-9) * PowerGrid::kStep;
  return snapped < lower ? lower : snapped;
}

std::optional<PowerWindow> critical_window(const TwinGeometry& g, const ExcitationModel& ex,
                                           double distance) {
  const auto fore = min_activation_power(g, ex, distance, TagRole::Fore);
  const auto rear = min_activation_power(g, ex, distance, TagRole::Rear);
  if (!fore || !rear || *rear <= *fore) return std::nullopt;
  return PowerWindow{*fore, *rear};
}

double continuous_gap_db(const TwinGeometry& g, const ExcitationModel& ex) {
  return 20.0 * std::log10(magnitude_factor(g, ex, TagRole::Fore) /
                           magnitude_factor(g, ex, TagRole::Rear));
}

double continuous_min_power(const TwinGeometry& g, const ExcitationModel& ex, double distance,
                            TagRole role) {
  require_positive(distance, "distance");
  const auto k = twin_coupling_terms(g, ex, 1.0);
  const double c = role == TagRole::Rear ? k.rear : k.fore;
  // |I|^2 = (q - I_H)^2 + (c q)^2 = I_th^2, take the larger root in q = I_L0.
  const double ih = ex.loop_loop_current;
  const double ith = ex.threshold_current;
  const double qa = 1.0 + c * c;
  const double disc = ih * ih - qa * (ih * ih - ith * ith);
  if (disc < 0.0) return -INFINITY;
  const double q = (ih + std::sqrt(disc)) / qa;
  if (q <= 0.0) return -INFINITY;
  const double p_rx_w = (q / ex.kappa) * (q / ex.kappa);
  const double p_rx_dbm = 10.0 * std::log10(p_rx_w) + 30.0;
  return p_rx_dbm - ex.reader_gain_dbi - ex.tag_gain_dbi +
         free_space_path_loss_db(distance, g.tag().frequency());
}

}  // namespace twins::coupling
