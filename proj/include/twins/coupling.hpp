#pragma once

// Near-field coupling between the two tags of a Twin pair.
//
// Each tag is decomposed into a line (electric dipole) and a rectangle (the
// T-match loop, magnetic dipole). Currents on the lines induce quadrature
// currents in both loops; the loop that sees the aiding flux of the other
// tag's line (the Rear-tag) ends up with the smaller current and therefore
// needs more transmit power to wake up.

#include <optional>
#include <string_view>
#include <utility>

namespace twins::coupling {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMu0 = 4.0e-7 * kPi;

/// Reader transmit-power grid (dBm).
struct PowerGrid {
  static constexpr double kMin = 10.0;
  static constexpr double kMax = 32.5;
  static constexpr double kStep = 0.25;
  static constexpr int kPoints = 91;  // (kMax - kMin) / kStep + 1

  static constexpr double at(int i) { return kMin + kStep * i; }
  static bool contains(double p_dbm) { return p_dbm >= kMin - 1e-9 && p_dbm <= kMax + 1e-9; }
};

double wavelength(double frequency_hz);

/// Near/far-field boundary 2 D^2 / lambda.
double rayleigh_length(double antenna_size, double wavelength);

class TagGeometry {
 public:
  /// Throws ArgumentError on non-positive dimensions or line_gap > loop_length.
  TagGeometry(double loop_width, double loop_length, double line_gap, double dipole_length,
              double frequency_hz);

  /// Defaults: 5 mm x 10 mm loop, 6 mm gap, half-wave meandered dipole at 915 MHz.
  static TagGeometry reference();

  double loop_width() const { return a_; }
  double loop_length() const { return b_; }
  double line_gap() const { return r_; }
  double dipole_length() const { return length_; }
  double frequency() const { return f_; }
  double omega() const { return 2.0 * kPi * f_; }

 private:
  double a_, b_, r_, length_, f_;
};

/// Relative placements of the two tags. A-D put the Rear-tag's IC side against
/// the other tag (shadowing); E-H do not.
enum class Placement { A, B, C, D, E, F, G, H };

bool is_shadowing(Placement p);
char placement_letter(Placement p);
std::optional<Placement> parse_placement(std::string_view s);

class TwinGeometry {
 public:
  /// separation: distance between the Rear loop and the Fore line (~ tag spacing d).
  TwinGeometry(TagGeometry tag, double separation, Placement placement = Placement::A);

  const TagGeometry& tag() const { return tag_; }
  double separation() const { return l_; }
  Placement placement() const { return placement_; }
  bool shadowing() const { return is_shadowing(placement_); }

  TwinGeometry with_separation(double l) const { return TwinGeometry(tag_, l, placement_); }
  TwinGeometry with_placement(Placement p) const { return TwinGeometry(tag_, l_, p); }

 private:
  TagGeometry tag_;
  double l_;
  Placement placement_;
};

struct ExcitationModel {
  double mu0 = kMu0;
  double resistance = 50.0;           // equivalent loop resistance (ohm)
  double threshold_current = 1.0e-3;  // IC activation current (A)
  double kappa = 1.0;                 // line current per sqrt(received watt)
  double reader_gain_dbi = 6.0;
  double tag_gain_dbi = 2.0;
  double loop_loop_current = 0.0;     // I_H, subtracted from both baselines

  void validate() const;
};

/// Complex amplitude split into the harvested (real) part and the coupled
/// quadrature part; the e^{jwt} time factor is not stored.
struct PhasorCurrent {
  double baseline = 0.0;
  double quadrature = 0.0;
  double omega = 0.0;

  double magnitude() const;
};

/// (mu0 a / 2 pi) ln((gap + b) / gap)
double mutual_inductance_line_loop(double width, double gap, double length, double mu0 = kMu0);

enum class FluxSense { Opposing, Aiding };

/// Quadrature current coupled into a loop: +w M I / R when fluxes oppose,
/// negated when they aid.
double induced_current(double mutual, double line_current, double omega, double resistance,
                       FluxSense sense);

/// k1 (Rear loop S1) and k2 (Fore loop S2), excluding the shared -I_H term.
struct CouplingTerms {
  double rear = 0.0;
  double fore = 0.0;
  double scale = 0.0;  // K = mu0 a w I_L0 / (2 pi R)
};

CouplingTerms twin_coupling_terms(const TwinGeometry& g, const ExcitationModel& ex,
                                  double line_current);

double free_space_path_loss_db(double distance, double frequency_hz);
double received_power_dbm(double p_tx_dbm, double distance, double frequency_hz,
                          const ExcitationModel& ex);
double dbm_to_watts(double dbm);

/// Line current I_L0 induced by the reader at distance D.
double line_current(double p_tx_dbm, double distance, double frequency_hz,
                    const ExcitationModel& ex);

struct TwinCurrents {
  PhasorCurrent rear;  // S1
  PhasorCurrent fore;  // S2
};

TwinCurrents tag_currents(const TwinGeometry& g, const ExcitationModel& ex, double p_tx_dbm,
                          double distance);

/// The circular-loop baseline: I1 = I01 - beta M I2, I2 = I02 - beta M I1 with
/// I01 = I02. Always returns identical currents.
std::pair<double, double> structure_oblivious_currents(double p_tx_dbm, double distance,
                                                       const ExcitationModel& ex,
                                                       double frequency_hz = 915.0e6,
                                                       double beta_mutual = 0.1);

enum class TagRole { Fore, Rear };

/// Smallest grid power activating the tag, or nullopt when none does.
std::optional<double> min_activation_power(const TwinGeometry& g, const ExcitationModel& ex,
                                           double distance, TagRole role);

/// [lower, upper): Fore readable, Rear not.
struct PowerWindow {
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
  /// Window midpoint snapped down to the power grid.
  double grid_midpoint() const;
};

std::optional<PowerWindow> critical_window(const TwinGeometry& g, const ExcitationModel& ex,
                                           double distance);

/// Fore/Rear minimum-power gap without grid quantization (dB). Independent of
/// kappa and the activation threshold because both currents scale with I_L0.
double continuous_gap_db(const TwinGeometry& g, const ExcitationModel& ex);

/// Minimum transmit power (continuous, may exceed the grid) for `role`.
double continuous_min_power(const TwinGeometry& g, const ExcitationModel& ex, double distance,
                            TagRole role);

// Calibration ----------------------------------------------------------------

struct CalibrationTargets {
  double separation = 0.010;   // d where the Fore/Rear gap is pinned
  double distance = 2.0;       // reader distance for the gap measurement
  double gap_db = 10.0;
  double max_distance = 5.8;   // deployment limit at full power
  double max_power_dbm = PowerGrid::kMax;
};

/// Solves the loop resistance so the continuous gap at the target separation
/// equals gap_db, then the activation threshold so the Rear-tag needs exactly
/// max_power_dbm at max_distance. Throws CalibrationError if the gap target
/// exceeds what the loop geometry can produce.
ExcitationModel calibrate_excitation(const TagGeometry& tag, const ExcitationModel& base,
                                     const CalibrationTargets& targets = {});

/// Largest gap (dB) reachable at separation l as the coupling scale grows.
double saturated_gap_db(const TagGeometry& tag, double separation);

}  // namespace twins::coupling
