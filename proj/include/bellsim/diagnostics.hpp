#pragma once

namespace bellsim::est {

/// State parameters inferred from four coincidence counts.
struct StateDiagnostics {
  double c_offset = 0.0;
  double a_pairs = 0.0;
  double theta_l = 0.0;    ///< degrees, in (0, 90)
  double cos_phi_m = 0.0;  ///< clamped to [-1, 1]
  double phi_m = 0.0;      ///< degrees, acos(cos_phi_m)
  /// The raw interference estimate fell outside [-1, 1] and was clamped.
  bool interference_out_of_range = false;
  /// Unclamped value of the interference estimate.
  double raw_cos_phi_m = 0.0;

  friend bool operator==(const StateDiagnostics&, const StateDiagnostics&) = default;
};

/// Inverts the mean-count model at the settings (0,0), (90,90), (0,90) and
/// (45,45):
///
///   C = N(0,90)
///   A = N(0,0) + N(90,90) − 2C
///   tan²θ_l = (N(90,90) − C) / (N(0,0) − C)
///   cos φ_m = [4(N(45,45) − C)/A − 1] / sin 2θ_l
///
/// Under the count model N(0,0) − C = A sin²θ_l, so the θ_l returned here is
/// 90° minus the model's θ_l; cos φ_m is unaffected.
///
/// Requires n00 > n090 and n9090 > n090; throws ValidationError naming the
/// failed inequality otherwise. Counts may be non-integer (expected values).
StateDiagnostics diagnose_state(double n00, double n9090, double n090, double n4545);

}  // namespace bellsim::est
