#pragma once

#include <complex>

#include "bellsim/angle.hpp"
#include "bellsim/chsh_angles.hpp"

/// Quantum model of the polarization-entangled photon pair produced by a
/// two-crystal type-I downconversion source.
namespace bellsim::qm {

/// Polarization of the pump at the crystals. Degrees.
struct PumpConfig {
  double theta_l = 45.0;  ///< laser polarizer angle from vertical
  double phi_l = 0.0;     ///< phase added by the quartz plate
  double delta = 0.0;     ///< crystal phase between the two downconversion paths

  double total_phase() const noexcept { return phi_l + delta; }
};

/// cos(theta_l)|HH> + e^{i phi} sin(theta_l)|VV>, with an ensemble-averaged
/// cos(phi_m) multiplying the interference term.
///
/// The global phase is fixed so that amp_hh is real and nonnegative.
/// theta_l() is therefore always in [0°, 90°]; pumping at theta_l outside that
/// range flips the sign of the stored amp_vv, and cos_phi_m follows it.
class TwoPhotonState {
 public:
  /// Pure state; cos_phi_m is the cosine of the relative phase.
  TwoPhotonState(std::complex<double> amp_hh, std::complex<double> amp_vv);
  /// Dephased state; |cos_phi_m| <= 1.
  TwoPhotonState(std::complex<double> amp_hh, std::complex<double> amp_vv, double cos_phi_m);

  /// (|HH> + |VV>)/sqrt 2.
  static TwoPhotonState epr();
  /// Pure state with the given theta_l and relative phase, both degrees.
  static TwoPhotonState from_angles(double theta_l_deg, double phase_deg);

  std::complex<double> amp_hh() const noexcept { return amp_hh_; }
  std::complex<double> amp_vv() const noexcept { return amp_vv_; }
  double cos_phi_m() const noexcept { return cos_phi_m_; }

  /// atan2(|amp_vv|, amp_hh) in degrees, always in [0, 90].
  double theta_l_deg() const noexcept;
  /// arg(amp_vv) - arg(amp_hh) in degrees.
  double phase_deg() const noexcept;

  /// Same amplitudes, different interference visibility.
  TwoPhotonState with_cos_phi_m(double cos_phi_m) const;

 private:
  std::complex<double> amp_hh_;
  std::complex<double> amp_vv_;
  double cos_phi_m_;
};

/// P(VV), P(VH), P(HV), P(HH) for one pair of analyzer settings.
struct OutcomeProbabilities {
  double p_vv = 0.0;
  double p_vh = 0.0;
  double p_hv = 0.0;
  double p_hh = 0.0;

  double sum() const noexcept { return p_vv + p_vh + p_hv + p_hh; }
  /// Correlation E = P_VV + P_HH - P_VH - P_HV.
  double correlation() const noexcept { return p_vv + p_hh - p_vh - p_hv; }
};

/// Parameters of the mean-coincidence model A * P_VV + C.
struct CountModelParams {
  double a_pairs = 0.0;   ///< expected pairs in the window
  double c_offset = 0.0;  ///< setting-independent background coincidences
  double theta_l = 45.0;  ///< degrees
  double cos_phi_m = 1.0;

  void validate() const;
};

/// Pump polarization to downconverted pair. |V>_p -> |HH>, |H>_p -> e^{iΔ}|VV>.
TwoPhotonState pump_state(double theta_l_deg, double phi_l_deg, double delta_deg);
inline TwoPhotonState pump_state(const PumpConfig& pump) {
  return pump_state(pump.theta_l, pump.phi_l, pump.delta);
}

/// Probability that both photons pass (register V) at analyzer angles alpha, beta.
double prob_vv(const TwoPhotonState& state, Angle alpha, Angle beta);

/// Same, from θ_l (degrees) and the interference visibility directly.
double prob_vv(double theta_l_deg, double cos_phi_m, Angle alpha, Angle beta);

/// Closed form for the maximally entangled state: ½cos²(β−α).
double prob_vv_epr(Angle alpha, Angle beta);

OutcomeProbabilities outcome_probs(const TwoPhotonState& state, Angle alpha, Angle beta);

/// Idler V probability after any signal-side measurement on the EPR state.
/// Independent of both angles.
double marginal_prob_v(Angle beta, Angle alpha = Angle::degrees(0.0));

/// Mean coincidence count A * P_VV(α, β; θ_l, cos φ_m) + C.
double expected_counts(const CountModelParams& params, Angle alpha, Angle beta);

double qm_E(const TwoPhotonState& state, Angle alpha, Angle beta);
double qm_S(const TwoPhotonState& state, const ChshAngles& angles);

}  // namespace bellsim::qm
