#include "bellsim/polarization_qm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bellsim/errors.hpp"

namespace bellsim {

std::array<std::pair<double, double>, 16> chsh_settings(const ChshAngles& angles) {
  const std::array<double, 4> alphas{angles.a, angles.a_prime, angles.a + 90.0,
                                     angles.a_prime + 90.0};
  const std::array<double, 4> betas{angles.b, angles.b_prime, angles.b + 90.0,
                                    angles.b_prime + 90.0};
  std::array<std::pair<double, double>, 16> out{};
  std::size_t k = 0;
  for (double alpha : alphas) {
    for (double beta : betas) out[k++] = {alpha, beta};
  }
  return out;
}

namespace qm {
namespace {

constexpr double kNormTolerance = 1e-12;

double vv_kernel(double theta_l, double cos_phi_m, double alpha, double beta) {
  const double sa = std::sin(alpha), ca = std::cos(alpha);
  const double sb = std::sin(beta), cb = std::cos(beta);
  const double st = std::sin(theta_l), ct = std::cos(theta_l);
  const double p = sa * sa * sb * sb * ct * ct + ca * ca * cb * cb * st * st +
                   0.25 * std::sin(2.0 * alpha) * std::sin(2.0 * beta) *
                       std::sin(2.0 * theta_l) * cos_phi_m;
  // Nonnegative analytically; only roundoff can push it below zero.
  return p < 0.0 && p > -1e-12 ? 0.0 : p;
}

std::complex<double> unit_phase(double rad) { return std::polar(1.0, rad); }

}  // namespace

TwoPhotonState::TwoPhotonState(std::complex<double> amp_hh, std::complex<double> amp_vv)
    : TwoPhotonState(amp_hh, amp_vv, 1.0) {
  if (std::abs(amp_hh_) > 0.0 && std::abs(amp_vv_) > 0.0) {
    cos_phi_m_ = std::cos(std::arg(amp_vv_) - std::arg(amp_hh_));
  }
}

TwoPhotonState::TwoPhotonState(std::complex<double> amp_hh, std::complex<double> amp_vv,
                               double cos_phi_m)
    : amp_hh_(amp_hh), amp_vv_(amp_vv), cos_phi_m_(cos_phi_m) {
  const double norm = std::norm(amp_hh_) + std::norm(amp_vv_);
  if (std::abs(norm - 1.0) > kNormTolerance) {
    std::ostringstream msg;
    msg << "two-photon state not normalized: |a_hh|^2 + |a_vv|^2 = " << norm;
    throw ValidationError(msg.str());
  }
  if (!(std::abs(cos_phi_m_) <= 1.0)) {
    throw ValidationError("cos_phi_m must lie in [-1, 1]");
  }
  // Rotate away the global phase so amp_hh is real and nonnegative.
  if (std::abs(amp_hh_) > 0.0) {
    const std::complex<double> undo = std::conj(amp_hh_) / std::abs(amp_hh_);
    amp_hh_ = std::abs(amp_hh_);
    amp_vv_ *= undo;
  }
}

TwoPhotonState TwoPhotonState::epr() {
  const double r = 1.0 / std::sqrt(2.0);
  return TwoPhotonState(r, r);
}

TwoPhotonState TwoPhotonState::from_angles(double theta_l_deg, double phase_deg) {
  const double theta = deg_to_rad(theta_l_deg);
  return TwoPhotonState(std::cos(theta), std::sin(theta) * unit_phase(deg_to_rad(phase_deg)));
}

double TwoPhotonState::theta_l_deg() const noexcept {
  return rad_to_deg(std::atan2(std::abs(amp_vv_), amp_hh_.real()));
}

double TwoPhotonState::phase_deg() const noexcept { return rad_to_deg(std::arg(amp_vv_)); }

TwoPhotonState TwoPhotonState::with_cos_phi_m(double cos_phi_m) const {
  return TwoPhotonState(amp_hh_, amp_vv_, cos_phi_m);
}

void CountModelParams::validate() const {
  if (!(a_pairs >= 0.0)) throw ValidationError("a_pairs must be >= 0");
  if (!(c_offset >= 0.0)) throw ValidationError("c_offset must be >= 0");
  if (!(std::abs(cos_phi_m) <= 1.0)) throw ValidationError("cos_phi_m must lie in [-1, 1]");
  if (!std::isfinite(theta_l)) throw ValidationError("theta_l must be finite");
}

TwoPhotonState pump_state(double theta_l_deg, double phi_l_deg, double delta_deg) {
  const double theta = Angle::degrees(theta_l_deg).rad();
  const double phi = deg_to_rad(phi_l_deg + delta_deg);
  const std::complex<double> hh = std::cos(theta);
  const std::complex<double> vv = std::sin(theta) * unit_phase(phi);
  // Canonical phase makes both stored magnitudes nonnegative, which moves the
  // relative phase by pi whenever sin 2θ_l < 0.
  const double cos_phi = std::sin(2.0 * theta) < 0.0 ? -std::cos(phi) : std::cos(phi);
  return TwoPhotonState(hh, vv, cos_phi);
}

double prob_vv(const TwoPhotonState& state, Angle alpha, Angle beta) {
  return vv_kernel(deg_to_rad(state.theta_l_deg()), state.cos_phi_m(), alpha.rad(), beta.rad());
}

double prob_vv(double theta_l_deg, double cos_phi_m, Angle alpha, Angle beta) {
  return vv_kernel(deg_to_rad(theta_l_deg), cos_phi_m, alpha.rad(), beta.rad());
}

double prob_vv_epr(Angle alpha, Angle beta) {
  const double c = std::cos(beta.rad() - alpha.rad());
  return 0.5 * c * c;
}

OutcomeProbabilities outcome_probs(const TwoPhotonState& state, Angle alpha, Angle beta) {
  const Angle alpha_perp = alpha.perpendicular();
  const Angle beta_perp = beta.perpendicular();
  return {prob_vv(state, alpha, beta), prob_vv(state, alpha, beta_perp),
          prob_vv(state, alpha_perp, beta), prob_vv(state, alpha_perp, beta_perp)};
}

double marginal_prob_v(Angle beta, Angle alpha) {
  // ½|<V_β|V_α>|² + ½|<V_β|H_α>|²
  const double c = std::cos(beta.rad() - alpha.rad());
  const double s = std::sin(beta.rad() - alpha.rad());
  return 0.5 * (c * c + s * s);
}

double expected_counts(const CountModelParams& params, Angle alpha, Angle beta) {
  params.validate();
  return params.a_pairs *
             vv_kernel(deg_to_rad(params.theta_l), params.cos_phi_m, alpha.rad(), beta.rad()) +
         params.c_offset;
}

double qm_E(const TwoPhotonState& state, Angle alpha, Angle beta) {
  return outcome_probs(state, alpha, beta).correlation();
}

double qm_S(const TwoPhotonState& state, const ChshAngles& angles) {
  const auto a = Angle::degrees(angles.a);
  const auto ap = Angle::degrees(angles.a_prime);
  const auto b = Angle::degrees(angles.b);
  const auto bp = Angle::degrees(angles.b_prime);
  return qm_E(state, a, b) - qm_E(state, a, bp) + qm_E(state, ap, b) + qm_E(state, ap, bp);
}

}  // namespace qm
}  // namespace bellsim
