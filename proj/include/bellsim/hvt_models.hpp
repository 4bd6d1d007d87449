#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bellsim/angle.hpp"
#include "bellsim/chsh_angles.hpp"
#include "bellsim/rng.hpp"

/// Local realistic hidden-variable theories: a shared polarization λ in
/// [0°, 180°) with density ρ(λ), and deterministic ±1 outcomes A(λ, α),
/// B(λ, β) at each analyzer.
namespace bellsim::hvt {

inline constexpr std::size_t kDefaultQuadraturePoints = 100000;
inline constexpr std::size_t kMinQuadraturePoints = 1000;

/// ±1 as a step function of the folded distance d = |λ − γ| (mod 180°,
/// folded into [0°, 90°]). `initial` applies on [0, breakpoints[0]] and the
/// sign flips at each breakpoint; d equal to a breakpoint stays on the lower
/// side.
struct OutcomeRule {
  int initial = +1;
  std::vector<double> breakpoints_deg;

  int operator()(double lambda_deg, double analyzer_deg) const;

  friend bool operator==(const OutcomeRule&, const OutcomeRule&) = default;
};

/// A tabulated strategy: ρ is piecewise constant over equal bins spanning
/// [0°, 180°), in units of probability per degree.
class HvtStrategy {
 public:
  HvtStrategy(std::vector<double> density_bins, OutcomeRule outcome_a, OutcomeRule outcome_b,
              std::optional<std::uint64_t> seed = std::nullopt);

  double density(double lambda_deg) const;
  int outcome_a(double lambda_deg, double alpha_deg) const { return rule_a_(lambda_deg, alpha_deg); }
  int outcome_b(double lambda_deg, double beta_deg) const { return rule_b_(lambda_deg, beta_deg); }

  const std::vector<double>& density_bins() const noexcept { return bins_; }
  double bin_width_deg() const noexcept { return 180.0 / static_cast<double>(bins_.size()); }
  const OutcomeRule& rule_a() const noexcept { return rule_a_; }
  const OutcomeRule& rule_b() const noexcept { return rule_b_; }
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  /// ∫ρ dλ, computed exactly from the bins.
  double density_integral() const;
  /// Throws ValidationError unless ρ >= 0 and ∫ρ = 1 within 1e-9.
  void validate() const;

  friend bool operator==(const HvtStrategy&, const HvtStrategy&) = default;

 private:
  std::vector<double> bins_;
  OutcomeRule rule_a_;
  OutcomeRule rule_b_;
  std::optional<std::uint64_t> seed_;
};

/// Uniform λ; both photons register V iff λ is within 45° of the analyzer axis.
HvtStrategy simple_hvt();

/// Seeded random strategy: 36-bin random density, one to three random
/// thresholds per side, random initial sign.
HvtStrategy random_hvt(std::uint64_t seed);

/// Closed-form P_VV of simple_hvt: ½ − d/180°.
double hvt_prob_vv(Angle alpha, Angle beta);
/// Closed-form E of simple_hvt: 1 − 4d/180°.
double simple_hvt_E(Angle alpha, Angle beta);

/// Midpoint-rule ∫ A·B·ρ dλ.
double hvt_E(const HvtStrategy& strategy, Angle alpha, Angle beta,
             std::size_t quadrature_points = kDefaultQuadraturePoints);
/// Same integral evaluated exactly, segment by segment between every
/// discontinuity of the integrand.
double hvt_E_exact(const HvtStrategy& strategy, Angle alpha, Angle beta);

/// Midpoint-rule ∫ (1+A)(1+B)/4 · ρ dλ.
double hvt_prob_vv_quadrature(const HvtStrategy& strategy, Angle alpha, Angle beta,
                              std::size_t quadrature_points = kDefaultQuadraturePoints);

double hvt_S(const HvtStrategy& strategy, const ChshAngles& angles,
             std::size_t quadrature_points = kDefaultQuadraturePoints);
double hvt_S_exact(const HvtStrategy& strategy, const ChshAngles& angles);

/// s(λ) = A(a)[B(b) − B(b')] + A(a')[B(b) + B(b')]; always ±2.
int single_pair_s(const HvtStrategy& strategy, double lambda_deg, const ChshAngles& angles);

/// Draws λ from ρ.
double sample_lambda(const HvtStrategy& strategy, Engine& engine);

std::string to_json(const HvtStrategy& strategy);
HvtStrategy strategy_from_json(std::string_view text);

}  // namespace bellsim::hvt
