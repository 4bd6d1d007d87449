#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bellsim/apparatus_sim.hpp"
#include "bellsim/errors.hpp"

namespace bellsim::est {

/// One point of a polarization-correlation scan. `counts` may be a real
/// expected value (noiseless synthetic data) or an observed integer.
struct ScanPoint {
  double alpha = 0.0;  ///< degrees
  double beta = 0.0;   ///< degrees
  double counts = 0.0;
};

std::vector<ScanPoint> to_scan(std::span<const sim::CountRecord> records);

struct FitParameters {
  double a_pairs = 0.0;
  double c_offset = 0.0;
  double theta_l = 0.0;    ///< degrees
  double cos_phi_m = 0.0;
  std::optional<double> beta_shift;  ///< degrees; fitted only on request

  friend bool operator==(const FitParameters&, const FitParameters&) = default;
};

struct FitResult {
  FitParameters values;
  /// Standard errors from the inverse of the weighted normal matrix.
  FitParameters errors;
  double chi_square = 0.0;
  int dof = 0;
  int iterations = 0;
  /// Infinity norm of the projected gradient of ½χ² at the solution.
  double gradient_norm = 0.0;

  double phi_m() const;  ///< degrees

  friend bool operator==(const FitResult&, const FitResult&) = default;
};

/// The solver ran out of iterations; carries the best point found.
class FitConvergenceError : public RuntimeError {
 public:
  FitConvergenceError(const std::string& what, FitResult best)
      : RuntimeError(what), best_(std::move(best)) {}
  const FitResult& best() const noexcept { return best_; }

 private:
  FitResult best_;
};

struct FitOptions {
  bool fit_beta_shift = false;
  int max_iterations = 500;
};

/// Model A·P_VV(α, β + shift; θ_l, cos φ_m) + C at one point.
double nmodel(const FitParameters& p, double alpha_deg, double beta_deg);

/// Weighted least squares of the mean-count model, minimizing
/// Σ (N_i − model_i)² / max(N_i, 1). Bounded Levenberg–Marquardt started
/// from θ_l ∈ {20°, 45°, 70°}; the lowest χ² wins.
///
/// Bounds: A, C >= 0; θ_l in [0°, 90°]; cos φ_m in [−1, 1]; shift in [−20°, 20°].
/// Needs >= 6 points covering >= 2 distinct α and >= 4 distinct β.
FitResult fit_nmodel(std::span<const ScanPoint> scan, const FitOptions& options = {});
FitResult fit_nmodel(std::span<const sim::CountRecord> scan, bool fit_beta_shift);

}  // namespace bellsim::est
