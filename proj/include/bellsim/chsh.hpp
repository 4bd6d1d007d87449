#pragma once

#include <array>
#include <span>
#include <vector>

#include "bellsim/apparatus_sim.hpp"
#include "bellsim/chsh_angles.hpp"

namespace bellsim::est {

/// Coincidence counts for the sixteen CHSH cells, laid out as
/// counts[alpha_index][beta_index] with alpha in {a, a', a+90, a'+90} and
/// beta in {b, b', b+90, b'+90} (the order of chsh_settings()).
/// Entries may be real-valued so that ideal expected counts can be analyzed.
using ChshTable = std::array<std::array<double, 4>, 4>;

/// Sixteen validated records, one per (alpha, beta) cell, with equal durations.
/// Cells are matched modulo 180° to within 1e-6°.
class ChshRun {
 public:
  ChshRun(std::vector<sim::CountRecord> records, ChshAngles angles = ChshAngles::canonical());

  const ChshAngles& angles() const noexcept { return angles_; }
  /// Records reordered to chsh_settings() order.
  const std::vector<sim::CountRecord>& records() const noexcept { return records_; }
  ChshTable table() const;

 private:
  std::vector<sim::CountRecord> records_;
  ChshAngles angles_;
};

struct ChshResult {
  double e_ab = 0.0;
  double e_abp = 0.0;
  double e_apb = 0.0;
  double e_apbp = 0.0;
  double s_value = 0.0;
  double sigma_s = 0.0;

  /// (S − 2)/σ_S for S > 0, (−2 − S)/σ_S for S < 0.
  double violation_significance() const;
  bool violates_bound() const { return s_value > 2.0 || s_value < -2.0; }

  friend bool operator==(const ChshResult&, const ChshResult&) = default;
};

struct ChshOptions {
  /// Add one to every count before the σ_S propagation. Off by default.
  bool add_one_smoothing = false;
};

/// E from four coincidence counts: (N_ab + N_a⊥b⊥ − N_ab⊥ − N_a⊥b) / total.
double compute_E(double n_ab, double n_apbp, double n_abp, double n_apb);

ChshResult compute_S(const ChshTable& counts, const ChshOptions& options = {});
ChshResult compute_S(const ChshRun& run, const ChshOptions& options = {});

/// σ_S = sqrt(Σ N_i (∂S/∂N_i)²) with analytic partials.
double sigma_S(const ChshTable& counts, const ChshOptions& options = {});
double sigma_S(const ChshRun& run, const ChshOptions& options = {});

/// ∂S/∂N for every cell, in table layout.
ChshTable s_partials(const ChshTable& counts);

/// The chsh S statistic alone (no error propagation; zeros allowed as long as
/// every E is defined).
double s_statistic(const ChshTable& counts);

}  // namespace bellsim::est
