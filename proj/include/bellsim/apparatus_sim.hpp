#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "bellsim/polarization_qm.hpp"
#include "bellsim/rng.hpp"

/// Monte Carlo model of the coincidence-counting apparatus.
namespace bellsim::sim {

enum class PhaseSpreadMode {
  /// cos φ_m multiplies the interference term directly.
  scalar_cos_phi_m,
  /// Each pair draws its own φ uniformly around the state's phase with the
  /// half-width that reproduces the state's cos φ_m on average.
  per_pair_sampling,
};

/// Rates are per second; the window tau is in seconds; beta_offset in degrees.
struct ApparatusConfig {
  double pair_rate = 0.0;
  double singles_rate_a = 0.0;
  double singles_rate_b = 0.0;
  double coincidence_window_tau = 0.0;
  double background_coinc_rate = 0.0;
  double beta_offset = 0.0;  ///< systematic miscalibration of analyzer B
  PhaseSpreadMode phase_spread_mode = PhaseSpreadMode::scalar_cos_phi_m;
  std::uint64_t rng_seed = 0;

  void validate() const;
  friend bool operator==(const ApparatusConfig&, const ApparatusConfig&) = default;
};

/// One acquisition, as a row of a count table.
struct CountRecord {
  double alpha = 0.0;  ///< degrees
  double beta = 0.0;   ///< degrees
  double duration_t = 0.0;  ///< seconds
  std::int64_t n_a = 0;
  std::int64_t n_b = 0;
  std::int64_t n_coinc = 0;

  friend bool operator==(const CountRecord&, const CountRecord&) = default;
};

/// Mean accidental coincidences τ·N_A·N_B/T.
double accidental_mean(double tau, double n_a, double n_b, double duration_t);

/// Mean of n_coinc for one acquisition: A·P_VV(α, β + offset) + C plus
/// accidentals from the mean singles.
double mean_coincidences(const ApparatusConfig& config, const qm::TwoPhotonState& state,
                         double alpha, double beta, double duration_t);

/// Half-width w (radians) with <cos φ> over U[φ0−w, φ0+w] = cos φ_m, given
/// the state's pure phase φ0. Zero when the state is already pure.
double phase_half_width(const qm::TwoPhotonState& state);

/// Draws one CountRecord. All randomness comes from `engine`.
CountRecord acquire(const ApparatusConfig& config, const qm::TwoPhotonState& state, double alpha,
                    double beta, double duration_t, Engine& engine);

/// One acquisition per setting, in order, on a single stream seeded from
/// config.rng_seed.
std::vector<CountRecord> run_protocol(const ApparatusConfig& config,
                                      const qm::TwoPhotonState& state,
                                      std::span<const std::pair<double, double>> settings,
                                      double duration_t);

/// What the source produces for given pump dial settings. coherence is the
/// ensemble average <cos(φ − φ̄)> of the crystal phase spread, so the
/// effective cos φ_m is coherence · cos(φ_l + Δ).
struct PhotonSource {
  double crystal_phase = 0.0;  ///< Δ, degrees
  double coherence = 1.0;

  qm::TwoPhotonState state_for(double theta_l, double phi_l) const;
  void validate() const;
  friend bool operator==(const PhotonSource&, const PhotonSource&) = default;
};

/// Dial positions on the bench. Degrees.
struct BenchSettings {
  double theta_l = 45.0;
  double phi_l = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  friend bool operator==(const BenchSettings&, const BenchSettings&) = default;
};

/// An interactive apparatus with its own random stream, current dials and
/// full acquisition history. Steps are strictly sequential: a second step
/// while one is in flight throws SequencingError instead of queueing.
class LiveSession {
 public:
  LiveSession(ApparatusConfig config, PhotonSource source, BenchSettings initial = {});

  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  /// Holds the session's step slot; construction throws if it is taken.
  class StepGuard {
   public:
    explicit StepGuard(LiveSession& session);
    ~StepGuard();
    StepGuard(const StepGuard&) = delete;
    StepGuard& operator=(const StepGuard&) = delete;

   private:
    LiveSession& session_;
  };

  /// Moves the analyzers to (alpha, beta) and acquires for duration_t.
  CountRecord step(double alpha, double beta, double duration_t);
  /// Acquires at the current analyzer dials.
  CountRecord acquire(double duration_t);
  /// Steps through every setting while holding the step slot throughout.
  std::vector<CountRecord> run_protocol(std::span<const std::pair<double, double>> settings,
                                        double duration_t);

  void set_settings(const BenchSettings& settings);
  void set_pump(double theta_l, double phi_l);
  BenchSettings settings() const;
  qm::TwoPhotonState current_state() const;

  std::vector<CountRecord> history() const;
  /// Sum of expected pairs (pair_rate · T) over all steps so far.
  double photon_budget() const;

  const ApparatusConfig& config() const noexcept { return config_; }
  const PhotonSource& source() const noexcept { return source_; }

 private:
  CountRecord step_locked(double alpha, double beta, double duration_t);

  const ApparatusConfig config_;
  const PhotonSource source_;
  mutable std::mutex mutex_;  // guards everything below
  Engine engine_;
  BenchSettings settings_;
  std::vector<CountRecord> history_;
  double budget_ = 0.0;
  std::atomic<bool> busy_{false};
};

}  // namespace bellsim::sim
