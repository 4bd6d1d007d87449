#pragma once

#include <optional>

#include "bellsim/apparatus_sim.hpp"
#include "bellsim/diagnostics.hpp"

namespace bellsim::est {

/// What the tuning controller can do to an apparatus: turn the pump dials
/// and count coincidences at an analyzer setting. Each count() call costs
/// one acquisition.
class TuningBench {
 public:
  virtual ~TuningBench() = default;
  virtual void set_pump(double theta_l, double phi_l) = 0;
  virtual double count(double alpha, double beta) = 0;
  virtual double theta_l() const = 0;
  virtual double phi_l() const = 0;
  /// True when count() returns exact expectations; enables tight tolerances.
  virtual bool noiseless() const { return false; }
};

/// Drives a LiveSession with a fixed acquisition time per count.
class SessionBench final : public TuningBench {
 public:
  SessionBench(sim::LiveSession& session, double duration_t);
  void set_pump(double theta_l, double phi_l) override;
  double count(double alpha, double beta) override;
  double theta_l() const override;
  double phi_l() const override;

 private:
  sim::LiveSession& session_;
  double duration_t_;
};

/// Returns mean_coincidences() directly.
class NoiselessBench final : public TuningBench {
 public:
  NoiselessBench(sim::ApparatusConfig config, sim::PhotonSource source, double duration_t,
                 double theta_l, double phi_l);
  void set_pump(double theta_l, double phi_l) override;
  double count(double alpha, double beta) override;
  double theta_l() const override { return theta_l_; }
  double phi_l() const override { return phi_l_; }
  bool noiseless() const override { return true; }

 private:
  sim::ApparatusConfig config_;
  sim::PhotonSource source_;
  double duration_t_;
  double theta_l_;
  double phi_l_;
};

struct TuneResult {
  double theta_l_setting = 0.0;  ///< degrees
  double phi_l_setting = 0.0;    ///< degrees, in [−180, 180)
  std::optional<StateDiagnostics> diagnostics;
  bool converged = false;
  int acquisitions = 0;
};

/// Two-phase tuning at a fixed acquisition budget.
///
/// Phase 1 bisects the laser polarizer on [0°, 90°], probing the current
/// dial first, until |N(0,0) − N(90,90)| <= 2√(N(0,0) + N(90,90)). On a
/// noisy bench a longer confirmation count then corrects the dial once using
/// N(0,0) − N(90,90) ≈ −A cos 2θ_l.
/// Phase 2 probes the quartz plate at four quarter turns, takes the peak of
/// the sinusoid through them, and runs a golden-section search for the
/// maximum of N(45,45) in a bracket around that peak, three standard errors
/// wide (5° to 90°). The remaining budget goes into the four diagnostic settings.
///
/// A budget below 20 returns the initial dials unconverged.
TuneResult tune(TuningBench& bench, int step_budget);

}  // namespace bellsim::est
