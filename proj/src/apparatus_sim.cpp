#include "bellsim/apparatus_sim.hpp"

#include <cmath>
#include <sstream>

#include "bellsim/errors.hpp"

namespace bellsim::sim {
namespace {

void require_positive_duration(double duration_t) {
  if (!(duration_t > 0.0) || !std::isfinite(duration_t)) {
    std::ostringstream msg;
    msg << "acquisition duration must be > 0 s (got " << duration_t << ")";
    throw ValidationError(msg.str());
  }
}

std::int64_t poisson(double mean, Engine& engine) {
  if (mean <= 0.0) return 0;
  // libstdc++ samples exactly (inversion for small means, Devroye's
  // rejection otherwise); no normal approximation at any mean.
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(engine);
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

}  // namespace

void ApparatusConfig::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(name) + " must be a finite value >= 0");
    }
  };
  nonneg(pair_rate, "pair_rate");
  nonneg(singles_rate_a, "singles_rate_a");
  nonneg(singles_rate_b, "singles_rate_b");
  nonneg(coincidence_window_tau, "coincidence_window_tau");
  nonneg(background_coinc_rate, "background_coinc_rate");
  if (!(std::abs(beta_offset) <= 10.0)) {
    throw ValidationError("beta_offset must lie in [-10, 10] degrees");
  }
}

double accidental_mean(double tau, double n_a, double n_b, double duration_t) {
  require_positive_duration(duration_t);
  return tau * n_a * n_b / duration_t;
}

double mean_coincidences(const ApparatusConfig& config, const qm::TwoPhotonState& state,
                         double alpha, double beta, double duration_t) {
  config.validate();
  require_positive_duration(duration_t);
  const qm::CountModelParams params{config.pair_rate * duration_t,
                                    config.background_coinc_rate * duration_t,
                                    state.theta_l_deg(), state.cos_phi_m()};
  const double true_and_background = qm::expected_counts(
      params, Angle::degrees(alpha), Angle::degrees(beta + config.beta_offset));
  return true_and_background +
         accidental_mean(config.coincidence_window_tau, config.singles_rate_a * duration_t,
                         config.singles_rate_b * duration_t, duration_t);
}

double phase_half_width(const qm::TwoPhotonState& state) {
  const double cos_center = std::cos(deg_to_rad(state.phase_deg()));
  const double target = state.cos_phi_m();
  if (std::abs(cos_center) < 1e-12) {
    if (std::abs(target) > 1e-12) {
      throw ValidationError("per-pair phase sampling: state phase is ±90° but cos_phi_m != 0");
    }
    return 0.0;
  }
  const double ratio = target / cos_center;
  if (ratio > 1.0 + 1e-12 || ratio < 0.0) {
    throw ValidationError(
        "per-pair phase sampling cannot reproduce this cos_phi_m around the state's phase");
  }
  if (ratio >= 1.0) return 0.0;
  // sinc is strictly decreasing from 1 to 0 on [0, π].
  double lo = 0.0, hi = kPi;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sinc(mid) > ratio ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CountRecord acquire(const ApparatusConfig& config, const qm::TwoPhotonState& state, double alpha,
                    double beta, double duration_t, Engine& engine) {
  config.validate();
  require_positive_duration(duration_t);

  CountRecord rec{alpha, beta, duration_t, 0, 0, 0};
  const double mean_a = config.singles_rate_a * duration_t;
  const double mean_b = config.singles_rate_b * duration_t;
  rec.n_a = poisson(mean_a, engine);
  rec.n_b = poisson(mean_b, engine);

  const double accidentals =
      accidental_mean(config.coincidence_window_tau, mean_a, mean_b, duration_t);
  const double background = config.background_coinc_rate * duration_t;

  if (config.phase_spread_mode == PhaseSpreadMode::scalar_cos_phi_m) {
    rec.n_coinc = poisson(mean_coincidences(config, state, alpha, beta, duration_t), engine);
    return rec;
  }

  const double width = phase_half_width(state);
  const double center = deg_to_rad(state.phase_deg());
  const double theta_l = state.theta_l_deg();
  const Angle a = Angle::degrees(alpha);
  const Angle b = Angle::degrees(beta + config.beta_offset);
  std::uniform_real_distribution<double> phase(center - width, center + width);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::int64_t pairs = poisson(config.pair_rate * duration_t, engine);
  std::int64_t detected = 0;
  for (std::int64_t i = 0; i < pairs; ++i) {
    const double phi = width > 0.0 ? phase(engine) : center;
    if (unit(engine) < qm::prob_vv(theta_l, std::cos(phi), a, b)) ++detected;
  }
  rec.n_coinc = detected + poisson(background + accidentals, engine);
  return rec;
}

std::vector<CountRecord> run_protocol(const ApparatusConfig& config,
                                      const qm::TwoPhotonState& state,
                                      std::span<const std::pair<double, double>> settings,
                                      double duration_t) {
  if (settings.empty()) throw ValidationError("run_protocol needs at least one setting");
  config.validate();
  require_positive_duration(duration_t);
  Engine engine = make_engine(config.rng_seed);
  std::vector<CountRecord> out;
  out.reserve(settings.size());
  for (const auto& [alpha, beta] : settings) {
    out.push_back(acquire(config, state, alpha, beta, duration_t, engine));
  }
  return out;
}

qm::TwoPhotonState PhotonSource::state_for(double theta_l, double phi_l) const {
  const qm::TwoPhotonState pure = qm::pump_state(theta_l, phi_l, crystal_phase);
  return pure.with_cos_phi_m(coherence * pure.cos_phi_m());
}

void PhotonSource::validate() const {
  if (!(coherence >= 0.0 && coherence <= 1.0)) {
    throw ValidationError("source coherence must lie in [0, 1]");
  }
  if (!std::isfinite(crystal_phase)) throw ValidationError("crystal_phase must be finite");
}

LiveSession::LiveSession(ApparatusConfig config, PhotonSource source, BenchSettings initial)
    : config_(config),
      source_(source),
      engine_(make_engine(config.rng_seed)),
      settings_(initial) {
  config_.validate();
  source_.validate();
}

LiveSession::StepGuard::StepGuard(LiveSession& session) : session_(session) {
  bool expected = false;
  if (!session_.busy_.compare_exchange_strong(expected, true)) {
    throw SequencingError("session is already acquiring; steps must not overlap");
  }
}

LiveSession::StepGuard::~StepGuard() { session_.busy_.store(false); }

CountRecord LiveSession::step(double alpha, double beta, double duration_t) {
  StepGuard guard(*this);
  std::lock_guard lock(mutex_);
  return step_locked(alpha, beta, duration_t);
}

CountRecord LiveSession::acquire(double duration_t) {
  StepGuard guard(*this);
  std::lock_guard lock(mutex_);
  return step_locked(settings_.alpha, settings_.beta, duration_t);
}

std::vector<CountRecord> LiveSession::run_protocol(
    std::span<const std::pair<double, double>> settings, double duration_t) {
  if (settings.empty()) throw ValidationError("run_protocol needs at least one setting");
  require_positive_duration(duration_t);
  StepGuard guard(*this);
  std::lock_guard lock(mutex_);
  std::vector<CountRecord> out;
  out.reserve(settings.size());
  for (const auto& [alpha, beta] : settings) out.push_back(step_locked(alpha, beta, duration_t));
  return out;
}

CountRecord LiveSession::step_locked(double alpha, double beta, double duration_t) {
  require_positive_duration(duration_t);
  const qm::TwoPhotonState state = source_.state_for(settings_.theta_l, settings_.phi_l);
  CountRecord rec = sim::acquire(config_, state, alpha, beta, duration_t, engine_);
  settings_.alpha = alpha;
  settings_.beta = beta;
  history_.push_back(rec);
  budget_ += config_.pair_rate * duration_t;
  return rec;
}

void LiveSession::set_settings(const BenchSettings& settings) {
  std::lock_guard lock(mutex_);
  settings_ = settings;
}

void LiveSession::set_pump(double theta_l, double phi_l) {
  std::lock_guard lock(mutex_);
  settings_.theta_l = theta_l;
  settings_.phi_l = phi_l;
}

BenchSettings LiveSession::settings() const {
  std::lock_guard lock(mutex_);
  return settings_;
}

qm::TwoPhotonState LiveSession::current_state() const {
  std::lock_guard lock(mutex_);
  return source_.state_for(settings_.theta_l, settings_.phi_l);
}

std::vector<CountRecord> LiveSession::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

double LiveSession::photon_budget() const {
  std::lock_guard lock(mutex_);
  return budget_;
}

}  // namespace bellsim::sim
