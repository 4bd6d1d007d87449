#include "bellsim/tuning.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "bellsim/angle.hpp"
#include "bellsim/errors.hpp"

namespace bellsim::est {
namespace {

constexpr int kMinBudget = 20;
constexpr int kDiagnosticSettings = 4;
const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;
constexpr double kMinBracket = 5.0;
constexpr double kMaxBracket = 90.0;

double signed_phase(double deg) { return wrap(deg + 180.0, 360.0) - 180.0; }

/// Spends acquisitions against a hard budget, keeping four in reserve for
/// the closing diagnostics.
class Ledger {
 public:
  Ledger(TuningBench& bench, int budget) : bench_(bench), budget_(budget) {}

  bool affordable(int n) const { return used_ + n <= budget_ - kDiagnosticSettings; }
  int remaining() const { return budget_ - used_; }
  int used() const { return used_; }

  double measure(double alpha, double beta, int repeats) {
    double sum = 0.0;
    for (int i = 0; i < repeats; ++i) sum += bench_.count(alpha, beta);
    used_ += repeats;
    return sum;
  }

 private:
  TuningBench& bench_;
  int budget_;
  int used_ = 0;
};

}  // namespace

SessionBench::SessionBench(sim::LiveSession& session, double duration_t)
    : session_(session), duration_t_(duration_t) {
  if (!(duration_t > 0.0)) throw ValidationError("tuning acquisition time must be > 0");
}

void SessionBench::set_pump(double theta_l, double phi_l) { session_.set_pump(theta_l, phi_l); }

double SessionBench::count(double alpha, double beta) {
  return static_cast<double>(session_.step(alpha, beta, duration_t_).n_coinc);
}

double SessionBench::theta_l() const { return session_.settings().theta_l; }
double SessionBench::phi_l() const { return session_.settings().phi_l; }

NoiselessBench::NoiselessBench(sim::ApparatusConfig config, sim::PhotonSource source,
                               double duration_t, double theta_l, double phi_l)
    : config_(config), source_(source), duration_t_(duration_t), theta_l_(theta_l), phi_l_(phi_l) {
  config_.validate();
  source_.validate();
  if (!(duration_t > 0.0)) throw ValidationError("tuning acquisition time must be > 0");
}

void NoiselessBench::set_pump(double theta_l, double phi_l) {
  theta_l_ = theta_l;
  phi_l_ = phi_l;
}

double NoiselessBench::count(double alpha, double beta) {
  return sim::mean_coincidences(config_, source_.state_for(theta_l_, phi_l_), alpha, beta,
                                duration_t_);
}

TuneResult tune(TuningBench& bench, int step_budget) {
  TuneResult result;
  result.theta_l_setting = bench.theta_l();
  result.phi_l_setting = bench.phi_l();
  if (step_budget < kMinBudget) return result;

  const bool exact = bench.noiseless();
  const int max_bisections = exact ? 40 : 8;
  const int max_golden = exact ? 60 : 4;
  const double golden_tol = exact ? 1e-7 : 1.0;
  const int k1 = std::max(1, (step_budget * 30 / 100) / (2 * max_bisections));
  const int kc = std::max(1, (step_budget * 10 / 100) / 2);
  const int kq = std::max(1, (step_budget * 10 / 100) / 4);
  const int k2 = std::max(1, (step_budget * 8 / 100) / (2 + max_golden));

  Ledger ledger(bench, step_budget);
  bool exhausted = false;

  // Phase 1: equalize N(0,0) and N(90,90) with the laser polarizer.
  double theta = result.theta_l_setting;
  if (!(theta > 0.0 && theta < 90.0)) theta = 45.0;
  double phi = result.phi_l_setting;
  double lo = 0.0, hi = 90.0;
  for (int it = 0; it < max_bisections; ++it) {
    if (!ledger.affordable(2 * k1)) {
      exhausted = true;
      break;
    }
    bench.set_pump(theta, phi);
    const double n00 = ledger.measure(0.0, 0.0, k1);
    const double n9090 = ledger.measure(90.0, 90.0, k1);
    const double diff = n00 - n9090;
    const double tolerance = exact ? 1e-12 * (n00 + n9090) : 2.0 * std::sqrt(n00 + n9090);
    if (std::abs(diff) <= tolerance) break;
    // N(0,0) grows as sin²θ_l, N(90,90) as cos²θ_l.
    (diff > 0.0 ? hi : lo) = theta;
    theta = 0.5 * (lo + hi);
    if (exact && hi - lo < 1e-10) break;
  }
  // Confirm the balance point with longer counts and apply one correction
  // from N(0,0) − N(90,90) ≈ −A cos 2θ_l.
  if (!exact && !exhausted && ledger.affordable(2 * kc)) {
    bench.set_pump(theta, phi);
    const double n00 = ledger.measure(0.0, 0.0, kc);
    const double n9090 = ledger.measure(90.0, 90.0, kc);
    if (n00 + n9090 > 0.0) {
      const double cos2 = std::clamp((n9090 - n00) / (n00 + n9090), -1.0, 1.0);
      theta = std::clamp(theta + 45.0 - 0.5 * rad_to_deg(std::acos(cos2)), 0.0, 90.0);
    }
  }

  // Phase 2: maximize N(45,45) with the quartz plate. N(45,45) is sinusoidal
  // in the plate setting, so four quarter-turn probes locate the peak to
  // within their Poisson error; golden section then refines inside that bracket.
  auto n4545 = [&](double phase, int repeats) {
    bench.set_pump(theta, phase);
    return ledger.measure(45.0, 45.0, repeats);
  };
  if (!exhausted && ledger.affordable(4 * kq)) {
    std::array<double, 4> v{};
    for (int i = 0; i < 4; ++i) v[i] = n4545(phi + 90.0 * i, kq);
    const double x = v[0] - v[2], y = v[1] - v[3];
    const double center = phi + rad_to_deg(std::atan2(y, x));
    const double swing = std::hypot(x, y);
    double half_width = kMaxBracket;
    if (!exact && swing > 0.0) {
      const double sigma = rad_to_deg(std::sqrt(v[0] + v[1] + v[2] + v[3]) / swing);
      half_width = std::clamp(3.0 * sigma, kMinBracket, kMaxBracket);
    }
    double a = center - half_width, b = center + half_width;
    double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
    if (ledger.affordable(2 * k2)) {
      double fc = n4545(c, k2), fd = n4545(d, k2);
      for (int it = 0; it < max_golden && b - a > golden_tol; ++it) {
        if (!ledger.affordable(k2)) {
          exhausted = true;
          break;
        }
        if (fc > fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - kGolden * (b - a);
          fc = n4545(c, k2);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + kGolden * (b - a);
          fd = n4545(d, k2);
        }
      }
      phi = 0.5 * (a + b);
    } else {
      exhausted = true;
      phi = center;
    }
  } else {
    exhausted = true;
  }

  result.theta_l_setting = theta;
  result.phi_l_setting = signed_phase(phi);
  bench.set_pump(result.theta_l_setting, result.phi_l_setting);

  // Fresh counts at the four diagnostic settings with whatever budget is left.
  const int kd = ledger.remaining() / kDiagnosticSettings;
  if (kd >= 1) {
    const double n00 = ledger.measure(0.0, 0.0, kd) / kd;
    const double n9090 = ledger.measure(90.0, 90.0, kd) / kd;
    const double n090 = ledger.measure(0.0, 90.0, kd) / kd;
    const double n45 = ledger.measure(45.0, 45.0, kd) / kd;
    try {
      result.diagnostics = diagnose_state(n00, n9090, n090, n45);
    } catch (const ValidationError&) {
      exhausted = true;
    }
  }
  result.acquisitions = ledger.used();
  result.converged = !exhausted && result.diagnostics.has_value();
  return result;
}

}  // namespace bellsim::est
