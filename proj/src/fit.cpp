#include "bellsim/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "bellsim/angle.hpp"

namespace bellsim::est {
namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kShiftBound = 20.0;
constexpr double kDistinctTol = 1e-9;

enum Param : int { kA = 0, kC = 1, kTheta = 2, kCos = 3, kShift = 4 };

struct Bounds {
  Vec lo, hi;
};

Bounds bounds_for(int n) {
  Bounds b{Vec(n), Vec(n)};
  const double inf = std::numeric_limits<double>::infinity();
  b.lo << 0.0, 0.0, 0.0, -1.0;
  b.hi << inf, inf, 90.0, 1.0;
  if (n == 5) {
    b.lo.conservativeResize(5);
    b.hi.conservativeResize(5);
    b.lo(kShift) = -kShiftBound;
    b.hi(kShift) = kShiftBound;
  }
  return b;
}

/// Model value and its gradient with respect to x (degrees for the angles).
double model_and_gradient(const Vec& x, double alpha_deg, double beta_deg, Eigen::Ref<Vec> grad) {
  const double shift = x.size() == 5 ? x(kShift) : 0.0;
  const double al = deg_to_rad(alpha_deg);
  const double be = deg_to_rad(beta_deg + shift);
  const double th = deg_to_rad(x(kTheta));
  const double A = x(kA), k = x(kCos);

  const double sa2 = std::pow(std::sin(al), 2), ca2 = std::pow(std::cos(al), 2);
  const double sb2 = std::pow(std::sin(be), 2), cb2 = std::pow(std::cos(be), 2);
  const double st2 = std::pow(std::sin(th), 2), ct2 = std::pow(std::cos(th), 2);
  const double s2a = std::sin(2 * al), s2b = std::sin(2 * be), c2b = std::cos(2 * be);
  const double s2t = std::sin(2 * th), c2t = std::cos(2 * th);

  const double p = sa2 * sb2 * ct2 + ca2 * cb2 * st2 + 0.25 * s2a * s2b * s2t * k;
  const double to_rad = kPi / 180.0;
  grad(kA) = p;
  grad(kC) = 1.0;
  grad(kTheta) = A * to_rad * (-sa2 * sb2 * s2t + ca2 * cb2 * s2t + 0.5 * s2a * s2b * c2t * k);
  grad(kCos) = A * 0.25 * s2a * s2b * s2t;
  if (x.size() == 5) {
    grad(kShift) = A * to_rad * (sa2 * ct2 * s2b - ca2 * st2 * s2b + 0.5 * s2a * c2b * s2t * k);
  }
  return A * p + x(kC);
}

struct Evaluation {
  Vec residual;  // weighted
  Mat jacobian;  // of the weighted residual
  double cost = 0.0;  // ½ Σ r²
};

Evaluation evaluate(const Vec& x, std::span<const ScanPoint> scan) {
  const auto n = static_cast<Eigen::Index>(scan.size());
  Evaluation ev{Vec(n), Mat(n, x.size()), 0.0};
  Vec grad(x.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pt = scan[static_cast<std::size_t>(i)];
    const double w = 1.0 / std::sqrt(std::max(pt.counts, 1.0));
    const double m = model_and_gradient(x, pt.alpha, pt.beta, grad);
    ev.residual(i) = (pt.counts - m) * w;
    ev.jacobian.row(i) = -w * grad.transpose();
  }
  ev.cost = 0.5 * ev.residual.squaredNorm();
  return ev;
}

Vec projected_gradient(const Vec& x, const Vec& g, const Bounds& b) {
  Vec pg = g;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x(j) <= b.lo(j) && g(j) > 0.0) pg(j) = 0.0;
    if (x(j) >= b.hi(j) && g(j) < 0.0) pg(j) = 0.0;
  }
  return pg;
}

Vec clamp(Vec x, const Bounds& b) {
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = std::clamp(x(j), b.lo(j), b.hi(j));
  return x;
}

FitParameters to_params(const Vec& x) {
  FitParameters p{x(kA), x(kC), x(kTheta), x(kCos), std::nullopt};
  if (x.size() == 5) p.beta_shift = x(kShift);
  return p;
}

struct Run {
  Vec x;
  Evaluation ev;
  int iterations = 0;
  bool converged = false;
};

Run levenberg_marquardt(Vec x, std::span<const ScanPoint> scan, const Bounds& b, int max_iter) {
  Run run{clamp(std::move(x), b), {}, 0, false};
  run.ev = evaluate(run.x, scan);
  double mu = 1e-3;

  for (run.iterations = 0; run.iterations < max_iter; ++run.iterations) {
    const Mat jtj = run.ev.jacobian.transpose() * run.ev.jacobian;
    const Vec g = run.ev.jacobian.transpose() * run.ev.residual;
    if (projected_gradient(run.x, g, b).lpNorm<Eigen::Infinity>() < 1e-12) {
      run.converged = true;
      break;
    }
    Vec scale = jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));

    bool accepted = false;
    while (!accepted) {
      Mat lhs = jtj;
      lhs.diagonal() += mu * scale;
      const Vec step = lhs.ldlt().solve(-g);
      const Vec trial = clamp(run.x + step, b);
      Evaluation ev = evaluate(trial, scan);
      if (ev.cost < run.ev.cost) {
        const double reduction = (run.ev.cost - ev.cost) / std::max(run.ev.cost, 1e-300);
        const double moved = (trial - run.x).cwiseQuotient(run.x.cwiseAbs().cwiseMax(1e-8))
                                 .lpNorm<Eigen::Infinity>();
        run.x = trial;
        run.ev = std::move(ev);
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (reduction < 1e-15 || moved < 1e-14) run.converged = true;
      } else {
        mu *= 4.0;
        if (mu > 1e16) {
          // No representable descent step remains: numerically stationary.
          run.converged = true;
          break;
        }
      }
    }
    if (run.converged) {
      ++run.iterations;
      break;
    }
  }
  return run;
}

void check_span(std::span<const ScanPoint> scan) {
  auto distinct = [&](auto angle_of) {
    std::vector<double> seen;
    for (const auto& pt : scan) {
      const double a = wrap(angle_of(pt), 180.0);
      const bool found = std::any_of(seen.begin(), seen.end(), [&](double s) {
        return folded_distance_deg(s, a) < kDistinctTol;
      });
      if (!found) seen.push_back(a);
    }
    return seen.size();
  };
  const std::size_t n_alpha = distinct([](const ScanPoint& p) { return p.alpha; });
  const std::size_t n_beta = distinct([](const ScanPoint& p) { return p.beta; });
  if (scan.size() < 6 || n_alpha < 2 || n_beta < 4) {
    std::ostringstream msg;
    msg << "insufficient scan span: need >= 6 points, >= 2 distinct alpha and >= 4 distinct "
           "beta (got "
        << scan.size() << " points, " << n_alpha << " alpha, " << n_beta << " beta)";
    throw ValidationError(msg.str());
  }
  for (const auto& pt : scan) {
    if (!(pt.counts >= 0.0) || !std::isfinite(pt.counts)) {
      throw ValidationError("scan counts must be finite and nonnegative");
    }
  }
}

FitResult summarize(const Run& run, std::span<const ScanPoint> scan, const Bounds& b) {
  FitResult r;
  r.values = to_params(run.x);
  r.chi_square = 2.0 * run.ev.cost;
  r.dof = static_cast<int>(scan.size()) - static_cast<int>(run.x.size());
  r.iterations = run.iterations;
  const Vec g = run.ev.jacobian.transpose() * run.ev.residual;
  r.gradient_norm = projected_gradient(run.x, g, b).lpNorm<Eigen::Infinity>();

  const Mat jtj = run.ev.jacobian.transpose() * run.ev.jacobian;
  Eigen::FullPivLU<Mat> lu(jtj);
  Vec err = Vec::Constant(run.x.size(), std::numeric_limits<double>::quiet_NaN());
  if (lu.isInvertible()) err = lu.inverse().diagonal().cwiseMax(0.0).cwiseSqrt();
  r.errors = to_params(err);
  return r;
}

}  // namespace

std::vector<ScanPoint> to_scan(std::span<const sim::CountRecord> records) {
  std::vector<ScanPoint> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.alpha, r.beta, static_cast<double>(r.n_coinc)});
  return out;
}

double FitResult::phi_m() const { return rad_to_deg(std::acos(std::clamp(values.cos_phi_m, -1.0, 1.0))); }

double nmodel(const FitParameters& p, double alpha_deg, double beta_deg) {
  Vec x(p.beta_shift ? 5 : 4);
  x(kA) = p.a_pairs;
  x(kC) = p.c_offset;
  x(kTheta) = p.theta_l;
  x(kCos) = p.cos_phi_m;
  if (p.beta_shift) x(kShift) = *p.beta_shift;
  Vec grad(x.size());
  return model_and_gradient(x, alpha_deg, beta_deg, grad);
}

FitResult fit_nmodel(std::span<const ScanPoint> scan, const FitOptions& options) {
  check_span(scan);
  const int n = options.fit_beta_shift ? 5 : 4;
  const Bounds b = bounds_for(n);

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& pt : scan) {
    lo = std::min(lo, pt.counts);
    hi = std::max(hi, pt.counts);
  }

  std::optional<Run> best;
  for (double theta0 : {20.0, 45.0, 70.0}) {
    Vec x0(n);
    x0(kA) = std::max(2.0 * (hi - lo), 1.0);
    x0(kC) = std::max(lo, 0.0);
    x0(kTheta) = theta0;
    x0(kCos) = 0.5;
    if (n == 5) x0(kShift) = 0.0;
    Run run = levenberg_marquardt(x0, scan, b, options.max_iterations);
    if (!best || (run.converged && !best->converged) ||
        (run.converged == best->converged && run.ev.cost < best->ev.cost)) {
      best = std::move(run);
    }
  }

  FitResult result = summarize(*best, scan, b);
  if (!best->converged) {
    std::ostringstream msg;
    msg << "fit did not converge within " << options.max_iterations
        << " iterations (chi_square = " << result.chi_square << ")";
    throw FitConvergenceError(msg.str(), result);
  }
  return result;
}

FitResult fit_nmodel(std::span<const sim::CountRecord> scan, bool fit_beta_shift) {
  const auto points = to_scan(scan);
  return fit_nmodel(points, FitOptions{fit_beta_shift});
}

}  // namespace bellsim::est
