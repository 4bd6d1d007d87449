#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "bellsim/apparatus_sim.hpp"
#include "bellsim/fit.hpp"

using namespace bellsim;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// The count model written out independently of the library.
double model(double a_pairs, double c, double theta, double cos_phi, double alpha, double beta) {
  const double a = alpha * kDeg, b = beta * kDeg, t = theta * kDeg;
  return a_pairs * (std::pow(std::sin(a) * std::sin(b) * std::cos(t), 2) +
                    std::pow(std::cos(a) * std::cos(b) * std::sin(t), 2) +
                    0.25 * std::sin(2 * a) * std::sin(2 * b) * std::sin(2 * t) * cos_phi) +
         c;
}

std::vector<est::ScanPoint> noiseless_scan(double shift) {
  std::vector<est::ScanPoint> scan;
  for (double alpha : {0.0, 45.0, 90.0, 135.0}) {
    for (double beta = 0.0; beta < 360.0; beta += 10.0) {
      scan.push_back({alpha, beta, model(539.0, 31.0, 46.0, std::cos(26.0 * kDeg), alpha, beta + shift)});
    }
  }
  return scan;
}

}  // namespace

TEST_CASE("nmodel agrees with the written-out count model") {
  const est::FitParameters p{539.0, 31.0, 46.0, std::cos(26.0 * kDeg), 3.0};
  for (double b = 0.0; b < 180.0; b += 15.0) {
    CHECK(est::nmodel(p, 45.0, b) == doctest::Approx(model(539, 31, 46, std::cos(26 * kDeg), 45, b + 3)));
  }
}

TEST_CASE("noiseless round trip with a beta shift") {
  const auto scan = noiseless_scan(3.0);
  const auto fit = est::fit_nmodel(scan, {.fit_beta_shift = true});
  CHECK(std::abs(fit.values.a_pairs - 539.0) < 1e-6);
  CHECK(std::abs(fit.values.c_offset - 31.0) < 1e-6);
  CHECK(std::abs(fit.values.theta_l - 46.0) < 1e-6);
  CHECK(std::abs(fit.values.cos_phi_m - std::cos(26.0 * kDeg)) < 1e-6);
  REQUIRE(fit.values.beta_shift.has_value());
  CHECK(std::abs(*fit.values.beta_shift - 3.0) < 1e-6);
  CHECK(std::abs(fit.phi_m() - 26.0) < 1e-5);
  CHECK(fit.gradient_norm < 1e-8);
  CHECK(fit.dof == static_cast<int>(scan.size()) - 5);
  for (const auto& pt : scan) {
    CHECK(std::abs(est::nmodel(fit.values, pt.alpha, pt.beta) - pt.counts) <= 1e-9);
  }
}

TEST_CASE("noiseless round trip without a shift") {
  const auto scan = noiseless_scan(0.0);
  const auto fit = est::fit_nmodel(scan);
  CHECK_FALSE(fit.values.beta_shift.has_value());
  CHECK(std::abs(fit.values.theta_l - 46.0) < 1e-6);
  CHECK(fit.chi_square < 1e-15);
  CHECK(fit.dof == static_cast<int>(scan.size()) - 4);
}

TEST_CASE("the multi-start finds theta_l below 45 degrees as well") {
  std::vector<est::ScanPoint> scan;
  for (double alpha : {0.0, 90.0}) {
    for (double beta = 0.0; beta < 180.0; beta += 15.0) {
      scan.push_back({alpha, beta, model(800.0, 5.0, 20.0, 0.3, alpha, beta)});
    }
  }
  scan.push_back({45.0, 45.0, model(800.0, 5.0, 20.0, 0.3, 45.0, 45.0)});
  const auto fit = est::fit_nmodel(scan);
  CHECK(fit.values.theta_l == doctest::Approx(20.0).epsilon(1e-8));
  CHECK(fit.values.cos_phi_m == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("standard errors follow Poisson scaling") {
  const auto scan = noiseless_scan(0.0);
  auto big = scan;
  for (auto& p : big) p.counts = 4.0 * p.counts;
  const auto small_fit = est::fit_nmodel(scan);
  const auto big_fit = est::fit_nmodel(big);
  CHECK(small_fit.errors.theta_l > 0.0);
  CHECK(big_fit.errors.theta_l == doctest::Approx(small_fit.errors.theta_l / 2.0).epsilon(1e-6));
}

TEST_CASE("noisy scan recovers the parameters within a few standard errors") {
  sim::ApparatusConfig c;
  c.pair_rate = 539.0;
  c.background_coinc_rate = 31.0;
  c.beta_offset = 3.0;
  c.rng_seed = 5;
  const auto state = qm::TwoPhotonState::from_angles(46.0, 26.0);
  std::vector<std::pair<double, double>> settings;
  for (double alpha : {0.0, 45.0, 90.0, 135.0})
    for (double beta = 0.0; beta < 360.0; beta += 10.0) settings.emplace_back(alpha, beta);
  const auto recs = sim::run_protocol(c, state, settings, 1.0);
  const auto fit = est::fit_nmodel(recs, true);
  CHECK(std::abs(fit.values.theta_l - 46.0) < 4.0 * fit.errors.theta_l);
  CHECK(std::abs(*fit.values.beta_shift - 3.0) < 4.0 * *fit.errors.beta_shift);
  CHECK(fit.chi_square / fit.dof == doctest::Approx(1.0).epsilon(0.35));
}

TEST_CASE("insufficient span") {
  std::vector<est::ScanPoint> one_alpha;
  for (double beta = 0.0; beta < 180.0; beta += 10.0) one_alpha.push_back({0.0, beta, 100.0});
  CHECK_THROWS_AS(est::fit_nmodel(one_alpha), ValidationError);

  std::vector<est::ScanPoint> few_beta{{0, 0, 1}, {0, 90, 1}, {90, 0, 1}, {90, 90, 1}, {45, 0, 1}, {45, 90, 1}};
  CHECK_THROWS_AS(est::fit_nmodel(few_beta), ValidationError);

  auto five = noiseless_scan(0.0);
  five.resize(5);
  CHECK_THROWS_AS(est::fit_nmodel(five), ValidationError);
}

TEST_CASE("iteration cap surfaces the best point") {
  const auto scan = noiseless_scan(3.0);
  try {
    est::fit_nmodel(scan, {.fit_beta_shift = true, .max_iterations = 1});
    FAIL("expected FitConvergenceError");
  } catch (const est::FitConvergenceError& e) {
    CHECK(e.best().chi_square > 0.0);
    CHECK(std::isfinite(e.best().values.theta_l));
  }
}
