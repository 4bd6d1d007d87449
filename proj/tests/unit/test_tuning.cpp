#include <doctest.h>

#include <cmath>

#include "bellsim/tuning.hpp"

using namespace bellsim;

namespace {

sim::ApparatusConfig bench_config(std::uint64_t seed) {
  sim::ApparatusConfig c;
  c.pair_rate = 150.0;
  c.singles_rate_a = 5800.0;
  c.singles_rate_b = 5400.0;
  c.coincidence_window_tau = 25e-9;
  c.background_coinc_rate = 1.0;
  c.rng_seed = seed;
  return c;
}

}  // namespace

TEST_CASE("budget below the minimum leaves the dials untouched") {
  for (int budget : {0, 19}) {
    est::NoiselessBench bench(bench_config(1), {0.0, 0.9}, 2.0, 20.0, 60.0);
    const auto r = est::tune(bench, budget);
    CHECK_FALSE(r.converged);
    CHECK(r.theta_l_setting == 20.0);
    CHECK(r.phi_l_setting == 60.0);
    CHECK(r.acquisitions == 0);
    CHECK_FALSE(r.diagnostics.has_value());
  }
}

TEST_CASE("noiseless bench converges exactly to the optimum") {
  for (double crystal : {0.0, 40.0, -130.0}) {
    for (auto [theta0, phi0] : {std::pair{20.0, 60.0}, std::pair{80.0, -170.0}, std::pair{45.0, 0.0}}) {
      est::NoiselessBench bench(bench_config(1), {crystal, 0.9}, 2.0, theta0, phi0);
      const auto r = est::tune(bench, 400);
      CHECK(r.converged);
      CHECK(r.acquisitions <= 400);
      CHECK(r.theta_l_setting == doctest::Approx(45.0).epsilon(1e-8));
      CHECK(std::remainder(r.phi_l_setting + crystal, 360.0) == doctest::Approx(0.0).epsilon(1e-5));
      REQUIRE(r.diagnostics.has_value());
      CHECK(r.diagnostics->cos_phi_m == doctest::Approx(0.9).epsilon(1e-9));
      CHECK(r.diagnostics->theta_l == doctest::Approx(45.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("noisy tuning on a live session") {
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    sim::LiveSession session(bench_config(seed), {0.0, 0.95}, {20.0, 70.0, 0.0, 0.0});
    est::SessionBench bench(session, 2.0);
    const auto r = est::tune(bench, 200);
    CHECK(r.acquisitions <= 200);
    CHECK(static_cast<int>(session.history().size()) == r.acquisitions);
    CHECK(session.settings().theta_l == r.theta_l_setting);
    REQUIRE(r.diagnostics.has_value());
    if (r.converged && std::abs(r.diagnostics->theta_l - 45.0) <= 2.0 && r.diagnostics->cos_phi_m >= 0.85) ++good;
  }
  CHECK(good >= 8);
}

TEST_CASE("tuning is deterministic for a seeded session") {
  auto run = [] {
    sim::LiveSession session(bench_config(7), {0.0, 0.95}, {20.0, 70.0, 0.0, 0.0});
    est::SessionBench bench(session, 2.0);
    const auto r = est::tune(bench, 200);
    return std::tuple{r.theta_l_setting, r.phi_l_setting, r.diagnostics->cos_phi_m, session.history()};
  };
  CHECK(run() == run());
}
