#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

#include "bellsim/apparatus_sim.hpp"
#include "bellsim/chsh.hpp"
#include "bellsim/errors.hpp"

using namespace bellsim;

namespace {

sim::ApparatusConfig table_scale() {
  sim::ApparatusConfig c;
  c.pair_rate = 150.0;
  c.singles_rate_a = 5800.0;
  c.singles_rate_b = 5400.0;
  c.coincidence_window_tau = 25e-9;
  c.background_coinc_rate = 1.0;
  c.rng_seed = 17;
  return c;
}

// Mean coincidences re-derived from the model, without the library helpers.
double oracle_mean(const sim::ApparatusConfig& c, double theta_deg, double cos_phi, double alpha,
                   double beta, double t) {
  const double d = std::numbers::pi / 180.0;
  const double a = alpha * d, b = (beta + c.beta_offset) * d, th = theta_deg * d;
  const double p = std::pow(std::sin(a) * std::sin(b) * std::cos(th), 2) +
                   std::pow(std::cos(a) * std::cos(b) * std::sin(th), 2) +
                   0.25 * std::sin(2 * a) * std::sin(2 * b) * std::sin(2 * th) * cos_phi;
  return c.pair_rate * t * p + c.background_coinc_rate * t +
         c.coincidence_window_tau * c.singles_rate_a * c.singles_rate_b * t;
}

struct Moments {
  double mean, var;
};

template <class F>
Moments moments(int n, F draw) {
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = draw();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  return {mean, (sum_sq - n * mean * mean) / (n - 1)};
}

}  // namespace

TEST_CASE("accidental_mean") {
  CHECK(sim::accidental_mean(25e-9, 84525, 80356, 15) == doctest::Approx(11.3202).epsilon(1e-5));
  CHECK(sim::accidental_mean(25e-9, 88226, 77805, 15) == doctest::Approx(11.4407).epsilon(1e-5));
  CHECK_THROWS_AS(sim::accidental_mean(25e-9, 1, 1, 0), ValidationError);
}

TEST_CASE("mean_coincidences matches the count model") {
  auto c = table_scale();
  c.beta_offset = 3.0;
  const auto state = qm::TwoPhotonState::from_angles(46.0, 26.0);
  for (double a : {0.0, 45.0, 90.0, 135.0}) {
    for (double b = 0.0; b < 360.0; b += 30.0) {
      CHECK(sim::mean_coincidences(c, state, a, b, 15.0) ==
            doctest::Approx(oracle_mean(c, 46.0, std::cos(26.0 * std::numbers::pi / 180.0), a, b, 15.0))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("acquisitions are Poisson with the model mean") {
  const auto c = table_scale();
  const auto state = qm::TwoPhotonState::from_angles(46.0, 26.0).with_cos_phi_m(0.8);
  const double mu = sim::mean_coincidences(c, state, 45.0, 30.0, 2.0);
  auto engine = make_engine(1);
  const int n = 10000;
  const auto m = moments(n, [&] { return static_cast<double>(sim::acquire(c, state, 45.0, 30.0, 2.0, engine).n_coinc); });
  CHECK(std::abs(m.mean - mu) < 4.0 * std::sqrt(mu / n));
  CHECK(std::abs(m.var - mu) < 0.1 * mu);

  auto engine_a = make_engine(2);
  const auto singles = moments(n, [&] { return static_cast<double>(sim::acquire(c, state, 0, 0, 2.0, engine_a).n_a); });
  CHECK(std::abs(singles.mean - 11600.0) < 4.0 * std::sqrt(11600.0 / n));
}

TEST_CASE("accidental floor") {
  sim::ApparatusConfig c;
  c.singles_rate_a = 20000.0;
  c.singles_rate_b = 30000.0;
  c.coincidence_window_tau = 1e-6;
  const auto state = qm::TwoPhotonState::epr();
  const double mu = sim::accidental_mean(1e-6, 20000.0 * 5, 30000.0 * 5, 5.0);
  CHECK(sim::mean_coincidences(c, state, 0, 90, 5.0) == doctest::Approx(mu));
  auto engine = make_engine(3);
  const int n = 10000;
  const auto m = moments(n, [&] { return static_cast<double>(sim::acquire(c, state, 0, 0, 5.0, engine).n_coinc); });
  CHECK(std::abs(m.mean - mu) < 4.0 * std::sqrt(mu / n));
}

TEST_CASE("per-pair phase sampling reproduces the scalar model on average") {
  auto c = table_scale();
  c.phase_spread_mode = sim::PhaseSpreadMode::per_pair_sampling;
  const auto state = qm::TwoPhotonState::from_angles(44.0, 20.0).with_cos_phi_m(0.75);
  const double w = sim::phase_half_width(state);
  CHECK(std::sin(w) / w * std::cos(20.0 * std::numbers::pi / 180.0) == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(sim::phase_half_width(qm::TwoPhotonState::from_angles(44.0, 20.0)) == 0.0);

  auto engine = make_engine(4);
  const int n = 4000;
  for (auto [a, b] : {std::pair{45.0, 45.0}, std::pair{45.0, -45.0}, std::pair{0.0, 0.0}}) {
    const double mu = sim::mean_coincidences(c, state, a, b, 1.0);
    const auto m = moments(n, [&] { return static_cast<double>(sim::acquire(c, state, a, b, 1.0, engine).n_coinc); });
    CHECK(std::abs(m.mean - mu) < 4.0 * std::sqrt(mu / n));
  }
}

TEST_CASE("run_protocol is deterministic in the seed") {
  const auto c = table_scale();
  const auto settings = chsh_settings(ChshAngles::canonical());
  const auto state = qm::TwoPhotonState::epr();
  const auto first = sim::run_protocol(c, state, settings, 15.0);
  CHECK(first.size() == 16);
  CHECK(first == sim::run_protocol(c, state, settings, 15.0));
  auto other = c;
  other.rng_seed = 18;
  CHECK(first != sim::run_protocol(other, state, settings, 15.0));
  CHECK_THROWS_AS(sim::run_protocol(c, state, {}, 15.0), ValidationError);
  CHECK_THROWS_AS(sim::run_protocol(c, state, settings, 0.0), ValidationError);
}

TEST_CASE("table-scale protocol produces table-scale counts and violates the bound") {
  const auto c = table_scale();
  const auto recs = sim::run_protocol(c, qm::TwoPhotonState::epr().with_cos_phi_m(0.9),
                                      chsh_settings(ChshAngles::canonical()), 15.0);
  const auto r = est::compute_S(est::ChshRun(recs));
  CHECK(r.s_value > 2.2);
  CHECK(r.sigma_s == doctest::Approx(0.035).epsilon(0.2));
  CHECK(recs.front().n_a == doctest::Approx(87000).epsilon(0.02));
}

TEST_CASE("analyzer miscalibration shifts the fringe") {
  auto c = table_scale();
  c.beta_offset = 5.0;
  const auto state = qm::TwoPhotonState::epr();
  auto clean = table_scale();
  CHECK(sim::mean_coincidences(c, state, 0.0, 10.0, 1.0) ==
        doctest::Approx(sim::mean_coincidences(clean, state, 0.0, 15.0, 1.0)));
  c.beta_offset = 12.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("configuration validation") {
  auto c = table_scale();
  c.pair_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = table_scale();
  c.coincidence_window_tau = std::nan("");
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_THROWS_AS((sim::PhotonSource{0.0, 1.5}.validate()), ValidationError);
}

TEST_CASE("photon source") {
  const sim::PhotonSource source{10.0, 0.9};
  const auto s = source.state_for(45.0, -10.0);
  CHECK(s.cos_phi_m() == doctest::Approx(0.9));
  CHECK(source.state_for(45.0, 50.0).cos_phi_m() == doctest::Approx(0.45));
  CHECK(s.theta_l_deg() == doctest::Approx(45.0));
}

TEST_CASE("live session") {
  sim::LiveSession session(table_scale(), {0.0, 0.9});
  CHECK(session.settings() == sim::BenchSettings{});

  const auto r = session.step(45.0, 30.0, 2.0);
  CHECK(r.alpha == 45.0);
  CHECK(r.beta == 30.0);
  CHECK(session.settings().alpha == 45.0);
  session.set_pump(40.0, 5.0);
  CHECK(session.current_state().theta_l_deg() == doctest::Approx(40.0));
  session.acquire(3.0);
  CHECK(session.history().size() == 2);
  CHECK(session.history().back().alpha == 45.0);
  CHECK(session.photon_budget() == doctest::Approx(150.0 * 5.0));

  const auto settings = chsh_settings(ChshAngles::canonical());
  CHECK(session.run_protocol(settings, 1.0).size() == 16);
  CHECK(session.history().size() == 18);
  CHECK_THROWS_AS(session.step(0, 0, -1.0), ValidationError);
  CHECK(session.history().size() == 18);
}

TEST_CASE("live sessions with the same seed replay identically") {
  sim::LiveSession x(table_scale(), {0.0, 0.9}), y(table_scale(), {0.0, 0.9});
  for (int i = 0; i < 5; ++i) CHECK(x.step(i * 20.0, 10.0, 1.0) == y.step(i * 20.0, 10.0, 1.0));
}

TEST_CASE("a second step during a step is rejected") {
  sim::LiveSession session(table_scale(), {0.0, 0.9});
  {
    sim::LiveSession::StepGuard guard(session);
    CHECK_THROWS_AS(session.step(0, 0, 1.0), SequencingError);
    CHECK_THROWS_AS(sim::LiveSession::StepGuard{session}, SequencingError);
  }
  CHECK_NOTHROW(session.step(0, 0, 1.0));

  std::atomic<bool> held{false}, release{false};
  std::thread holder([&] {
    sim::LiveSession::StepGuard guard(session);
    held = true;
    while (!release) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  });
  while (!held) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  CHECK_THROWS_AS(session.acquire(1.0), SequencingError);
  release = true;
  holder.join();
  CHECK(session.history().size() == 1);
}

TEST_CASE("repetitions on derived seeds do not depend on evaluation order") {
  const auto state = qm::TwoPhotonState::epr().with_cos_phi_m(0.9);
  const auto settings = chsh_settings(ChshAngles::canonical());
  auto run = [&](std::uint64_t i) {
    auto c = table_scale();
    c.rng_seed = derive_seed(77, i);
    return sim::run_protocol(c, state, settings, 15.0);
  };
  std::vector<std::vector<sim::CountRecord>> forward, backward(8);
  for (std::uint64_t i = 0; i < 8; ++i) forward.push_back(run(i));
  for (std::uint64_t i = 8; i-- > 0;) backward[i] = run(i);
  CHECK(forward == backward);
  CHECK(derive_seed(77, 0) != derive_seed(77, 1));
  CHECK(derive_seed(77, 0) != derive_seed(78, 0));
}
