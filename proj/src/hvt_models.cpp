#include "bellsim/hvt_models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "bellsim/errors.hpp"

namespace bellsim::hvt {
namespace {

constexpr double kNormalizationTolerance = 1e-9;
constexpr std::string_view kStrategySchema = "bellsim.hvt_strategy/1";

void check_rule(const OutcomeRule& rule, const char* name) {
  if (rule.initial != 1 && rule.initial != -1) {
    throw ValidationError(std::string(name) + ": initial outcome must be +1 or -1");
  }
  for (std::size_t i = 0; i < rule.breakpoints_deg.size(); ++i) {
    const double t = rule.breakpoints_deg[i];
    if (!(t >= 0.0 && t <= 90.0)) {
      throw ValidationError(std::string(name) + ": breakpoints must lie in [0, 90] degrees");
    }
    if (i > 0 && !(t > rule.breakpoints_deg[i - 1])) {
      throw ValidationError(std::string(name) + ": breakpoints must be strictly ascending");
    }
  }
}

void check_points(std::size_t n) {
  if (n < kMinQuadraturePoints) {
    throw ValidationError("quadrature needs at least 1000 points");
  }
}

template <typename Integrand>
double midpoint(std::size_t n, Integrand&& f) {
  const double h = 180.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += f((static_cast<double>(k) + 0.5) * h);
  return sum * h;
}

/// λ values in [0, 180) where `rule` evaluated against `analyzer` may jump.
void append_jumps(const OutcomeRule& rule, double analyzer_deg, std::vector<double>& out) {
  for (double t : rule.breakpoints_deg) {
    out.push_back(wrap(analyzer_deg + t, 180.0));
    out.push_back(wrap(analyzer_deg - t, 180.0));
  }
}

}  // namespace

int OutcomeRule::operator()(double lambda_deg, double analyzer_deg) const {
  const double d = folded_distance_deg(lambda_deg, analyzer_deg);
  const auto crossed = std::lower_bound(breakpoints_deg.begin(), breakpoints_deg.end(), d) -
                       breakpoints_deg.begin();
  return crossed % 2 == 0 ? initial : -initial;
}

HvtStrategy::HvtStrategy(std::vector<double> density_bins, OutcomeRule outcome_a,
                         OutcomeRule outcome_b, std::optional<std::uint64_t> seed)
    : bins_(std::move(density_bins)),
      rule_a_(std::move(outcome_a)),
      rule_b_(std::move(outcome_b)),
      seed_(seed) {
  if (bins_.empty()) throw ValidationError("density needs at least one bin");
  check_rule(rule_a_, "outcome_a");
  check_rule(rule_b_, "outcome_b");
}

double HvtStrategy::density(double lambda_deg) const {
  const double lambda = wrap(lambda_deg, 180.0);
  auto k = static_cast<std::size_t>(lambda / bin_width_deg());
  return bins_[std::min(k, bins_.size() - 1)];
}

double HvtStrategy::density_integral() const {
  double sum = 0.0;
  for (double rho : bins_) sum += rho;
  return sum * bin_width_deg();
}

void HvtStrategy::validate() const {
  for (std::size_t k = 0; k < bins_.size(); ++k) {
    if (!(bins_[k] >= 0.0)) {
      std::ostringstream msg;
      msg << "density bin " << k << " is negative (" << bins_[k] << ")";
      throw ValidationError(msg.str());
    }
  }
  const double total = density_integral();
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "hidden-variable density not normalized: integral = " << total;
    throw ValidationError(msg.str());
  }
}

HvtStrategy simple_hvt() {
  return HvtStrategy({1.0 / 180.0}, OutcomeRule{+1, {45.0}}, OutcomeRule{+1, {45.0}});
}

HvtStrategy random_hvt(std::uint64_t seed) {
  constexpr std::size_t kBins = 36;
  Engine engine = make_engine(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> steps(1, 3);

  std::vector<double> bins(kBins);
  double total = 0.0;
  for (double& rho : bins) {
    rho = unit(engine);
    total += rho;
  }
  const double width = 180.0 / static_cast<double>(kBins);
  for (double& rho : bins) rho /= total * width;

  auto random_rule = [&] {
    OutcomeRule rule;
    rule.initial = unit(engine) < 0.5 ? -1 : +1;
    const int n = steps(engine);
    for (int i = 0; i < n; ++i) rule.breakpoints_deg.push_back(90.0 * unit(engine));
    std::sort(rule.breakpoints_deg.begin(), rule.breakpoints_deg.end());
    rule.breakpoints_deg.erase(
        std::unique(rule.breakpoints_deg.begin(), rule.breakpoints_deg.end()),
        rule.breakpoints_deg.end());
    return rule;
  };
  OutcomeRule a = random_rule();
  OutcomeRule b = random_rule();
  return HvtStrategy(std::move(bins), std::move(a), std::move(b), seed);
}

double hvt_prob_vv(Angle alpha, Angle beta) {
  return 0.5 - folded_distance_deg(alpha.deg(), beta.deg()) / 180.0;
}

double simple_hvt_E(Angle alpha, Angle beta) {
  return 1.0 - 4.0 * folded_distance_deg(alpha.deg(), beta.deg()) / 180.0;
}

double hvt_E(const HvtStrategy& strategy, Angle alpha, Angle beta, std::size_t quadrature_points) {
  strategy.validate();
  check_points(quadrature_points);
  return midpoint(quadrature_points, [&](double lambda) {
    return strategy.outcome_a(lambda, alpha.deg()) * strategy.outcome_b(lambda, beta.deg()) *
           strategy.density(lambda);
  });
}

double hvt_E_exact(const HvtStrategy& strategy, Angle alpha, Angle beta) {
  strategy.validate();
  std::vector<double> nodes;
  nodes.reserve(strategy.density_bins().size() + 16);
  for (std::size_t k = 0; k < strategy.density_bins().size(); ++k) {
    nodes.push_back(static_cast<double>(k) * strategy.bin_width_deg());
  }
  append_jumps(strategy.rule_a(), alpha.deg(), nodes);
  append_jumps(strategy.rule_b(), beta.deg(), nodes);
  nodes.push_back(180.0);
  std::sort(nodes.begin(), nodes.end());

  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double width = nodes[i + 1] - nodes[i];
    if (width <= 0.0) continue;
    const double mid = 0.5 * (nodes[i] + nodes[i + 1]);
    sum += width * strategy.outcome_a(mid, alpha.deg()) * strategy.outcome_b(mid, beta.deg()) *
           strategy.density(mid);
  }
  return sum;
}

double hvt_prob_vv_quadrature(const HvtStrategy& strategy, Angle alpha, Angle beta,
                              std::size_t quadrature_points) {
  strategy.validate();
  check_points(quadrature_points);
  return midpoint(quadrature_points, [&](double lambda) {
    return (1 + strategy.outcome_a(lambda, alpha.deg())) *
           (1 + strategy.outcome_b(lambda, beta.deg())) * strategy.density(lambda) / 4.0;
  });
}

namespace {

template <typename Correlation>
double chsh_combination(const ChshAngles& angles, Correlation&& e) {
  const auto a = Angle::degrees(angles.a);
  const auto ap = Angle::degrees(angles.a_prime);
  const auto b = Angle::degrees(angles.b);
  const auto bp = Angle::degrees(angles.b_prime);
  return e(a, b) - e(a, bp) + e(ap, b) + e(ap, bp);
}

}  // namespace

double hvt_S(const HvtStrategy& strategy, const ChshAngles& angles, std::size_t quadrature_points) {
  return chsh_combination(angles, [&](Angle x, Angle y) {
    return hvt_E(strategy, x, y, quadrature_points);
  });
}

double hvt_S_exact(const HvtStrategy& strategy, const ChshAngles& angles) {
  return chsh_combination(angles, [&](Angle x, Angle y) { return hvt_E_exact(strategy, x, y); });
}

int single_pair_s(const HvtStrategy& strategy, double lambda_deg, const ChshAngles& angles) {
  const int a = strategy.outcome_a(lambda_deg, angles.a);
  const int ap = strategy.outcome_a(lambda_deg, angles.a_prime);
  const int b = strategy.outcome_b(lambda_deg, angles.b);
  const int bp = strategy.outcome_b(lambda_deg, angles.b_prime);
  return a * (b - bp) + ap * (b + bp);
}

double sample_lambda(const HvtStrategy& strategy, Engine& engine) {
  const auto& bins = strategy.density_bins();
  std::discrete_distribution<std::size_t> pick(bins.begin(), bins.end());
  std::uniform_real_distribution<double> within(0.0, strategy.bin_width_deg());
  const std::size_t k = pick(engine);
  return static_cast<double>(k) * strategy.bin_width_deg() + within(engine);
}

std::string to_json(const HvtStrategy& strategy) {
  auto rule_json = [](const OutcomeRule& rule) {
    return nlohmann::json{{"initial", rule.initial}, {"breakpoints_deg", rule.breakpoints_deg}};
  };
  nlohmann::json doc{
      {"schema_version", kStrategySchema},
      {"density_bins", strategy.density_bins()},
      {"outcome_a", rule_json(strategy.rule_a())},
      {"outcome_b", rule_json(strategy.rule_b())},
  };
  doc["seed"] = strategy.seed() ? nlohmann::json(*strategy.seed()) : nlohmann::json(nullptr);
  return doc.dump(2);
}

HvtStrategy strategy_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("strategy JSON: ") + e.what());
  }
  try {
    if (doc.at("schema_version").get<std::string>() != kStrategySchema) {
      throw ValidationError("strategy JSON: unsupported schema_version");
    }
    auto rule = [](const nlohmann::json& j) {
      return OutcomeRule{j.at("initial").get<int>(),
                         j.at("breakpoints_deg").get<std::vector<double>>()};
    };
    std::optional<std::uint64_t> seed;
    if (doc.contains("seed") && !doc["seed"].is_null()) seed = doc["seed"].get<std::uint64_t>();
    return HvtStrategy(doc.at("density_bins").get<std::vector<double>>(),
                       rule(doc.at("outcome_a")), rule(doc.at("outcome_b")), seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("strategy JSON: ") + e.what());
  }
}

}  // namespace bellsim::hvt
