#include "bellsim/chsh.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "bellsim/angle.hpp"
#include "bellsim/errors.hpp"

namespace bellsim::est {
namespace {

constexpr double kAngleMatchDeg = 1e-6;
constexpr std::array<const char*, 2> kAlphaNames{"a", "a'"};
constexpr std::array<const char*, 2> kBetaNames{"b", "b'"};

bool same_axis(double x_deg, double y_deg) {
  return folded_distance_deg(x_deg, y_deg) < kAngleMatchDeg;
}

std::array<double, 4> alpha_axes(const ChshAngles& g) {
  return {g.a, g.a_prime, g.a + 90.0, g.a_prime + 90.0};
}
std::array<double, 4> beta_axes(const ChshAngles& g) {
  return {g.b, g.b_prime, g.b + 90.0, g.b_prime + 90.0};
}

std::optional<std::size_t> axis_index(const std::array<double, 4>& axes, double angle) {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (same_axis(axes[i], angle)) return i;
  }
  return std::nullopt;
}

std::string cell_label(double alpha, double beta) {
  std::ostringstream out;
  out << "(" << alpha << ", " << beta << ")";
  return out.str();
}

struct Quad {
  double same_same, perp_perp, same_perp, perp_same;
  double total() const { return same_same + perp_perp + same_perp + perp_same; }
};

Quad quad(const ChshTable& t, std::size_t xi, std::size_t yj) {
  return {t[xi][yj], t[xi + 2][yj + 2], t[xi][yj + 2], t[xi + 2][yj]};
}

double e_of(const ChshTable& t, std::size_t xi, std::size_t yj) {
  const Quad q = quad(t, xi, yj);
  if (!(q.total() > 0.0)) {
    std::ostringstream msg;
    msg << "E(" << kAlphaNames[xi] << ", " << kBetaNames[yj]
        << ") undefined: its four coincidence counts sum to zero";
    throw ValidationError(msg.str());
  }
  return compute_E(q.same_same, q.perp_perp, q.same_perp, q.perp_same);
}

/// Sign of each E in S = E(a,b) − E(a,b') + E(a',b) + E(a',b').
constexpr double s_sign(std::size_t xi, std::size_t yj) { return xi == 0 && yj == 1 ? -1.0 : 1.0; }

ChshTable prepared(const ChshTable& counts, const ChshOptions& options) {
  ChshTable t = counts;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (options.add_one_smoothing) t[i][j] += 1.0;
      if (!(t[i][j] > 0.0)) {
        std::ostringstream msg;
        msg << "sigma_S needs every count > 0; cell [" << i << "][" << j
            << "] is zero (enable add-one smoothing to proceed)";
        throw ValidationError(msg.str());
      }
    }
  }
  return t;
}

}  // namespace

ChshRun::ChshRun(std::vector<sim::CountRecord> records, ChshAngles angles) : angles_(angles) {
  const auto alphas = alpha_axes(angles_);
  const auto betas = beta_axes(angles_);
  std::array<std::optional<sim::CountRecord>, 16> cells;

  for (const auto& rec : records) {
    const auto i = axis_index(alphas, rec.alpha);
    const auto j = axis_index(betas, rec.beta);
    if (!i || !j) {
      throw ValidationError("record at " + cell_label(rec.alpha, rec.beta) +
                            " is not one of the sixteen CHSH settings");
    }
    auto& slot = cells[*i * 4 + *j];
    if (slot) {
      throw ValidationError("duplicate record for CHSH cell " + cell_label(rec.alpha, rec.beta));
    }
    slot = rec;
  }

  std::string missing;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!cells[k]) {
      if (!missing.empty()) missing += ", ";
      missing += cell_label(alphas[k / 4], betas[k % 4]);
    }
  }
  if (!missing.empty()) throw ValidationError("missing CHSH cells: " + missing);

  const double duration = cells[0]->duration_t;
  for (const auto& cell : cells) {
    if (std::abs(cell->duration_t - duration) > 1e-12 * std::abs(duration)) {
      throw ValidationError("CHSH records must share one acquisition duration");
    }
    records_.push_back(*cell);
  }
}

ChshTable ChshRun::table() const {
  ChshTable t{};
  for (std::size_t k = 0; k < records_.size(); ++k) {
    t[k / 4][k % 4] = static_cast<double>(records_[k].n_coinc);
  }
  return t;
}

double ChshResult::violation_significance() const {
  if (!(sigma_s > 0.0)) return 0.0;
  return s_value >= 0.0 ? (s_value - 2.0) / sigma_s : (-2.0 - s_value) / sigma_s;
}

double compute_E(double n_ab, double n_apbp, double n_abp, double n_apb) {
  const double total = n_ab + n_apbp + n_abp + n_apb;
  if (!(total > 0.0)) throw ValidationError("E undefined: total coincidence count is zero");
  return (n_ab + n_apbp - n_abp - n_apb) / total;
}

double s_statistic(const ChshTable& counts) {
  return e_of(counts, 0, 0) - e_of(counts, 0, 1) + e_of(counts, 1, 0) + e_of(counts, 1, 1);
}

ChshTable s_partials(const ChshTable& counts) {
  ChshTable d{};
  for (std::size_t xi = 0; xi < 2; ++xi) {
    for (std::size_t yj = 0; yj < 2; ++yj) {
      const double e = e_of(counts, xi, yj);
      const double total = quad(counts, xi, yj).total();
      const double sign = s_sign(xi, yj);
      // ∂E/∂N = (±1 − E)/N_tot, + for same-same and perp-perp cells.
      d[xi][yj] = sign * (1.0 - e) / total;
      d[xi + 2][yj + 2] = sign * (1.0 - e) / total;
      d[xi][yj + 2] = sign * (-1.0 - e) / total;
      d[xi + 2][yj] = sign * (-1.0 - e) / total;
    }
  }
  return d;
}

double sigma_S(const ChshTable& counts, const ChshOptions& options) {
  const ChshTable t = prepared(counts, options);
  const ChshTable d = s_partials(t);
  double var = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) var += t[i][j] * d[i][j] * d[i][j];
  }
  return std::sqrt(var);
}

double sigma_S(const ChshRun& run, const ChshOptions& options) {
  return sigma_S(run.table(), options);
}

ChshResult compute_S(const ChshTable& counts, const ChshOptions& options) {
  ChshResult r;
  r.e_ab = e_of(counts, 0, 0);
  r.e_abp = e_of(counts, 0, 1);
  r.e_apb = e_of(counts, 1, 0);
  r.e_apbp = e_of(counts, 1, 1);
  r.s_value = r.e_ab - r.e_abp + r.e_apb + r.e_apbp;
  r.sigma_s = sigma_S(counts, options);
  return r;
}

ChshResult compute_S(const ChshRun& run, const ChshOptions& options) {
  return compute_S(run.table(), options);
}

}  // namespace bellsim::est
