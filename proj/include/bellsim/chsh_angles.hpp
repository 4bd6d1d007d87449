#pragma once

#include <array>
#include <utility>

namespace bellsim {

/// The four polarizer settings entering the CHSH combination
/// S = E(a,b) - E(a,b') + E(a',b) + E(a',b'). Degrees.
struct ChshAngles {
  double a = -45.0;
  double a_prime = 0.0;
  double b = -22.5;
  double b_prime = 22.5;

  /// Settings that maximize S for the maximally entangled state.
  static constexpr ChshAngles canonical() { return {}; }

  friend bool operator==(const ChshAngles&, const ChshAngles&) = default;
};

/// The sixteen (alpha, beta) analyzer settings a full CHSH run needs, in
/// the order alphas {a, a', a+90, a'+90} x betas {b, b', b+90, b'+90}.
/// For the canonical angles this is exactly the row order of the
/// classic published count table.
std::array<std::pair<double, double>, 16> chsh_settings(const ChshAngles& angles);

}  // namespace bellsim
