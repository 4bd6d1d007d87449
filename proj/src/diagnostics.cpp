#include "bellsim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bellsim/angle.hpp"
#include "bellsim/errors.hpp"

namespace bellsim::est {

StateDiagnostics diagnose_state(double n00, double n9090, double n090, double n4545) {
  for (double n : {n00, n9090, n090, n4545}) {
    if (!(n >= 0.0) || !std::isfinite(n)) {
      throw ValidationError("degenerate counts: counts must be finite and nonnegative");
    }
  }
  auto degenerate = [](const char* inequality, double lhs, double rhs) {
    std::ostringstream msg;
    msg << "degenerate counts: need " << inequality << " (got " << lhs << " <= " << rhs << ")";
    return ValidationError(msg.str());
  };
  if (!(n00 > n090)) throw degenerate("N(0,0) > N(0,90)", n00, n090);
  if (!(n9090 > n090)) throw degenerate("N(90,90) > N(0,90)", n9090, n090);

  StateDiagnostics d;
  d.c_offset = n090;
  d.a_pairs = n00 + n9090 - 2.0 * d.c_offset;
  const double tan2 = (n9090 - d.c_offset) / (n00 - d.c_offset);
  const double theta = std::atan(std::sqrt(tan2));
  d.theta_l = rad_to_deg(theta);
  d.raw_cos_phi_m = (4.0 * (n4545 - d.c_offset) / d.a_pairs - 1.0) / std::sin(2.0 * theta);
  d.interference_out_of_range = std::abs(d.raw_cos_phi_m) > 1.0;
  d.cos_phi_m = std::clamp(d.raw_cos_phi_m, -1.0, 1.0);
  d.phi_m = rad_to_deg(std::acos(d.cos_phi_m));
  return d;
}

}  // namespace bellsim::est
