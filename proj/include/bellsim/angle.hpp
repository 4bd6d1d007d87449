#pragma once

#include <cmath>
#include <numbers>

namespace bellsim {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) noexcept { return deg * (kPi / 180.0); }
constexpr double rad_to_deg(double rad) noexcept { return rad * (180.0 / kPi); }

/// Wraps any real to [0, period).
inline double wrap(double value, double period) noexcept {
  double r = std::fmod(value, period);
  if (r < 0.0) r += period;
  // fmod of a tiny negative number can round up to exactly `period`.
  return r >= period ? 0.0 : r;
}

/// Angular distance between two polarizer axes, folded to [0°, 90°].
inline double folded_distance_deg(double a_deg, double b_deg) noexcept {
  double d = wrap(a_deg - b_deg, 180.0);
  return d > 90.0 ? 180.0 - d : d;
}

/// A polarizer or waveplate angle, normalized to [0°, 360°).
class Angle {
 public:
  constexpr Angle() = default;

  static Angle degrees(double deg) noexcept { return Angle(wrap(deg, 360.0)); }
  static Angle radians(double rad) noexcept { return degrees(rad_to_deg(rad)); }

  double deg() const noexcept { return deg_; }
  double rad() const noexcept { return deg_to_rad(deg_); }

  /// The orthogonal polarizer setting.
  Angle perpendicular() const noexcept { return degrees(deg_ + 90.0); }

  Angle operator+(Angle other) const noexcept { return degrees(deg_ + other.deg_); }
  Angle operator-(Angle other) const noexcept { return degrees(deg_ - other.deg_); }

  friend bool operator==(Angle, Angle) = default;

 private:
  explicit Angle(double normalized) : deg_(normalized) {}
  double deg_ = 0.0;
};

namespace literals {
inline Angle operator""_deg(long double v) { return Angle::degrees(static_cast<double>(v)); }
inline Angle operator""_deg(unsigned long long v) { return Angle::degrees(static_cast<double>(v)); }
}  // namespace literals

}  // namespace bellsim
