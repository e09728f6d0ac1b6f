#include "resdob/disturbance.hpp"

#include <cmath>
#include <stdexcept>

namespace resdob {

void WindSpec::validate() const {
  if (!(magnitude >= 0.0)) throw std::invalid_argument("wind magnitude must be >= 0");
  if (!std::isfinite(angular_rate) || !std::isfinite(phase)) {
    throw std::invalid_argument("wind rate and phase must be finite");
  }
}

WindSpec default_wind(RobotKind kind, WindRateUnit unit) {
  WindSpec w;
  w.magnitude = kind == RobotKind::kPoint ? kPointWindMagnitude : kCarWindMagnitude;
  w.angular_rate = unit == WindRateUnit::kRadPerSecond ? 5.0 : 2.0 * std::numbers::pi * 5.0;
  return w;
}

Vec2 wind_at(const WindSpec& spec, double t) {
  const double angle = spec.phase + spec.angular_rate * t;
  return spec.magnitude * Vec2(std::cos(angle), std::sin(angle));
}

}  // namespace resdob
