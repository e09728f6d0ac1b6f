#pragma once

#include <numbers>

#include "resdob/dynamics.hpp"

namespace resdob {

/// Constant-magnitude wind whose direction turns at a constant angular rate.
struct WindSpec {
  double magnitude = 0.0;     // m/s^2, equivalent acceleration
  double angular_rate = 5.0;  // rad/s
  double phase = 0.0;         // rad

  void validate() const;
};

/// Reading of the "5 Hz" direction rate. kRadPerSecond uses 5 rad/s,
/// kRevolutionsPerSecond uses 2*pi*5 rad/s.
enum class WindRateUnit { kRadPerSecond, kRevolutionsPerSecond };

inline constexpr double kPointWindMagnitude = 0.25;
inline constexpr double kCarWindMagnitude = 2.5;

WindSpec default_wind(RobotKind kind, WindRateUnit unit = WindRateUnit::kRadPerSecond);

/// World-frame wind acceleration at time t.
Vec2 wind_at(const WindSpec& spec, double t);

}  // namespace resdob
