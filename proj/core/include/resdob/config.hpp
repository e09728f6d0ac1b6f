#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "resdob/cbf.hpp"
#include "resdob/dob.hpp"
#include "resdob/env.hpp"
#include "resdob/residual.hpp"
#include "resdob/rl.hpp"

namespace resdob {

enum class FilterMode { kNone, kCbf, kDobCbf, kResCbf, kResDobCbf };

std::string_view to_string(FilterMode mode);
/// Accepts none | cbf | dob_cbf | res_cbf | res_dob_cbf.
FilterMode parse_filter_mode(std::string_view text);
const std::vector<FilterMode>& all_filter_modes();

bool uses_cbf(FilterMode mode);
bool uses_dob(FilterMode mode);
bool uses_residual(FilterMode mode);

struct RunConfig {
  std::string task_name = "goal1";  // goal1 | goal2 | arena
  TaskConfig task = goal1_task(RobotKind::kPoint);
  FilterMode mode = FilterMode::kResDobCbf;

  rl::PpoConfig ppo;
  ResidualConfig residual;
  DobConfig dob;
  CbfConfig cbf;

  // Module switches inside a mode; turning one off in res_dob_cbf yields the
  // corresponding smaller mode.
  bool dob_enabled = true;
  bool residual_enabled = true;
  // Subtract |grad Lf h| * error_bound in DOB modes.
  bool use_error_bound = true;
  // Replace dob.error_bound by a calibrated quantile before training.
  bool error_bound_auto = true;
  double error_bound_quantile = 0.99;
  int calibration_steps = 2000;

  Vec2 filter_weights{1.0, 1.0};  // diagonal of P

  std::uint64_t seed = 0;
  int iterations = 150;
  int episodes_per_iteration = 5;
  int eval_episodes = 20;
  std::string out_dir;

  bool filter_active() const { return uses_cbf(mode); }
  bool dob_active() const { return uses_dob(mode) && dob_enabled; }
  bool residual_active() const { return uses_residual(mode) && residual_enabled; }
  /// Robustness the CBF uses under this mode.
  Robustness robustness() const;

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

/// Default configuration for a task preset (goal1, goal2, arena) and robot.
RunConfig default_config(std::string_view task_name, RobotKind robot);

/// Parses "key = value" lines; '#' starts a comment. task.preset and
/// task.robot are applied first so later keys refine the preset.
/// Throws std::invalid_argument naming the offending line.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Sets one dotted key. Throws std::invalid_argument for unknown keys or
/// malformed values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Every key with its current value, in a form parse_config reads back.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);
void write_config(std::ostream& out, const RunConfig& cfg);

/// Documented reference of every key and its default.
std::string defaults_reference();

/// Independent 64-bit stream seed derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

namespace seed_stream {
inline constexpr std::uint64_t kEnv = 1;
inline constexpr std::uint64_t kPolicy = 2;
inline constexpr std::uint64_t kLayout = 3;
inline constexpr std::uint64_t kResidual = 4;
inline constexpr std::uint64_t kCalibration = 5;
inline constexpr std::uint64_t kEval = 6;
}  // namespace seed_stream

}  // namespace resdob
