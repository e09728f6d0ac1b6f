#include "resdob/config.hpp"

#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace resdob {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument(std::string(key) + ": empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(key) + ": not a finite number: '" + s + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string(key) + ": not an integer: '" + s + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "on") return true;
  if (s == "false" || s == "0" || s == "off") return false;
  throw std::invalid_argument(std::string(key) + ": expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

Vec2 parse_vec2(std::string_view key, std::string_view text) {
  const auto parts = split_list(text);
  if (parts.size() != 2) throw std::invalid_argument(std::string(key) + ": expected two values a,b");
  return {parse_double(key, parts[0]), parse_double(key, parts[1])};
}

std::string fmt_vec2(const Vec2& v) { return fmt_double(v[0]) + "," + fmt_double(v[1]); }

std::vector<int> parse_sizes(std::string_view key, std::string_view text) {
  std::vector<int> out;
  for (const auto& p : split_list(text)) {
    const int n = parse_int<int>(key, p);
    if (n <= 0) throw std::invalid_argument(std::string(key) + ": layer sizes must be positive");
    out.push_back(n);
  }
  return out;
}

std::string fmt_sizes(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::string_view robot_name(RobotKind k) { return k == RobotKind::kPoint ? "point" : "car"; }

RobotKind parse_robot(std::string_view text) {
  const std::string s = trim(text);
  if (s == "point") return RobotKind::kPoint;
  if (s == "car") return RobotKind::kCar;
  throw std::invalid_argument("task.robot: expected point or car, got '" + s + "'");
}

struct Entry {
  const char* key;
  const char* doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

#define RESDOB_DOUBLE(KEY, DOC, FIELD)                                        \
  Entry {                                                                     \
    KEY, DOC, [](const RunConfig& c) { return fmt_double(c.FIELD); },         \
        [](RunConfig& c, std::string_view v) { c.FIELD = parse_double(KEY, v); } \
  }
#define RESDOB_INT(KEY, DOC, FIELD)                                                   \
  Entry {                                                                             \
    KEY, DOC, [](const RunConfig& c) { return std::to_string(c.FIELD); },             \
        [](RunConfig& c, std::string_view v) { c.FIELD = parse_int<decltype(c.FIELD)>(KEY, v); } \
  }
#define RESDOB_BOOL(KEY, DOC, FIELD)                                                  \
  Entry {                                                                             \
    KEY, DOC, [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); }, \
        [](RunConfig& c, std::string_view v) { c.FIELD = parse_bool(KEY, v); }         \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{"task.preset", "goal1 | goal2 | arena; resets all keys to the preset defaults",
            [](const RunConfig& c) { return c.task_name; },
            [](RunConfig& c, std::string_view v) {
              c = default_config(trim(v), c.task.robot);
            }},
      Entry{"task.robot", "point | car; resets all keys to the preset defaults for that robot",
            [](const RunConfig& c) { return std::string(robot_name(c.task.robot)); },
            [](RunConfig& c, std::string_view v) { c = default_config(c.task_name, parse_robot(v)); }},
      RESDOB_INT("task.n_hazards", "number of circular hazards", task.n_hazards),
      RESDOB_DOUBLE("task.hazard_radius", "hazard radius, m", task.hazard_radius),
      RESDOB_DOUBLE("task.hazard_speed", "hazard speed, m/s", task.hazard_speed),
      RESDOB_DOUBLE("task.goal_radius", "goal radius, m", task.goal_radius),
      RESDOB_DOUBLE("task.arena_half_width", "half width of the square region, m",
                    task.arena_half_width),
      RESDOB_DOUBLE("task.robot_radius", "robot radius r_p, m", task.robot_radius),
      RESDOB_INT("task.episode_length", "steps per episode", task.episode_length),
      RESDOB_DOUBLE("task.dt", "simulation step, s", task.dt),
      RESDOB_DOUBLE("task.goal_bonus", "reward on reaching the goal", task.goal_bonus),
      RESDOB_DOUBLE("task.min_goal_distance", "minimum robot-goal distance when sampling, m",
                    task.min_goal_distance),
      RESDOB_DOUBLE("task.mismatch_factor", "plant gain multiplier", task.mismatch_factor),
      Entry{"task.control_lower", "lower corner of the control box",
            [](const RunConfig& c) { return fmt_vec2(c.task.box.lower); },
            [](RunConfig& c, std::string_view v) { c.task.box.lower = parse_vec2("task.control_lower", v); }},
      Entry{"task.control_upper", "upper corner of the control box",
            [](const RunConfig& c) { return fmt_vec2(c.task.box.upper); },
            [](RunConfig& c, std::string_view v) { c.task.box.upper = parse_vec2("task.control_upper", v); }},
      Entry{"task.endpoint_a", "arena commute start",
            [](const RunConfig& c) { return fmt_vec2(c.task.endpoint_a); },
            [](RunConfig& c, std::string_view v) { c.task.endpoint_a = parse_vec2("task.endpoint_a", v); }},
      Entry{"task.endpoint_b", "arena commute end",
            [](const RunConfig& c) { return fmt_vec2(c.task.endpoint_b); },
            [](RunConfig& c, std::string_view v) { c.task.endpoint_b = parse_vec2("task.endpoint_b", v); }},
      RESDOB_DOUBLE("wind.magnitude", "wind acceleration, m/s^2", task.wind.magnitude),
      RESDOB_DOUBLE("wind.angular_rate", "rotation rate of the wind direction, rad/s",
                    task.wind.angular_rate),
      RESDOB_DOUBLE("wind.phase", "initial wind direction, rad", task.wind.phase),

      Entry{"run.mode", "none | cbf | dob_cbf | res_cbf | res_dob_cbf",
            [](const RunConfig& c) { return std::string(to_string(c.mode)); },
            [](RunConfig& c, std::string_view v) { c.mode = parse_filter_mode(trim(v)); }},
      RESDOB_INT("run.seed", "master seed", seed),
      RESDOB_INT("run.iterations", "policy updates", iterations),
      RESDOB_INT("run.episodes_per_iteration", "episodes collected per update",
                 episodes_per_iteration),
      RESDOB_INT("run.eval_episodes", "episodes used by eval", eval_episodes),
      Entry{"run.out_dir", "output directory (empty: write nothing)",
            [](const RunConfig& c) { return c.out_dir; },
            [](RunConfig& c, std::string_view v) { c.out_dir = trim(v); }},

      Entry{"ppo.hidden", "hidden layer sizes of policy and critics",
            [](const RunConfig& c) { return fmt_sizes(c.ppo.hidden); },
            [](RunConfig& c, std::string_view v) { c.ppo.hidden = parse_sizes("ppo.hidden", v); }},
      RESDOB_DOUBLE("ppo.gamma", "discount", ppo.gamma),
      RESDOB_DOUBLE("ppo.gae_lambda", "GAE lambda", ppo.gae_lambda),
      RESDOB_DOUBLE("ppo.clip", "surrogate clip range", ppo.clip),
      RESDOB_DOUBLE("ppo.policy_lr", "Adam step for the policy", ppo.policy_lr),
      RESDOB_DOUBLE("ppo.value_lr", "Adam step for both critics", ppo.value_lr),
      RESDOB_INT("ppo.epochs", "passes over each batch", ppo.epochs),
      RESDOB_INT("ppo.minibatch_size", "samples per gradient step", ppo.minibatch_size),
      RESDOB_DOUBLE("ppo.target_kl", "early stop of policy epochs (<= 0 disables)",
                    ppo.target_kl),
      RESDOB_DOUBLE("ppo.max_grad_norm", "gradient norm clip", ppo.max_grad_norm),
      RESDOB_DOUBLE("ppo.entropy_coef", "entropy bonus", ppo.entropy_coef),
      RESDOB_DOUBLE("ppo.init_log_std", "initial log standard deviation", ppo.init_log_std),
      RESDOB_DOUBLE("ppo.lambda_init", "initial Lagrange multiplier", ppo.lambda_init),
      RESDOB_DOUBLE("ppo.lambda_lr", "multiplier step size", ppo.lambda_lr),
      RESDOB_DOUBLE("ppo.target_cost", "allowed cost per episode", ppo.target_cost),
      RESDOB_BOOL("ppo.lagrangian", "use the cost multiplier", ppo.lagrangian),

      Entry{"residual.hidden", "hidden layer sizes of both residual nets",
            [](const RunConfig& c) { return fmt_sizes(c.residual.hidden); },
            [](RunConfig& c, std::string_view v) { c.residual.hidden = parse_sizes("residual.hidden", v); }},
      RESDOB_DOUBLE("residual.learning_rate", "SGD step", residual.learning_rate),
      RESDOB_DOUBLE("residual.grad_clip", "gradient norm clip per update", residual.grad_clip),
      RESDOB_BOOL("residual.enabled", "learn the residual in res_* modes", residual_enabled),

      RESDOB_DOUBLE("dob.gain", "predictor gain a, 1/s", dob.gain),
      RESDOB_DOUBLE("dob.period", "estimation period T, s", dob.period),
      Entry{"dob.error_bound", "estimation error bound, or auto to calibrate",
            [](const RunConfig& c) {
              return c.error_bound_auto ? std::string("auto") : fmt_double(c.dob.error_bound);
            },
            [](RunConfig& c, std::string_view v) {
              if (trim(v) == "auto") {
                c.error_bound_auto = true;
              } else {
                c.error_bound_auto = false;
                c.dob.error_bound = parse_double("dob.error_bound", v);
              }
            }},
      RESDOB_DOUBLE("dob.error_bound_quantile", "quantile used by auto calibration",
                    error_bound_quantile),
      RESDOB_INT("dob.calibration_steps", "steps of the calibration rollout", calibration_steps),
      RESDOB_BOOL("dob.enabled", "run the observer in dob_* modes", dob_enabled),

      RESDOB_DOUBLE("cbf.beta1", "first class-K coefficient", cbf.beta1),
      RESDOB_DOUBLE("cbf.beta2", "second class-K coefficient", cbf.beta2),
      RESDOB_BOOL("cbf.use_error_bound", "tighten by |grad Lf h| * error bound in dob modes",
                  use_error_bound),
      Entry{"filter.weights", "diagonal of the QP weight matrix P",
            [](const RunConfig& c) { return fmt_vec2(c.filter_weights); },
            [](RunConfig& c, std::string_view v) { c.filter_weights = parse_vec2("filter.weights", v); }},
  };
  return table;
}

#undef RESDOB_DOUBLE
#undef RESDOB_INT
#undef RESDOB_BOOL

}  // namespace

std::string_view to_string(FilterMode mode) {
  switch (mode) {
    case FilterMode::kNone: return "none";
    case FilterMode::kCbf: return "cbf";
    case FilterMode::kDobCbf: return "dob_cbf";
    case FilterMode::kResCbf: return "res_cbf";
    case FilterMode::kResDobCbf: return "res_dob_cbf";
  }
  return "none";
}

FilterMode parse_filter_mode(std::string_view text) {
  for (FilterMode m : all_filter_modes()) {
    if (to_string(m) == text) return m;
  }
  throw std::invalid_argument("unknown filter mode '" + std::string(text) +
                              "' (none|cbf|dob_cbf|res_cbf|res_dob_cbf)");
}

const std::vector<FilterMode>& all_filter_modes() {
  static const std::vector<FilterMode> modes = {FilterMode::kNone, FilterMode::kCbf,
                                                FilterMode::kDobCbf, FilterMode::kResCbf,
                                                FilterMode::kResDobCbf};
  return modes;
}

bool uses_cbf(FilterMode mode) { return mode != FilterMode::kNone; }
bool uses_dob(FilterMode mode) {
  return mode == FilterMode::kDobCbf || mode == FilterMode::kResDobCbf;
}
bool uses_residual(FilterMode mode) {
  return mode == FilterMode::kResCbf || mode == FilterMode::kResDobCbf;
}

Robustness RunConfig::robustness() const {
  if (!dob_active()) return Robustness::kNone;
  return use_error_bound ? Robustness::kDobPlusBound : Robustness::kDob;
}

void RunConfig::validate() const {
  task.validate();
  dob.validate();
  cbf.validate();
  if (task_name != "goal1" && task_name != "goal2" && task_name != "arena") {
    throw std::invalid_argument("task.preset must be goal1, goal2 or arena");
  }
  if (iterations < 0) throw std::invalid_argument("run.iterations must be >= 0");
  if (episodes_per_iteration <= 0) throw std::invalid_argument("run.episodes_per_iteration must be > 0");
  if (eval_episodes < 0) throw std::invalid_argument("run.eval_episodes must be >= 0");
  if (!(error_bound_quantile > 0.0 && error_bound_quantile <= 1.0)) {
    throw std::invalid_argument("dob.error_bound_quantile must be in (0, 1]");
  }
  if (calibration_steps <= 0) throw std::invalid_argument("dob.calibration_steps must be > 0");
  if (!(filter_weights.array() > 0.0).all()) throw std::invalid_argument("filter.weights must be > 0");
  if (!(residual.learning_rate > 0.0)) throw std::invalid_argument("residual.learning_rate must be > 0");
  if (!(ppo.gamma > 0.0 && ppo.gamma <= 1.0)) throw std::invalid_argument("ppo.gamma must be in (0, 1]");
  if (!(ppo.gae_lambda >= 0.0 && ppo.gae_lambda <= 1.0)) {
    throw std::invalid_argument("ppo.gae_lambda must be in [0, 1]");
  }
  if (ppo.epochs <= 0 || ppo.minibatch_size <= 0) {
    throw std::invalid_argument("ppo.epochs and ppo.minibatch_size must be > 0");
  }
  if (!(ppo.lambda_init >= 0.0)) throw std::invalid_argument("ppo.lambda_init must be >= 0");
}

RunConfig default_config(std::string_view task_name, RobotKind robot) {
  RunConfig c;
  c.task_name = std::string(task_name);
  if (task_name == "goal1") {
    c.task = goal1_task(robot);
  } else if (task_name == "goal2") {
    c.task = goal2_task(robot);
  } else if (task_name == "arena") {
    c.task = arena_task(robot);
  } else {
    throw std::invalid_argument("task.preset: expected goal1, goal2 or arena, got '" +
                                std::string(task_name) + "'");
  }
  // 25 cost steps per 2000-step episode, scaled to the episode length.
  c.ppo.target_cost = 25.0 * c.task.episode_length / 2000.0;
  return c;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "wind.rate_unit") {
    const std::string v = trim(value);
    if (v == "rad_per_s") {
      cfg.task.wind.angular_rate = default_wind(cfg.task.robot, WindRateUnit::kRadPerSecond).angular_rate;
    } else if (v == "rev_per_s") {
      cfg.task.wind.angular_rate =
          default_wind(cfg.task.robot, WindRateUnit::kRevolutionsPerSecond).angular_rate;
    } else {
      throw std::invalid_argument("wind.rate_unit: expected rad_per_s or rev_per_s");
    }
    return;
  }
  for (const Entry& e : entries()) {
    if (key == e.key) {
      e.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config(std::istream& in) {
  struct Line {
    int number;
    std::string key;
    std::string value;
  };
  std::vector<Line> lines;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key = value");
    }
    lines.push_back({number, trim(text.substr(0, eq)), trim(text.substr(eq + 1))});
  }

  RunConfig cfg;
  auto apply_line = [&](const Line& l) {
    try {
      apply_setting(cfg, l.key, l.value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(l.number) + ": " + e.what());
    }
  };
  for (const char* first : {"task.preset", "task.robot", "wind.rate_unit"}) {
    for (const Line& l : lines) {
      if (l.key == first) apply_line(l);
    }
  }
  for (const Line& l : lines) {
    if (l.key != "task.preset" && l.key != "task.robot" && l.key != "wind.rate_unit") apply_line(l);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Entry& e : entries()) out.emplace_back(e.key, e.get(cfg));
  return out;
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  for (const auto& [k, v] : config_entries(cfg)) out << k << " = " << v << "\n";
}

std::string defaults_reference() {
  std::ostringstream out;
  out << "# resdob configuration reference\n"
         "# Flat 'key = value' lines, '#' starts a comment. task.preset and task.robot\n"
         "# are applied before all other keys. wind.rate_unit (rad_per_s | rev_per_s)\n"
         "# sets wind.angular_rate from the 5-per-second rate.\n";
  for (const char* preset : {"goal1", "arena"}) {
    const RunConfig cfg = default_config(preset, preset == std::string("arena") ? RobotKind::kCar
                                                                             : RobotKind::kPoint);
    out << "\n# ---- defaults with task.preset = " << preset << " ----\n";
    for (const Entry& e : entries()) {
      out << "# " << e.doc << "\n" << e.key << " = " << e.get(cfg) << "\n";
    }
  }
  return out.str();
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 over (master, stream)
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace resdob
