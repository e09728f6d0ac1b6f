#include "resdob/run_log.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace resdob {

using nlohmann::json;

void RunLog::append(const IterationRecord& r) {
  const int expected = records.empty() ? 0 : records.back().iteration + 1;
  if (r.iteration != expected) {
    throw std::logic_error("run log: expected iteration " + std::to_string(expected) + ", got " +
                           std::to_string(r.iteration));
  }
  records.push_back(r);
}

void write_jsonl(std::ostream& out, const RunLog& log) {
  out << json{{"type", "header"}, {"mode", log.mode}, {"task", log.task}, {"seed", log.seed}}.dump()
      << "\n";
  for (const IterationRecord& r : log.records) {
    json j = {{"type", "iteration"},
              {"iteration", r.iteration},
              {"mean_episode_reward", r.mean_episode_reward},
              {"mean_episode_cost", r.mean_episode_cost},
              {"violations", r.violations},
              {"slack_events", r.slack_events},
              {"intervention_rate", r.intervention_rate},
              {"dob_error_estimate", r.dob_error_estimate},
              {"residual_loss", r.residual_loss},
              {"lambda", r.lambda}};
    out << j.dump() << "\n";
  }
  if (log.aborted_iteration) {
    out << json{{"type", "abort"}, {"iteration", *log.aborted_iteration}, {"error", log.error}}.dump()
        << "\n";
  }
}

RunLog read_jsonl(std::istream& in) {
  RunLog log;
  std::string line;
  int number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        log.mode = j.at("mode").get<std::string>();
        log.task = j.at("task").get<std::string>();
        log.seed = j.at("seed").get<std::uint64_t>();
        header = true;
      } else if (type == "iteration") {
        IterationRecord r;
        r.iteration = j.at("iteration").get<int>();
        r.mean_episode_reward = j.at("mean_episode_reward").get<double>();
        r.mean_episode_cost = j.at("mean_episode_cost").get<double>();
        r.violations = j.at("violations").get<long long>();
        r.slack_events = j.at("slack_events").get<long long>();
        r.intervention_rate = j.at("intervention_rate").get<double>();
        r.dob_error_estimate = j.at("dob_error_estimate").get<double>();
        r.residual_loss = j.at("residual_loss").get<double>();
        r.lambda = j.value("lambda", 0.0);
        log.append(r);
      } else if (type == "abort") {
        log.aborted_iteration = j.at("iteration").get<int>();
        log.error = j.value("error", std::string());
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("run log line " + std::to_string(number) + ": " + e.what());
    }
  }
  if (!header) throw std::runtime_error("run log: missing header line");
  return log;
}

void write_csv(std::ostream& out, const RunLog& log) {
  out << "iteration,mean_episode_reward,mean_episode_cost,violations,slack_events,"
         "intervention_rate,dob_error_estimate,residual_loss,lambda\n";
  char buf[512];
  for (const IterationRecord& r : log.records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%lld,%lld,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                  r.mean_episode_reward, r.mean_episode_cost, r.violations, r.slack_events,
                  r.intervention_rate, r.dob_error_estimate, r.residual_loss, r.lambda);
    out << buf;
  }
}

void write_timing_csv(std::ostream& out, const RunLog& log) {
  out << "iteration,wall_time\n";
  char buf[128];
  for (const IterationRecord& r : log.records) {
    std::snprintf(buf, sizeof buf, "%d,%.6f\n", r.iteration, r.wall_time);
    out << buf;
  }
}

}  // namespace resdob
