#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace resdob {

struct IterationRecord {
  int iteration = 0;
  double mean_episode_reward = 0.0;
  double mean_episode_cost = 0.0;
  long long violations = 0;     // steps with cost 1
  long long slack_events = 0;   // steps whose QP needed the slack
  double intervention_rate = 0.0;
  double dob_error_estimate = 0.0;  // mean |d_hat - d| against the simulator's lumped disturbance
  double residual_loss = 0.0;       // mean pre-step residual loss
  double lambda = 0.0;
  double wall_time = 0.0;           // seconds since the start of training
};

/// Append-only training log, one record per iteration.
struct RunLog {
  std::string mode;
  std::string task;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> records;
  std::optional<int> aborted_iteration;
  std::string error;

  /// Throws std::logic_error unless the record continues the sequence.
  void append(const IterationRecord& r);
};

/// Line-delimited JSON: a header line, one line per record, and an abort line
/// when the run failed. wall_time is left out so equal runs give equal bytes.
void write_jsonl(std::ostream& out, const RunLog& log);
/// Throws std::runtime_error on malformed input.
RunLog read_jsonl(std::istream& in);

void write_csv(std::ostream& out, const RunLog& log);
/// iteration,wall_time
void write_timing_csv(std::ostream& out, const RunLog& log);

}  // namespace resdob
