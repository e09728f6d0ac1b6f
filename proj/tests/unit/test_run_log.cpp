#include <gtest/gtest.h>

#include <sstream>

#include "resdob/run_log.hpp"

using namespace resdob;

namespace {

RunLog sample_log() {
  RunLog log;
  log.mode = "res_dob_cbf";
  log.task = "goal1-point";
  log.seed = 123456789012345ULL;
  for (int i = 0; i < 3; ++i) {
    IterationRecord r;
    r.iteration = i;
    r.mean_episode_reward = 0.1 * i + 1.0 / 3.0;
    r.mean_episode_cost = 2.5 * i;
    r.violations = 7 * i;
    r.slack_events = i;
    r.intervention_rate = 0.125;
    r.dob_error_estimate = 1e-3 * i;
    r.residual_loss = 1e-17;
    r.lambda = 0.5 + i;
    r.wall_time = 9.0 * i;
    log.append(r);
  }
  return log;
}

}  // namespace

TEST(RunLog, AppendRequiresSequence) {
  RunLog log;
  IterationRecord r;
  r.iteration = 1;
  EXPECT_THROW(log.append(r), std::logic_error);
  r.iteration = 0;
  log.append(r);
  EXPECT_THROW(log.append(r), std::logic_error);
}

TEST(RunLog, JsonlRoundTripIsExact) {
  const RunLog log = sample_log();
  std::stringstream s;
  write_jsonl(s, log);
  const RunLog back = read_jsonl(s);
  EXPECT_EQ(back.mode, log.mode);
  EXPECT_EQ(back.task, log.task);
  EXPECT_EQ(back.seed, log.seed);
  ASSERT_EQ(back.records.size(), log.records.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto &a = log.records[i], &b = back.records[i];
    EXPECT_EQ(a.mean_episode_reward, b.mean_episode_reward);
    EXPECT_EQ(a.mean_episode_cost, b.mean_episode_cost);
    EXPECT_EQ(a.violations, b.violations);
    EXPECT_EQ(a.slack_events, b.slack_events);
    EXPECT_EQ(a.residual_loss, b.residual_loss);
    EXPECT_EQ(a.lambda, b.lambda);
    EXPECT_EQ(b.wall_time, 0.0);
  }
  std::stringstream again;
  write_jsonl(again, back);
  std::stringstream first;
  write_jsonl(first, log);
  EXPECT_EQ(again.str(), first.str());
}

TEST(RunLog, AbortLineSurvives) {
  RunLog log = sample_log();
  log.aborted_iteration = 3;
  log.error = "non-finite";
  std::stringstream s;
  write_jsonl(s, log);
  const RunLog back = read_jsonl(s);
  ASSERT_TRUE(back.aborted_iteration.has_value());
  EXPECT_EQ(*back.aborted_iteration, 3);
  EXPECT_EQ(back.error, "non-finite");
}

TEST(RunLog, MalformedInputThrows) {
  for (const char* text : {"", "{\"type\":\"iteration\"}\n", "{not json}\n",
                           "{\"type\":\"header\",\"mode\":\"cbf\",\"task\":\"t\",\"seed\":1}\n{\"type\":\"mystery\"}\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_jsonl(in), std::runtime_error) << text;
  }
}

TEST(RunLog, CsvHasOneRowPerRecord) {
  std::stringstream s, t;
  write_csv(s, sample_log());
  write_timing_csv(t, sample_log());
  int rows = 0;
  for (std::string line; std::getline(s, line);) ++rows;
  EXPECT_EQ(rows, 4);
  std::string header, first;
  std::getline(t, header);
  std::getline(t, first);
  EXPECT_EQ(header, "iteration,wall_time");
  EXPECT_EQ(first, "0,0.000000");
}
