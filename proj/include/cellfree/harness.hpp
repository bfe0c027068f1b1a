#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cellfree/config.hpp"
#include "cellfree/ddpg.hpp"

namespace cellfree {

// One self-contained training run: topology, pilots, agent and buffer all
// derive from `seed`. Baselines are evaluated on the same statistics.
struct RunOutcome {
  std::uint64_t seed = 0;
  std::string sweep_value;
  TrainingHistory history;
  double waterfilling_ee = 0.0;
  double random_ee = 0.0;  // mean over one episode's worth of random matrices
  int waterfilling_violations = 0;
  int random_violations = 0;
  double wall_seconds = 0.0;
  Agent agent;
};

struct RunSetup {
  NetworkConfig network;
  Hyperparameters hyper;
  PenaltyConfig penalty;
  std::uint64_t seed = 0;
  std::string sweep_value;
};

// Builds the per-run environment exactly as run_training does.
CellFreeEnv make_environment(const NetworkConfig& network, const PenaltyConfig& penalty,
                             std::uint64_t seed);
RunOutcome run_training(const RunSetup& setup);

// Runs setups on up to `jobs` threads; results come back in input order.
std::vector<RunOutcome> run_all(const std::vector<RunSetup>& setups, int jobs);

std::uint64_t replicate_seed(const ExperimentSpec& spec, int replicate);

// Applies one sweep entry to a copy of the spec's network/hyperparameters.
// Power entries are dBm unless they carry a unit.
RunSetup setup_for(const ExperimentSpec& spec, std::string_view sweep_value, int replicate);

struct ConvergenceResult {
  std::vector<RunOutcome> runs;
};

struct SweepSummaryRow {
  std::string value;
  std::uint64_t seed = 0;
  double final_ee = 0.0;
};

struct SweepStatsRow {
  std::string value;
  double mean = 0.0;
  double stddev = 0.0;
  int replicates = 0;
};

struct SweepResult {
  ExperimentKind axis = ExperimentKind::kSweepPower;
  std::vector<RunOutcome> runs;
  std::vector<SweepSummaryRow> summary;
  std::vector<SweepStatsRow> stats;  // one row per sweep value, in sweep order
};

struct BaselineRow {
  std::string method;
  std::uint64_t seed = 0;
  double ee = 0.0;
  double p_total = 0.0;
  ConstraintFlags flags;
  double max_column_error = 0.0;
  Eigen::VectorXd gamma;
  Eigen::VectorXd rates;
};

struct BaselineReport {
  std::vector<BaselineRow> rows;
  double random_mean_ee = 0.0;
};

struct FlopsReport {
  FlopsCount configured;
  FlopsCount reference;  // 10 APs, 6 UEs, 256x128
};

ConvergenceResult run_convergence(const ExperimentSpec& spec);
SweepResult run_sweep(const ExperimentSpec& spec);
BaselineReport run_baselines(const ExperimentSpec& spec);
FlopsReport run_flops_report(const ExperimentSpec& spec);

// Index (0-based) of the first episode whose mean EE reaches `fraction` of
// the final-window mean, or -1.
int episodes_to_fraction(const TrainingHistory& history, double fraction, int window);

// CSV emitters. Data files carry no timing columns, so reruns are byte-identical.
void write_history_csv(std::ostream& os, ExperimentKind kind, const std::vector<RunOutcome>& runs,
                       bool include_baselines);
void write_convergence_summary_csv(std::ostream& os, const ConvergenceResult& result, int window);
void write_sweep_summary_csv(std::ostream& os, const SweepResult& result);
void write_sweep_stats_csv(std::ostream& os, const SweepResult& result);
void write_timing_csv(std::ostream& os, const std::vector<RunOutcome>& runs);
void write_baselines_csv(std::ostream& os, const BaselineReport& report);
void write_flops_csv(std::ostream& os, const FlopsCount& flops);

// Runs the spec's experiment and writes every output file under
// spec.output_dir. Returns the process exit code.
int run_experiment(const ExperimentSpec& spec, std::ostream& log);

}  // namespace cellfree
