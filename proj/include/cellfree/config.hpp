#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cellfree/ddpg.hpp"
#include "cellfree/envsim.hpp"
#include "cellfree/netmodel.hpp"

namespace cellfree {

enum class ExperimentKind {
  kConvergence,
  kSweepPower,
  kSweepDiscount,
  kSweepHidden,
  kBaselines,
  kFlops,
};

std::string_view experiment_name(ExperimentKind kind);
ExperimentKind parse_experiment(std::string_view name);

struct ExperimentSpec {
  NetworkConfig network;
  Hyperparameters hyper;
  PenaltyConfig penalty;
  ExperimentKind experiment = ExperimentKind::kConvergence;
  // Raw list entries; their meaning depends on the sweep axis.
  std::vector<std::string> sweep_values;
  std::string output_dir = "out";
  int replicates = 5;
  int final_window = 100;
  int jobs = 1;

  void validate() const;
};

// Default experiment spec: the reference network and training setup.
ExperimentSpec paper_defaults();

// "<number> dBm" and "<number> dB" convert to linear, "<number> mW" and a
// bare number are taken as already linear.
double parse_power(std::string_view text);
double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

// "256x128" -> {256, 128}
std::vector<int> parse_hidden_dims(std::string_view text);
std::string format_hidden_dims(const std::vector<int>& dims);

// Line-oriented "key = value" with '#' comments. Keys not present keep the
// defaults of paper_defaults() except for the required network keys.
ExperimentSpec parse_config(std::istream& is);
ExperimentSpec load_config(const std::string& path);

// Every resolved field in linear units; parse_config reads it back.
void write_resolved_config(std::ostream& os, const ExperimentSpec& spec);

}  // namespace cellfree
