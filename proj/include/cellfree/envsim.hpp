#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cellfree/netmodel.hpp"

namespace cellfree {

inline constexpr double kColumnSumTolerance = 1e-9;

// The action: M x K receive weights in [0, 1], every UE column summing to 1.
struct BeamformingMatrix {
  Eigen::MatrixXd w;

  int num_aps() const { return static_cast<int>(w.rows()); }
  int num_ues() const { return static_cast<int>(w.cols()); }
  bool entries_in_range() const;
  bool columns_normalized(double tol = kColumnSumTolerance) const;
  bool valid() const { return entries_in_range() && columns_normalized(); }

  // Column-major flattening: UE k occupies indices [k*M, (k+1)*M).
  Eigen::VectorXd flatten() const;
  static BeamformingMatrix unflatten(const Eigen::VectorXd& flat, int num_aps, int num_ues);
};

// Clips to [0, 1] then rescales each column to unit sum. A column clipped
// to all zeros becomes uniform.
BeamformingMatrix project_to_simplex_columns(const Eigen::MatrixXd& raw);
BeamformingMatrix uniform_beamforming(int num_aps, int num_ues);

struct EnvState {
  Eigen::VectorXd gamma;
};

struct ConstraintFlags {
  bool sic_ok = true;
  bool norm_ok = true;
  bool power_ok = true;

  int violations() const { return !sic_ok + !norm_ok + !power_ok; }
};

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  double raw_reward = 0.0;  // before the constraint penalty
  double ee = 0.0;
  Eigen::VectorXd rates;
  double p_transmit = 0.0;
  double p_total = 0.0;
  ConstraintFlags constraint_flags;
};

// perm[i] is the UE decoded i-th (ascending channel_sum); rank is its inverse.
struct SicOrder {
  std::vector<int> perm;
  std::vector<int> rank;
};

enum class SinrMode { kSic, kNoSic };

SicOrder sic_order(const EffectiveStats& stats);

// gamma is indexed by original UE index in both modes.
EnvState sinr(const BeamformingMatrix& w, const EffectiveStats& stats, const SicOrder& order,
              SinrMode mode);

Eigen::VectorXd rate(const EnvState& state);

// P_K, the beamformed signal power term.
double transmit_power(const BeamformingMatrix& w, const NetworkConfig& cfg);
// P_K + K P_UE + M P_AP
double total_power(const BeamformingMatrix& w, const NetworkConfig& cfg);

double energy_efficiency(const BeamformingMatrix& w, const EffectiveStats& stats,
                         const SicOrder& order, const NetworkConfig& cfg);

ConstraintFlags check_constraints(const BeamformingMatrix& w, const EffectiveStats& stats,
                                  const SicOrder& order, const NetworkConfig& cfg);

double reward(double eta_t, double eta_prev);

struct PenaltyConfig {
  bool enabled = true;
  // Penalty per violated constraint, as a fraction of the running mean |reward|.
  double factor = 0.1;
};

// Running mean of the penalty-free |reward|, owned by one environment.
struct PenaltyState {
  double mean_abs_reward = 0.0;
  long long count = 0;

  void observe(double raw_reward);
  double penalty(const PenaltyConfig& cfg, int violations) const;
};

// One MDP transition. eta_prev is the EE of the previous action (or of the
// initial-state generating matrix at the first step).
StepOutcome env_step(double eta_prev, const BeamformingMatrix& action, const EffectiveStats& stats,
                     const SicOrder& order, const NetworkConfig& cfg,
                     const PenaltyConfig& penalty_cfg, PenaltyState& penalty_state);

BeamformingMatrix baseline_waterfilling(const EffectiveStats& stats);
BeamformingMatrix baseline_random(const NetworkConfig& cfg, Rng& rng);

// The continuing-task environment: statistics and SIC order are fixed per
// run; only the previous EE and the penalty statistics carry across steps.
class CellFreeEnv {
 public:
  CellFreeEnv(NetworkConfig cfg, EffectiveStats stats, PenaltyConfig penalty = {});

  // Draws a random matrix, returns its SINR as s_0.
  EnvState reset(Rng& rng);
  StepOutcome step(const BeamformingMatrix& action);

  const NetworkConfig& config() const { return cfg_; }
  const EffectiveStats& stats() const { return stats_; }
  const SicOrder& order() const { return order_; }
  int num_aps() const { return cfg_.num_aps; }
  int num_ues() const { return cfg_.num_ues; }
  double previous_ee() const { return eta_prev_; }

 private:
  NetworkConfig cfg_;
  EffectiveStats stats_;
  SicOrder order_;
  PenaltyConfig penalty_cfg_;
  PenaltyState penalty_state_;
  double eta_prev_ = 0.0;
};

}  // namespace cellfree
