#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cellfree/envsim.hpp"
#include "cellfree/neural.hpp"

namespace cellfree {

struct Transition {
  Eigen::VectorXd state;   // K SINR values
  Eigen::VectorXd action;  // M*K weights, column-major
  double reward = 0.0;
  Eigen::VectorXd next_state;
};

// Column i of each matrix is sample i.
struct Batch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::VectorXd rewards;
  Eigen::MatrixXd next_states;

  Eigen::Index size() const { return rewards.size(); }
  static Batch from(const std::vector<Transition>& transitions);
};

// Fixed-capacity FIFO store; the oldest transition is overwritten when full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void store(Transition t);
  void clear();
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  // i = 0 is the oldest retained transition.
  const Transition& at(std::size_t i) const;

  // Uniform with replacement over occupied slots. Throws InsufficientSamples
  // when fewer than n transitions are held.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  Batch sample_minibatch(std::size_t n, Rng& rng) const;

 private:
  std::vector<Transition> slots_;
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
};

enum class UpdateCadence { kPerStep, kPerEpisode };

struct Hyperparameters {
  double zeta = 0.7;
  double lr_actor = 0.01;
  double lr_critic = 0.02;
  double tau = 0.006;
  int batch_size = 32;
  int episodes = 1000;
  int steps_per_episode = 200;
  double noise_sigma0 = 0.1;
  double noise_decay = 0.995;
  std::size_t buffer_capacity = 100000;
  bool buffer_reset_per_episode = false;
  UpdateCadence cadence = UpdateCadence::kPerStep;
  std::vector<int> hidden_dims{256, 128};
  double leaky_slope = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Multiplies rewards before they enter the replay buffer. Reported EE
  // and rewards stay in natural units.
  double reward_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Agent {
  int num_aps = 0;
  int num_ues = 0;
  MlpSpec actor_spec;
  MlpSpec critic_spec;
  MlpParams actor;
  MlpParams actor_target;
  MlpParams critic;
  MlpParams critic_target;
  AdamState actor_adam;
  AdamState critic_adam;
  double noise_sigma = 0.0;
};

MlpSpec actor_spec_for(int num_aps, int num_ues, const Hyperparameters& hp);
MlpSpec critic_spec_for(int num_aps, int num_ues, const Hyperparameters& hp);

Agent new_agent(int num_aps, int num_ues, const Hyperparameters& hp, Rng& rng);

BeamformingMatrix select_action(const Agent& agent, const Eigen::VectorXd& state, bool explore,
                                Rng& rng);
double exploration_sigma(const Hyperparameters& hp, int episodes_done);

// Stacks [state; action] column-wise as the critic input.
Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions);

Eigen::VectorXd critic_targets(const Batch& batch, const Agent& agent, double zeta);

struct LossAndGradient {
  double value = 0.0;
  MlpParams grad;
};

// Mean squared Bellman error and its gradient w.r.t. the online critic.
LossAndGradient critic_loss_gradient(const Agent& agent, const Batch& batch,
                                     const Eigen::VectorXd& targets);
// Mean Q(s_i, u(s_i)) and its gradient w.r.t. the online actor, chained
// through the critic's action input.
LossAndGradient actor_objective_gradient(const Agent& agent, const Batch& batch);

// Returns the batch loss before the step.
double critic_update(Agent& agent, const Batch& batch, const Eigen::VectorXd& targets,
                     double lr_critic);
// Returns the batch objective before the step.
double actor_update(Agent& agent, const Batch& batch, double lr_actor);
void soft_update(Agent& agent, double tau);

struct EpisodeMetrics {
  int episode = 0;
  double mean_ee = 0.0;
  double mean_reward = 0.0;
  double critic_loss = 0.0;  // mean over the episode's updates, 0 when none
  double mean_q = 0.0;
  int constraint_violations = 0;
  int updates = 0;
};

using TrainingHistory = std::vector<EpisodeMetrics>;
using EpisodeCallback = std::function<void(const EpisodeMetrics&)>;

TrainingHistory train(CellFreeEnv& env, Agent& agent, const Hyperparameters& hp, Rng& rng,
                      const EpisodeCallback& on_episode = {});

// Mean of mean_ee over the last `window` episodes (all, if fewer).
double final_mean_ee(const TrainingHistory& history, int window = 100);

}  // namespace cellfree
