#include "cellfree/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cellfree/errors.hpp"

namespace cellfree {

Batch Batch::from(const std::vector<Transition>& transitions) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  if (n == 0) return b;
  b.states.resize(transitions.front().state.size(), n);
  b.actions.resize(transitions.front().action.size(), n);
  b.next_states.resize(transitions.front().next_state.size(), n);
  b.rewards.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = transitions[i];
    b.states.col(i) = t.state;
    b.actions.col(i) = t.action;
    b.rewards(i) = t.reward;
    b.next_states.col(i) = t.next_state;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::store(Transition t) {
  if (slots_.size() < capacity_) {
    slots_.push_back(std::move(t));
  } else {
    slots_[head_] = std::move(t);
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void ReplayBuffer::clear() {
  slots_.clear();
  head_ = 0;
  size_ = 0;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay buffer index");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return slots_[(oldest + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (size_ < n)
    throw InsufficientSamples("need " + std::to_string(n) + " transitions, have " +
                              std::to_string(size_));
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Batch ReplayBuffer::sample_minibatch(std::size_t n, Rng& rng) const {
  const auto idx = sample_indices(n, rng);
  const Transition& first = slots_[idx.front()];
  Batch b;
  b.states.resize(first.state.size(), n);
  b.actions.resize(first.action.size(), n);
  b.next_states.resize(first.next_state.size(), n);
  b.rewards.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = slots_[idx[i]];
    b.states.col(i) = t.state;
    b.actions.col(i) = t.action;
    b.rewards(i) = t.reward;
    b.next_states.col(i) = t.next_state;
  }
  return b;
}

void Hyperparameters::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("invalid hyperparameters: ") + what);
  };
  require(zeta >= 0.0 && zeta <= 1.0, "zeta in [0, 1]");
  require(tau > 0.0 && tau <= 1.0, "tau in (0, 1]");
  require(batch_size >= 1, "N >= 1");
  require(episodes >= 1, "episodes >= 1");
  require(steps_per_episode >= 1, "steps_per_episode >= 1");
  require(lr_actor >= 0.0 && lr_critic >= 0.0, "learning rates >= 0");
  require(noise_sigma0 >= 0.0 && noise_decay > 0.0, "noise schedule");
  require(buffer_capacity >= 1, "buffer_capacity >= 1");
  require(!hidden_dims.empty(), "at least one hidden layer");
  for (int h : hidden_dims) require(h > 0, "hidden dims > 0");
  require(reward_scale > 0.0, "reward_scale > 0");
}

MlpSpec actor_spec_for(int num_aps, int num_ues, const Hyperparameters& hp) {
  MlpSpec s;
  s.input_dim = num_ues;
  s.hidden_dims = hp.hidden_dims;
  s.output_dim = num_aps * num_ues;
  s.leaky_slope = hp.leaky_slope;
  s.output_activation = OutputActivation::kColumnSoftmax;
  s.softmax_block = num_aps;
  return s;
}

MlpSpec critic_spec_for(int num_aps, int num_ues, const Hyperparameters& hp) {
  MlpSpec s;
  s.input_dim = num_ues + num_aps * num_ues;
  s.hidden_dims = hp.hidden_dims;
  s.output_dim = 1;
  s.leaky_slope = hp.leaky_slope;
  s.output_activation = OutputActivation::kNone;
  return s;
}

Agent new_agent(int num_aps, int num_ues, const Hyperparameters& hp, Rng& rng) {
  Agent a;
  a.num_aps = num_aps;
  a.num_ues = num_ues;
  a.actor_spec = actor_spec_for(num_aps, num_ues, hp);
  a.critic_spec = critic_spec_for(num_aps, num_ues, hp);
  a.actor = init_params(a.actor_spec, rng);
  a.critic = init_params(a.critic_spec, rng);
  a.actor_target = a.actor;
  a.critic_target = a.critic;
  a.actor_adam = AdamState::for_params(a.actor, hp.adam_beta1, hp.adam_beta2, hp.adam_epsilon);
  a.critic_adam = AdamState::for_params(a.critic, hp.adam_beta1, hp.adam_beta2, hp.adam_epsilon);
  a.noise_sigma = hp.noise_sigma0;
  return a;
}

BeamformingMatrix select_action(const Agent& agent, const Eigen::VectorXd& state, bool explore,
                                Rng& rng) {
  const Eigen::VectorXd out = predict(agent.actor, agent.actor_spec, state);
  Eigen::MatrixXd w = Eigen::Map<const Eigen::MatrixXd>(out.data(), agent.num_aps, agent.num_ues);
  if (!explore) return {w};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += agent.noise_sigma * noise(rng);
  return project_to_simplex_columns(w);
}

double exploration_sigma(const Hyperparameters& hp, int episodes_done) {
  return hp.noise_sigma0 * std::pow(hp.noise_decay, episodes_done);
}

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

Eigen::VectorXd critic_targets(const Batch& batch, const Agent& agent, double zeta) {
  if (zeta == 0.0) return batch.rewards;
  const Eigen::MatrixXd next_actions =
      predict(agent.actor_target, agent.actor_spec, batch.next_states);
  const Eigen::MatrixXd q_next = predict(agent.critic_target, agent.critic_spec,
                                         critic_input(batch.next_states, next_actions));
  return batch.rewards + zeta * q_next.row(0).transpose();
}

LossAndGradient critic_loss_gradient(const Agent& agent, const Batch& batch,
                                     const Eigen::VectorXd& targets) {
  const double n = static_cast<double>(batch.size());
  const ForwardCache cache =
      forward(agent.critic, agent.critic_spec, critic_input(batch.states, batch.actions));
  const Eigen::VectorXd residual = targets - cache.output.row(0).transpose();
  const Eigen::MatrixXd d_out = (-2.0 / n) * residual.transpose();
  LossAndGradient out;
  out.value = residual.squaredNorm() / n;
  out.grad = backward(agent.critic, agent.critic_spec, cache, d_out).params;
  return out;
}

LossAndGradient actor_objective_gradient(const Agent& agent, const Batch& batch) {
  const double n = static_cast<double>(batch.size());
  const ForwardCache actor_cache = forward(agent.actor, agent.actor_spec, batch.states);
  const ForwardCache critic_cache = forward(agent.critic, agent.critic_spec,
                                            critic_input(batch.states, actor_cache.output));
  const Eigen::MatrixXd d_q = Eigen::MatrixXd::Constant(1, batch.size(), 1.0 / n);
  const Gradients through_critic =
      backward(agent.critic, agent.critic_spec, critic_cache, d_q, /*want_param_grads=*/false);
  const Eigen::MatrixXd d_action = through_critic.input.bottomRows(actor_cache.output.rows());

  LossAndGradient out;
  out.value = critic_cache.output.mean();
  out.grad = backward(agent.actor, agent.actor_spec, actor_cache, d_action).params;
  return out;
}

double critic_update(Agent& agent, const Batch& batch, const Eigen::VectorXd& targets,
                     double lr_critic) {
  LossAndGradient lg = critic_loss_gradient(agent, batch, targets);
  adam_step(agent.critic, lg.grad, agent.critic_adam, lr_critic);
  return lg.value;
}

double actor_update(Agent& agent, const Batch& batch, double lr_actor) {
  LossAndGradient lg = actor_objective_gradient(agent, batch);
  // Ascent on the objective.
  lg.grad.for_each([](double& g) { g = -g; });
  adam_step(agent.actor, lg.grad, agent.actor_adam, lr_actor);
  return lg.value;
}

void soft_update(Agent& agent, double tau) {
  agent.critic_target = polyak_update(agent.critic_target, agent.critic, tau);
  agent.actor_target = polyak_update(agent.actor_target, agent.actor, tau);
}

namespace {

struct UpdateResult {
  double critic_loss = 0.0;
  double mean_q = 0.0;
};

UpdateResult update_once(Agent& agent, const ReplayBuffer& buffer, const Hyperparameters& hp,
                         Rng& rng) {
  const Batch batch = buffer.sample_minibatch(static_cast<std::size_t>(hp.batch_size), rng);
  const Eigen::VectorXd y = critic_targets(batch, agent, hp.zeta);
  UpdateResult r;
  r.critic_loss = critic_update(agent, batch, y, hp.lr_critic);
  r.mean_q = actor_update(agent, batch, hp.lr_actor);
  soft_update(agent, hp.tau);
  return r;
}

}  // namespace

TrainingHistory train(CellFreeEnv& env, Agent& agent, const Hyperparameters& hp, Rng& rng,
                      const EpisodeCallback& on_episode) {
  hp.validate();
  if (agent.num_aps != env.num_aps() || agent.num_ues != env.num_ues())
    throw std::invalid_argument("agent and environment dimensions differ");

  ReplayBuffer buffer(hp.buffer_capacity);
  const auto warm = static_cast<std::size_t>(hp.batch_size);
  TrainingHistory history;
  history.reserve(hp.episodes);

  for (int episode = 0; episode < hp.episodes; ++episode) {
    agent.noise_sigma = exploration_sigma(hp, episode);
    if (hp.buffer_reset_per_episode) buffer.clear();

    EpisodeMetrics m;
    m.episode = episode;
    double loss_sum = 0.0;
    double q_sum = 0.0;
    auto do_update = [&] {
      if (buffer.size() < warm) return;
      const UpdateResult r = update_once(agent, buffer, hp, rng);
      loss_sum += r.critic_loss;
      q_sum += r.mean_q;
      ++m.updates;
    };

    Eigen::VectorXd state = env.reset(rng).gamma;
    for (int t = 0; t < hp.steps_per_episode; ++t) {
      const BeamformingMatrix action = select_action(agent, state, /*explore=*/true, rng);
      const StepOutcome out = env.step(action);
      buffer.store({state, action.flatten(), hp.reward_scale * out.reward, out.next_state.gamma});
      state = out.next_state.gamma;

      m.mean_ee += out.ee;
      m.mean_reward += out.reward;
      m.constraint_violations += out.constraint_flags.violations();
      if (hp.cadence == UpdateCadence::kPerStep) do_update();
    }
    if (hp.cadence == UpdateCadence::kPerEpisode) do_update();

    m.mean_ee /= hp.steps_per_episode;
    m.mean_reward /= hp.steps_per_episode;
    if (m.updates > 0) {
      m.critic_loss = loss_sum / m.updates;
      m.mean_q = q_sum / m.updates;
    }
    history.push_back(m);
    if (on_episode) on_episode(m);
  }
  return history;
}

double final_mean_ee(const TrainingHistory& history, int window) {
  if (history.empty()) return 0.0;
  const std::size_t n = std::min<std::size_t>(history.size(), static_cast<std::size_t>(window));
  double s = 0.0;
  for (std::size_t i = history.size() - n; i < history.size(); ++i) s += history[i].mean_ee;
  return s / static_cast<double>(n);
}

}  // namespace cellfree
