#include "cellfree/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cellfree/errors.hpp"

namespace cellfree {

bool BeamformingMatrix::entries_in_range() const {
  return w.size() > 0 && w.minCoeff() >= 0.0 && w.maxCoeff() <= 1.0;
}

bool BeamformingMatrix::columns_normalized(double tol) const {
  for (Eigen::Index k = 0; k < w.cols(); ++k)
    if (std::abs(w.col(k).sum() - 1.0) > tol) return false;
  return true;
}

Eigen::VectorXd BeamformingMatrix::flatten() const {
  return Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
}

BeamformingMatrix BeamformingMatrix::unflatten(const Eigen::VectorXd& flat, int num_aps,
                                               int num_ues) {
  return {Eigen::Map<const Eigen::MatrixXd>(flat.data(), num_aps, num_ues)};
}

BeamformingMatrix project_to_simplex_columns(const Eigen::MatrixXd& raw) {
  BeamformingMatrix out{raw.cwiseMax(0.0).cwiseMin(1.0)};
  for (Eigen::Index k = 0; k < out.w.cols(); ++k) {
    const double s = out.w.col(k).sum();
    if (s > 0.0)
      out.w.col(k) /= s;
    else
      out.w.col(k).setConstant(1.0 / static_cast<double>(out.w.rows()));
  }
  return out;
}

BeamformingMatrix uniform_beamforming(int num_aps, int num_ues) {
  return {Eigen::MatrixXd::Constant(num_aps, num_ues, 1.0 / num_aps)};
}

SicOrder sic_order(const EffectiveStats& stats) {
  const int k_count = static_cast<int>(stats.channel_sum.size());
  SicOrder order;
  order.perm.resize(k_count);
  std::iota(order.perm.begin(), order.perm.end(), 0);
  std::stable_sort(order.perm.begin(), order.perm.end(), [&](int a, int b) {
    return stats.channel_sum(a) < stats.channel_sum(b);
  });
  order.rank.resize(k_count);
  for (int i = 0; i < k_count; ++i) order.rank[order.perm[i]] = i;
  return order;
}

EnvState sinr(const BeamformingMatrix& w, const EffectiveStats& stats, const SicOrder& order,
              SinrMode mode) {
  const int m_count = stats.num_aps();
  const int k_count = stats.num_ues();
  Eigen::VectorXd contamination(m_count);
  for (int m = 0; m < m_count; ++m) contamination(m) = stats.contamination_total(m);

  EnvState state;
  state.gamma.resize(k_count);
  for (int k = 0; k < k_count; ++k) {
    double num = 0.0;
    double den = 0.0;
    for (int m = 0; m < m_count; ++m) {
      const double w2 = w.w(m, k) * w.w(m, k);
      double inter = 0.0;
      for (int n = 0; n < k_count; ++n) {
        if (n == k) continue;
        if (mode == SinrMode::kSic && order.rank[n] > order.rank[k]) continue;
        inter += stats.sig(m, n);
      }
      num += w2 * stats.sig(m, k);
      den += w2 * (inter + contamination(m) + stats.psi(m, k));
    }
    if (!(den > 0.0))
      throw ZeroDenominator("SINR denominator vanishes for UE " + std::to_string(k));
    state.gamma(k) = num / den;
  }
  return state;
}

Eigen::VectorXd rate(const EnvState& state) {
  return state.gamma.unaryExpr([](double g) { return std::log2(1.0 + g); });
}

double transmit_power(const BeamformingMatrix& w, const NetworkConfig& cfg) {
  return w.w.squaredNorm() * cfg.pilot_energy() * cfg.p_u;
}

double total_power(const BeamformingMatrix& w, const NetworkConfig& cfg) {
  return transmit_power(w, cfg) + cfg.num_ues * cfg.p_ue + cfg.num_aps * cfg.p_ap;
}

double energy_efficiency(const BeamformingMatrix& w, const EffectiveStats& stats,
                         const SicOrder& order, const NetworkConfig& cfg) {
  return rate(sinr(w, stats, order, SinrMode::kSic)).sum() / total_power(w, cfg);
}

ConstraintFlags check_constraints(const BeamformingMatrix& w, const EffectiveStats& stats,
                                  const SicOrder& order, const NetworkConfig& cfg) {
  ConstraintFlags flags;
  const int m_count = stats.num_aps();
  const int k_count = stats.num_ues();
  for (int i = 1; i < k_count && flags.sic_ok; ++i) {
    const int ue = order.perm[i];
    double lhs = 0.0;
    for (int m = 0; m < m_count; ++m) {
      double earlier = 0.0;
      for (int j = 0; j < i; ++j) earlier += stats.sig(m, order.perm[j]);
      lhs += w.w(m, ue) * w.w(m, ue) * (stats.sig(m, ue) - earlier);
    }
    flags.sic_ok = lhs >= cfg.p_s;
  }
  flags.norm_ok = w.columns_normalized();
  flags.power_ok = transmit_power(w, cfg) <= cfg.p_max;
  return flags;
}

double reward(double eta_t, double eta_prev) { return eta_t - eta_prev; }

void PenaltyState::observe(double raw_reward) {
  ++count;
  mean_abs_reward += (std::abs(raw_reward) - mean_abs_reward) / static_cast<double>(count);
}

double PenaltyState::penalty(const PenaltyConfig& cfg, int violations) const {
  if (!cfg.enabled) return 0.0;
  return -std::abs(cfg.factor * mean_abs_reward) * violations;
}

StepOutcome env_step(double eta_prev, const BeamformingMatrix& action, const EffectiveStats& stats,
                     const SicOrder& order, const NetworkConfig& cfg,
                     const PenaltyConfig& penalty_cfg, PenaltyState& penalty_state) {
  StepOutcome out;
  out.next_state = sinr(action, stats, order, SinrMode::kSic);
  out.rates = rate(out.next_state);
  out.p_transmit = transmit_power(action, cfg);
  out.p_total = total_power(action, cfg);
  out.ee = out.rates.sum() / out.p_total;
  out.constraint_flags = check_constraints(action, stats, order, cfg);
  out.raw_reward = reward(out.ee, eta_prev);
  penalty_state.observe(out.raw_reward);
  out.reward = out.raw_reward + penalty_state.penalty(penalty_cfg, out.constraint_flags.violations());
  return out;
}

BeamformingMatrix baseline_waterfilling(const EffectiveStats& stats) {
  BeamformingMatrix out{stats.sig};
  for (Eigen::Index k = 0; k < out.w.cols(); ++k) {
    const double s = out.w.col(k).sum();
    if (!(s > 0.0))
      throw DegenerateColumn("effective channel column " + std::to_string(k) + " is all zero");
    out.w.col(k) /= s;
  }
  return out;
}

BeamformingMatrix baseline_random(const NetworkConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd raw(cfg.num_aps, cfg.num_ues);
  for (int k = 0; k < cfg.num_ues; ++k)
    for (int m = 0; m < cfg.num_aps; ++m) raw(m, k) = unit(rng);
  return project_to_simplex_columns(raw);
}

CellFreeEnv::CellFreeEnv(NetworkConfig cfg, EffectiveStats stats, PenaltyConfig penalty)
    : cfg_(std::move(cfg)),
      stats_(std::move(stats)),
      order_(sic_order(stats_)),
      penalty_cfg_(penalty) {}

EnvState CellFreeEnv::reset(Rng& rng) {
  const BeamformingMatrix start = baseline_random(cfg_, rng);
  eta_prev_ = energy_efficiency(start, stats_, order_, cfg_);
  return sinr(start, stats_, order_, SinrMode::kSic);
}

StepOutcome CellFreeEnv::step(const BeamformingMatrix& action) {
  StepOutcome out = env_step(eta_prev_, action, stats_, order_, cfg_, penalty_cfg_, penalty_state_);
  eta_prev_ = out.ee;
  return out;
}

}  // namespace cellfree
