#include "cellfree/netmodel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cellfree/errors.hpp"

namespace cellfree {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("invalid network config: " + what);
}

Eigen::Vector2d uniform_in_disk(double radius, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius * std::sqrt(unit(rng));
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace

void NetworkConfig::validate() const {
  require(num_aps >= 1, "M >= 1");
  require(num_ues >= 1, "K >= 1");
  require(tau_l >= 1, "tau_l >= 1");
  require(d_min > 0.0, "d_min > 0");
  require(radius > d_min, "radius > d_min");
  require(varsigma0 > 0.0, "varsigma0 > 0");
  require(delta_l > 0.0, "delta_l > 0");
  require(sigma2 > 0.0, "sigma2 > 0");
  require(p_ap > 0.0, "P_AP > 0");
  require(p_ue > 0.0, "P_UE > 0");
  require(p_s > 0.0, "P_s > 0");
  require(p_max > 0.0, "P_max > 0");
  require(p_u_max > 0.0, "P_u_max > 0");
  require(p_u >= 0.0 && p_u <= p_u_max, "0 <= p_u <= P_u_max");
}

double default_p_max(const NetworkConfig& cfg) {
  return cfg.num_ues * cfg.pilot_energy() * cfg.p_u_max;
}

double EffectiveStats::contamination_total(int m) const { return cont[m].sum(); }

Complex complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  const double re = normal(rng);
  const double im = normal(rng);
  return {re, im};
}

Topology topology_from_positions(const NetworkConfig& cfg, Eigen::MatrixX2d aps,
                                 Eigen::MatrixX2d ues) {
  Topology topo;
  topo.ap_positions = std::move(aps);
  topo.ue_positions = std::move(ues);
  const auto m_count = topo.ap_positions.rows();
  const auto k_count = topo.ue_positions.rows();
  topo.distance.resize(m_count, k_count);
  topo.beta.resize(m_count, k_count);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double d = (topo.ap_positions.row(m) - topo.ue_positions.row(k)).norm();
      const double clamped = std::max(d, cfg.d_min);
      topo.distance(m, k) = clamped;
      topo.beta(m, k) = cfg.varsigma0 / (clamped * clamped);
    }
  }
  return topo;
}

Topology generate_topology(const NetworkConfig& cfg, Rng& rng) {
  Eigen::MatrixX2d aps(cfg.num_aps, 2);
  Eigen::MatrixX2d ues(cfg.num_ues, 2);
  for (int m = 0; m < cfg.num_aps; ++m) aps.row(m) = uniform_in_disk(cfg.radius, rng);
  for (int k = 0; k < cfg.num_ues; ++k) ues.row(k) = uniform_in_disk(cfg.radius, rng);
  return topology_from_positions(cfg, std::move(aps), std::move(ues));
}

PilotBook pilot_book_from(Eigen::MatrixXcd phi) {
  PilotBook book;
  book.gram = phi.adjoint() * phi;
  book.phi = std::move(phi);
  return book;
}

PilotBook generate_pilots(const NetworkConfig& cfg, Rng& rng) {
  const int tau = cfg.tau_l;
  const int k_count = cfg.num_ues;
  Eigen::MatrixXcd phi(tau, k_count);

  if (cfg.pilot_mode == PilotMode::kOrthonormalReuse) {
    Eigen::MatrixXcd draw(tau, tau);
    for (int i = 0; i < tau; ++i)
      for (int j = 0; j < tau; ++j) draw(i, j) = complex_normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(draw);
    const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(tau, tau);
    for (int k = 0; k < k_count; ++k) {
      phi.col(k) = q.col(k % tau);
      phi.col(k) /= phi.col(k).norm();
    }
  } else {
    for (int k = 0; k < k_count; ++k) {
      for (int t = 0; t < tau; ++t) phi(t, k) = complex_normal(rng);
      phi.col(k) /= phi.col(k).norm();
    }
  }
  return pilot_book_from(std::move(phi));
}

ChannelState draw_channel(const Topology& topo, Rng& rng) {
  ChannelState ch;
  const auto m_count = topo.beta.rows();
  const auto k_count = topo.beta.cols();
  ch.h.resize(m_count, k_count);
  ch.g.resize(m_count, k_count);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    for (Eigen::Index k = 0; k < k_count; ++k) {
      ch.h(m, k) = complex_normal(rng);
      ch.g(m, k) = std::sqrt(topo.beta(m, k)) * ch.h(m, k);
    }
  }
  return ch;
}

Eigen::MatrixXcd receive_pilots(const ChannelState& ch, const PilotBook& pilots,
                                const NetworkConfig& cfg, Rng& rng) {
  const double amp = std::sqrt(cfg.pilot_energy());
  Eigen::MatrixXcd y = amp * (ch.g * pilots.phi.transpose());
  for (Eigen::Index m = 0; m < y.rows(); ++m)
    for (Eigen::Index t = 0; t < y.cols(); ++t) y(m, t) += complex_normal(rng, cfg.sigma2);
  return y;
}

Eigen::MatrixXcd project_pilot(const Eigen::MatrixXcd& received, const PilotBook& pilots) {
  // (m, k) = phi_k^H y_m
  return received * pilots.phi.conjugate();
}

Eigen::MatrixXd mmse_coefficients(const Topology& topo, const PilotBook& pilots,
                                  const NetworkConfig& cfg) {
  const double energy = cfg.pilot_energy();
  const double amp = std::sqrt(energy);
  const auto m_count = topo.beta.rows();
  const auto k_count = topo.beta.cols();
  const Eigen::MatrixXd overlap = pilots.gram.cwiseAbs2();

  Eigen::MatrixXd mu(m_count, k_count);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    for (Eigen::Index k = 0; k < k_count; ++k) {
      double weighted = 0.0;
      for (Eigen::Index n = 0; n < k_count; ++n) {
        const double b = cfg.mmse_index_mode == MmseIndexMode::kAsPrinted ? topo.beta(m, k)
                                                                          : topo.beta(m, n);
        weighted += b * overlap(k, n);
      }
      mu(m, k) = amp * topo.beta(m, k) / (energy * weighted + cfg.sigma2);
    }
  }
  return mu;
}

Eigen::MatrixXcd estimate_channel(const Eigen::MatrixXcd& y_proj, const Eigen::MatrixXd& mu) {
  return y_proj.cwiseProduct(mu.cast<Complex>());
}

EstimationResult run_estimation(const ChannelState& ch, const Topology& topo,
                                const PilotBook& pilots, const NetworkConfig& cfg, Rng& rng) {
  EstimationResult out;
  out.mu = mmse_coefficients(topo, pilots, cfg);
  out.y_proj = project_pilot(receive_pilots(ch, pilots, cfg, rng), pilots);
  out.g_hat = estimate_channel(out.y_proj, out.mu);
  return out;
}

EffectiveStats effective_channel_stats(const Topology& topo, const PilotBook& pilots,
                                       const NetworkConfig& cfg) {
  return effective_channel_stats(topo, pilots, cfg, mmse_coefficients(topo, pilots, cfg));
}

EffectiveStats effective_channel_stats(const Topology& topo, const PilotBook& pilots,
                                       const NetworkConfig& cfg, const Eigen::MatrixXd& mu) {
  const double scale = cfg.pilot_energy() * cfg.p_u;
  const auto m_count = topo.beta.rows();
  const auto k_count = topo.beta.cols();
  const Eigen::MatrixXd overlap = pilots.gram.cwiseAbs2();
  const Eigen::MatrixXd mu2 = mu.cwiseAbs2();

  EffectiveStats stats;
  stats.sig = scale * mu2.cwiseProduct(topo.beta);
  stats.cont.assign(m_count, Eigen::MatrixXd::Zero(k_count, k_count));
  stats.psi.resize(m_count, k_count);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    for (Eigen::Index p = 0; p < k_count; ++p)
      for (Eigen::Index q = 0; q < k_count; ++q)
        if (q != p) stats.cont[m](p, q) = scale * mu2(m, p) * overlap(p, q) * topo.beta(m, q);
    // Unit pilot norms: E|phi_s^H noise|^2 = sigma2.
    const double noise = cfg.p_u * mu2.row(m).sum() * cfg.sigma2 + cfg.sigma2;
    stats.psi.row(m).setConstant(noise);
  }
  stats.channel_sum = stats.sig.colwise().sum().transpose();
  return stats;
}

}  // namespace cellfree
