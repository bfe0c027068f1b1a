#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace cellfree {

using Rng = std::mt19937_64;
using Complex = std::complex<double>;

enum class PilotMode { kOrthonormalReuse, kRandomUnit };
// How the MMSE denominator indexes the large-scale coefficient inside the
// sum over interfering UEs: kAsPrinted uses beta[m][k] for every term,
// kPerInterferer uses beta[m][n] (the textbook MMSE form).
enum class MmseIndexMode { kAsPrinted, kPerInterferer };

// All power quantities are linear and milliwatt-referenced.
struct NetworkConfig {
  int num_aps = 10;
  int num_ues = 6;
  double radius = 20.0;
  double d_min = 1.0;
  double varsigma0 = 1e-3;
  int tau_l = 6;
  double delta_l = 100.0;
  double p_u = 39.810717055349734;
  double p_u_max = 251.18864315095823;
  double sigma2 = 1e-8;
  double p_ap = 100.0;
  double p_ue = 100.0;
  double p_s = 1.2589254117941673;
  double p_max = 904279.1153434496;
  PilotMode pilot_mode = PilotMode::kRandomUnit;
  MmseIndexMode mmse_index_mode = MmseIndexMode::kAsPrinted;
  std::uint64_t seed = 1;

  // Throws ValidationError naming the first violated invariant.
  void validate() const;

  double pilot_energy() const { return tau_l * delta_l; }
};

// Largest P_K any valid beamforming matrix can draw at p_u = p_u_max.
double default_p_max(const NetworkConfig& cfg);

struct Topology {
  Eigen::MatrixX2d ap_positions;
  Eigen::MatrixX2d ue_positions;
  Eigen::MatrixXd distance;  // M x K, meters, clamped at d_min
  Eigen::MatrixXd beta;      // M x K, linear
};

struct PilotBook {
  Eigen::MatrixXcd phi;   // tau_l x K, column k is UE k's pilot
  Eigen::MatrixXcd gram;  // K x K, gram(k, n) = phi_k^H phi_n
};

struct ChannelState {
  Eigen::MatrixXcd h;  // small-scale, CN(0,1)
  Eigen::MatrixXcd g;  // sqrt(beta) .* h
};

struct EstimationResult {
  Eigen::MatrixXd mu;
  Eigen::MatrixXcd g_hat;
  Eigen::MatrixXcd y_proj;
};

// Expected effective-channel powers that replace instantaneous channels in
// the SINR. cont[m](p, q) is the pilot-contamination power seen at AP m.
struct EffectiveStats {
  Eigen::MatrixXd sig;               // M x K
  std::vector<Eigen::MatrixXd> cont;  // M entries of K x K, zero diagonal
  Eigen::MatrixXd psi;               // M x K
  Eigen::VectorXd channel_sum;       // K

  int num_aps() const { return static_cast<int>(sig.rows()); }
  int num_ues() const { return static_cast<int>(sig.cols()); }
  // Sum over p and q != p of cont[m](p, q).
  double contamination_total(int m) const;
};

Topology generate_topology(const NetworkConfig& cfg, Rng& rng);
// Builds distance and beta from explicit positions.
Topology topology_from_positions(const NetworkConfig& cfg, Eigen::MatrixX2d aps,
                                 Eigen::MatrixX2d ues);

PilotBook generate_pilots(const NetworkConfig& cfg, Rng& rng);
PilotBook pilot_book_from(Eigen::MatrixXcd phi);

ChannelState draw_channel(const Topology& topo, Rng& rng);

// M x tau_l; row m is the pilot observation at AP m.
Eigen::MatrixXcd receive_pilots(const ChannelState& ch, const PilotBook& pilots,
                                const NetworkConfig& cfg, Rng& rng);
Eigen::MatrixXcd project_pilot(const Eigen::MatrixXcd& received, const PilotBook& pilots);

Eigen::MatrixXd mmse_coefficients(const Topology& topo, const PilotBook& pilots,
                                  const NetworkConfig& cfg);
Eigen::MatrixXcd estimate_channel(const Eigen::MatrixXcd& y_proj, const Eigen::MatrixXd& mu);

// One full pilot phase: receive, project, estimate.
EstimationResult run_estimation(const ChannelState& ch, const Topology& topo,
                                const PilotBook& pilots, const NetworkConfig& cfg, Rng& rng);

EffectiveStats effective_channel_stats(const Topology& topo, const PilotBook& pilots,
                                       const NetworkConfig& cfg);
EffectiveStats effective_channel_stats(const Topology& topo, const PilotBook& pilots,
                                       const NetworkConfig& cfg, const Eigen::MatrixXd& mu);

// Circularly-symmetric complex normal with the given variance.
Complex complex_normal(Rng& rng, double variance = 1.0);

}  // namespace cellfree
