#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cellfree/netmodel.hpp"

namespace cellfree {

enum class OutputActivation { kNone, kColumnSoftmax };

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims{256, 128};
  int output_dim = 1;
  double leaky_slope = 0.01;
  OutputActivation output_activation = OutputActivation::kNone;
  // Softmax block length (M). The output is read as M x K column-major and
  // each UE column is normalized independently.
  int softmax_block = 0;

  void validate() const;
  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_in(int layer) const;
  int layer_out(int layer) const;
};

// weights[l] is out x in, biases[l] has length out.
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpParams zeros_like(const MlpParams& other);
  std::size_t parameter_count() const;
  bool same_shape(const MlpParams& other) const;
  bool all_finite() const;
  bool operator==(const MlpParams& other) const;

  // Visits every scalar parameter in a fixed order (layer, weights
  // column-major, then biases).
  template <typename F>
  void for_each(F&& f) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (Eigen::Index i = 0; i < weights[l].size(); ++i) f(weights[l].data()[i]);
      for (Eigen::Index i = 0; i < biases[l].size(); ++i) f(biases[l].data()[i]);
    }
  }
};

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer, (in x N)
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer, (out x N)
  Eigen::MatrixXd output;
};

struct Gradients {
  MlpParams params;
  Eigen::MatrixXd input;  // input_dim x N
};

struct AdamState {
  MlpParams first;
  MlpParams second;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& params, double beta1 = 0.9, double beta2 = 0.999,
                              double epsilon = 1e-8);
};

MlpParams init_params(const MlpSpec& spec, Rng& rng);

// Batch layout: one sample per column.
ForwardCache forward(const MlpParams& params, const MlpSpec& spec, const Eigen::MatrixXd& input);
Eigen::MatrixXd predict(const MlpParams& params, const MlpSpec& spec, const Eigen::MatrixXd& input);

// Reverse-mode gradients of sum(output .* output_grad). With
// want_param_grads = false only the input gradient is produced.
Gradients backward(const MlpParams& params, const MlpSpec& spec, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad, bool want_param_grads = true);

// Descent step: params -= lr * m_hat / (sqrt(v_hat) + eps). Negate grads to ascend.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, double lr);

// Returns tau * online + (1 - tau) * target.
MlpParams polyak_update(const MlpParams& target, const MlpParams& online, double tau);

struct FlopsCount {
  std::int64_t policy = 0;
  std::int64_t value = 0;
};

FlopsCount flops_inference(const MlpSpec& policy, const MlpSpec& value);

// Text snapshot: header, layer count, then per layer "out in", weights
// row-major and biases, all at round-trip precision.
void save_params(std::ostream& os, const MlpParams& params);
MlpParams load_params(std::istream& is);
void save_params(const std::string& path, const MlpParams& params);
MlpParams load_params(const std::string& path);

}  // namespace cellfree
