#include "cellfree/neural.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace cellfree {

namespace {

constexpr const char* kSnapshotMagic = "cellfree-mlp";
constexpr int kSnapshotVersion = 1;

void column_softmax(Eigen::MatrixXd& z, int block) {
  const Eigen::Index blocks = z.rows() / block;
  for (Eigen::Index n = 0; n < z.cols(); ++n) {
    for (Eigen::Index b = 0; b < blocks; ++b) {
      auto seg = z.col(n).segment(b * block, block);
      const double top = seg.maxCoeff();
      seg = (seg.array() - top).exp().matrix();
      seg /= seg.sum();
    }
  }
}

Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& s, const Eigen::MatrixXd& dy, int block) {
  Eigen::MatrixXd dz(s.rows(), s.cols());
  const Eigen::Index blocks = s.rows() / block;
  for (Eigen::Index n = 0; n < s.cols(); ++n) {
    for (Eigen::Index b = 0; b < blocks; ++b) {
      const auto sb = s.col(n).segment(b * block, block);
      const auto gb = dy.col(n).segment(b * block, block);
      const double inner = sb.dot(gb);
      dz.col(n).segment(b * block, block) = sb.cwiseProduct((gb.array() - inner).matrix());
    }
  }
  return dz;
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) throw std::invalid_argument("MLP dims must be positive");
  for (int h : hidden_dims)
    if (h <= 0) throw std::invalid_argument("MLP hidden dims must be positive");
  if (output_activation == OutputActivation::kColumnSoftmax &&
      (softmax_block <= 0 || output_dim % softmax_block != 0))
    throw std::invalid_argument("column softmax needs output_dim = M * K");
}

int MlpSpec::layer_in(int layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

int MlpSpec::layer_out(int layer) const {
  return layer == num_layers() - 1 ? output_dim : hidden_dims[layer];
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
  MlpParams out;
  for (const auto& w : other.weights) out.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : other.biases) out.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return out;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() || biases[l].size() != other.biases[l].size())
      return false;
  }
  return true;
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  return true;
}

AdamState AdamState::for_params(const MlpParams& params, double beta1, double beta2,
                                double epsilon) {
  AdamState s;
  s.first = MlpParams::zeros_like(params);
  s.second = MlpParams::zeros_like(params);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

MlpParams init_params(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  MlpParams params;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_in(l);
    const int out = spec.layer_out(l);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    params.weights.push_back(std::move(w));
    params.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return params;
}

ForwardCache forward(const MlpParams& params, const MlpSpec& spec, const Eigen::MatrixXd& input) {
  const int layers = spec.num_layers();
  ForwardCache cache;
  cache.inputs.reserve(layers);
  cache.pre.reserve(layers);
  Eigen::MatrixXd a = input;
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = params.weights[l] * a;
    z.colwise() += params.biases[l];
    cache.inputs.push_back(std::move(a));
    if (l + 1 < layers) {
      const double slope = spec.leaky_slope;
      a = z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    } else {
      a = z;
      if (spec.output_activation == OutputActivation::kColumnSoftmax)
        column_softmax(a, spec.softmax_block);
    }
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(a);
  return cache;
}

Eigen::MatrixXd predict(const MlpParams& params, const MlpSpec& spec, const Eigen::MatrixXd& input) {
  return forward(params, spec, input).output;
}

Gradients backward(const MlpParams& params, const MlpSpec& spec, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad, bool want_param_grads) {
  const int layers = spec.num_layers();
  Gradients grads;
  if (want_param_grads) {
    grads.params.weights.resize(layers);
    grads.params.biases.resize(layers);
  }

  Eigen::MatrixXd dz = spec.output_activation == OutputActivation::kColumnSoftmax
                           ? softmax_backward(cache.output, output_grad, spec.softmax_block)
                           : output_grad;
  for (int l = layers - 1; l >= 0; --l) {
    if (want_param_grads) {
      grads.params.weights[l] = dz * cache.inputs[l].transpose();
      grads.params.biases[l] = dz.rowwise().sum();
    }
    Eigen::MatrixXd da = params.weights[l].transpose() * dz;
    if (l == 0) {
      grads.input = std::move(da);
      break;
    }
    const Eigen::MatrixXd& z = cache.pre[l - 1];
    const double slope = spec.leaky_slope;
    dz = da.array() * z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }).array();
  }
  return grads;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, double lr) {
  ++state.step;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double eps = state.epsilon;

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], grads.weights[l], state.first.weights[l], state.second.weights[l]);
    update(params.biases[l], grads.biases[l], state.first.biases[l], state.second.biases[l]);
  }
}

MlpParams polyak_update(const MlpParams& target, const MlpParams& online, double tau) {
  MlpParams out;
  out.weights.reserve(target.weights.size());
  out.biases.reserve(target.biases.size());
  for (std::size_t l = 0; l < target.weights.size(); ++l) {
    out.weights.push_back(tau * online.weights[l] + (1.0 - tau) * target.weights[l]);
    out.biases.push_back(tau * online.biases[l] + (1.0 - tau) * target.biases[l]);
  }
  return out;
}

FlopsCount flops_inference(const MlpSpec& policy, const MlpSpec& value) {
  auto hidden_chain = [](const std::vector<int>& h) {
    std::int64_t s = 0;
    for (std::size_t i = 1; i < h.size(); ++i) s += std::int64_t{h[i - 1]} * h[i];
    return s;
  };
  // |S|, |A| from the policy; the value net takes [state; action].
  const std::int64_t s_dim = policy.input_dim;
  const std::int64_t a_dim = policy.output_dim;
  FlopsCount out;
  out.policy = s_dim * policy.hidden_dims.front() + hidden_chain(policy.hidden_dims) +
               a_dim * policy.hidden_dims.back();
  out.value = std::int64_t{value.input_dim} * value.hidden_dims.front() +
              hidden_chain(value.hidden_dims) + value.hidden_dims.back();
  return out;
}

void save_params(std::ostream& os, const MlpParams& params) {
  os << kSnapshotMagic << ' ' << kSnapshotVersion << '\n';
  os << "layers " << params.weights.size() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    os << "layer " << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) os << (c ? " " : "") << w(r, c);
      os << '\n';
    }
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i)
      os << (i ? " " : "") << params.biases[l](i);
    os << '\n';
  }
}

MlpParams load_params(std::istream& is) {
  std::string magic, tag;
  int version = 0;
  std::size_t layers = 0;
  if (!(is >> magic >> version) || magic != kSnapshotMagic)
    throw std::runtime_error("not a parameter snapshot");
  if (version != kSnapshotVersion)
    throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
  if (!(is >> tag >> layers) || tag != "layers") throw std::runtime_error("bad snapshot header");
  MlpParams params;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> tag >> rows >> cols) || tag != "layer" || rows <= 0 || cols <= 0)
      throw std::runtime_error("bad layer header in snapshot");
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(is >> w(r, c))) throw std::runtime_error("truncated snapshot");
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i)
      if (!(is >> b(i))) throw std::runtime_error("truncated snapshot");
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

void save_params(const std::string& path, const MlpParams& params) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  save_params(os, params);
}

MlpParams load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return load_params(is);
}

}  // namespace cellfree
