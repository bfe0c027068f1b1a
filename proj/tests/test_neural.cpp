#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cellfree/neural.hpp"

using namespace cellfree;

namespace {

MlpSpec small_spec(OutputActivation act, int block = 0) {
  MlpSpec s;
  s.input_dim = 4;
  s.hidden_dims = {5, 3};
  s.output_dim = act == OutputActivation::kColumnSoftmax ? 6 : 2;
  s.output_activation = act;
  s.softmax_block = block;
  return s;
}

double weighted_sum(const MlpParams& p, const MlpSpec& s, const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& r) {
  return predict(p, s, x).cwiseProduct(r).sum();
}

// Multiply-accumulate count of a dense chain, one per weight.
std::int64_t mac_count(const std::vector<int>& widths) {
  std::int64_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    for (int o = 0; o < widths[l + 1]; ++o)
      for (int i = 0; i < widths[l]; ++i) ++n;
  return n;
}

}  // namespace

TEST(Init, SeededZeroBiasAndScaledVariance) {
  MlpSpec s;
  s.input_dim = 64;
  s.hidden_dims = {256};
  s.output_dim = 3;
  Rng a(5), b(5);
  const MlpParams p = init_params(s, a);
  EXPECT_TRUE(p == init_params(s, b));
  for (const auto& bias : p.biases) EXPECT_TRUE((bias.array() == 0.0).all());
  const Eigen::MatrixXd& w = p.weights[0];
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / double(w.size() - 1);
  EXPECT_NEAR(var, 1.0 / 64, 0.2 / 64);
}

TEST(Forward, ZeroParamsGiveUniformSoftmax) {
  const MlpSpec s = small_spec(OutputActivation::kColumnSoftmax, 3);
  Rng rng(1);
  MlpParams p = MlpParams::zeros_like(init_params(s, rng));
  const Eigen::MatrixXd out = predict(p, s, Eigen::MatrixXd::Random(4, 5));
  EXPECT_LT((out.array() - 1.0 / 3).abs().maxCoeff(), 1e-15);
}

TEST(Forward, SoftmaxBlocksSumToOne) {
  const MlpSpec s = small_spec(OutputActivation::kColumnSoftmax, 2);
  Rng rng(2);
  const MlpParams p = init_params(s, rng);
  const Eigen::MatrixXd out = predict(p, s, Eigen::MatrixXd::Random(4, 7) * 10);
  for (int n = 0; n < 7; ++n)
    for (int blk = 0; blk < 3; ++blk) EXPECT_NEAR(out.col(n).segment(2 * blk, 2).sum(), 1.0, 1e-12);
}

TEST(Forward, LeakyNegativeUnit) {
  MlpSpec s;
  s.input_dim = 1;
  s.hidden_dims = {1};
  s.output_dim = 1;
  Rng rng(3);
  MlpParams p = init_params(s, rng);
  p.weights[0](0, 0) = 1.0;
  p.weights[1](0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(predict(p, s, Eigen::MatrixXd::Constant(1, 1, -1.0))(0, 0), -0.01);
  EXPECT_DOUBLE_EQ(predict(p, s, Eigen::MatrixXd::Constant(1, 1, 2.0))(0, 0), 2.0);
}

TEST(Forward, SingleLinearLayer) {
  MlpSpec s;
  s.input_dim = 2;
  s.hidden_dims = {};
  s.output_dim = 2;
  MlpParams p;
  p.weights.push_back((Eigen::MatrixXd(2, 2) << 1, 2, 3, 4).finished());
  p.biases.push_back(Eigen::Vector2d(0.5, -0.5));
  const Eigen::MatrixXd y = predict(p, s, Eigen::Vector2d(1.0, -1.0));
  EXPECT_DOUBLE_EQ(y(0, 0), 1 - 2 + 0.5);
  EXPECT_DOUBLE_EQ(y(1, 0), 3 - 4 - 0.5);
}

TEST(Forward, BatchMatchesPerSample) {
  const MlpSpec s = small_spec(OutputActivation::kColumnSoftmax, 3);
  Rng rng(4);
  const MlpParams p = init_params(s, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 9);
  const Eigen::MatrixXd batch = predict(p, s, x);
  for (int n = 0; n < 9; ++n)
    EXPECT_LT((predict(p, s, x.col(n)) - batch.col(n)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, MatchesFiniteDifferences) {
  for (auto act : {OutputActivation::kNone, OutputActivation::kColumnSoftmax}) {
    const MlpSpec s = small_spec(act, 3);
    Rng rng(5);
    MlpParams p = init_params(s, rng);
    for (auto& b : p.biases) b.setRandom();
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
    const Eigen::MatrixXd r = Eigen::MatrixXd::Random(s.output_dim, 3);
    const Gradients g = backward(p, s, forward(p, s, x), r);

    const double h = 1e-5;
    std::vector<double> analytic;
    MlpParams gp = g.params;
    gp.for_each([&](double& v) { analytic.push_back(v); });
    std::size_t i = 0;
    MlpParams probe = p;
    probe.for_each([&](double& v) {
      const double saved = v;
      v = saved + h;
      const double up = weighted_sum(probe, s, x, r);
      v = saved - h;
      const double down = weighted_sum(probe, s, x, r);
      v = saved;
      const double fd = (up - down) / (2 * h);
      EXPECT_NEAR(analytic[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "param " << i;
      ++i;
    });
    for (int c = 0; c < x.cols(); ++c) {
      for (int j = 0; j < x.rows(); ++j) {
        Eigen::MatrixXd xu = x, xd = x;
        xu(j, c) += h;
        xd(j, c) -= h;
        const double fd = (weighted_sum(p, s, xu, r) - weighted_sum(p, s, xd, r)) / (2 * h);
        EXPECT_NEAR(g.input(j, c), fd, 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(Backward, LinearLayerWeightGradientIsInput) {
  MlpSpec s;
  s.input_dim = 3;
  s.hidden_dims = {};
  s.output_dim = 2;
  Rng rng(6);
  const MlpParams p = init_params(s, rng);
  const Eigen::Vector3d x(1.0, -2.0, 0.5);
  const Gradients g = backward(p, s, forward(p, s, x), Eigen::MatrixXd::Ones(2, 1));
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g.params.weights[0](o, i), x(i));
  EXPECT_TRUE((g.params.biases[0].array() == 1.0).all());
}

TEST(Backward, ZeroUpstreamGivesZero) {
  const MlpSpec s = small_spec(OutputActivation::kColumnSoftmax, 3);
  Rng rng(7);
  const MlpParams p = init_params(s, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
  const Gradients g = backward(p, s, forward(p, s, x), Eigen::MatrixXd::Zero(6, 2));
  MlpParams gp = g.params;
  gp.for_each([](double& v) { EXPECT_EQ(v, 0.0); });
  EXPECT_TRUE((g.input.array() == 0.0).all());
}

TEST(Adam, ZeroGradientLeavesParams) {
  const MlpSpec s = small_spec(OutputActivation::kNone);
  Rng rng(8);
  MlpParams p = init_params(s, rng);
  const MlpParams before = p;
  AdamState st = AdamState::for_params(p);
  for (int i = 0; i < 5; ++i) adam_step(p, MlpParams::zeros_like(p), st, 0.1);
  EXPECT_TRUE(p == before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  const MlpSpec s = small_spec(OutputActivation::kNone);
  Rng rng(9);
  MlpParams p = init_params(s, rng);
  const MlpParams before = p;
  MlpParams g = MlpParams::zeros_like(p);
  g.for_each([](double& v) { v = 0.3; });
  AdamState st = AdamState::for_params(p);
  adam_step(p, g, st, 0.01);
  std::vector<double> a, b;
  p.for_each([&](double& v) { a.push_back(v); });
  MlpParams bc = before;
  bc.for_each([&](double& v) { b.push_back(v); });
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i] - a[i], 0.01, 1e-8);
}

TEST(Adam, Deterministic) {
  const MlpSpec s = small_spec(OutputActivation::kNone);
  Rng rng(10);
  const MlpParams init = init_params(s, rng);
  auto run = [&] {
    MlpParams p = init;
    AdamState st = AdamState::for_params(p);
    Rng g(3);
    std::normal_distribution<double> n;
    for (int i = 0; i < 20; ++i) {
      MlpParams grad = MlpParams::zeros_like(p);
      grad.for_each([&](double& v) { v = n(g); });
      adam_step(p, grad, st, 0.01);
    }
    return p;
  };
  EXPECT_TRUE(run() == run());
}

TEST(Polyak, Endpoints) {
  const MlpSpec s = small_spec(OutputActivation::kNone);
  Rng rng(11);
  const MlpParams a = init_params(s, rng);
  const MlpParams b = init_params(s, rng);
  EXPECT_TRUE(polyak_update(a, b, 1.0) == b);
  EXPECT_TRUE(polyak_update(a, b, 0.0) == a);
}

TEST(Polyak, ReferenceRate) {
  MlpParams target, online;
  target.weights.push_back(Eigen::MatrixXd::Zero(1, 1));
  target.biases.push_back(Eigen::VectorXd::Zero(1));
  online.weights.push_back(Eigen::MatrixXd::Ones(1, 1));
  online.biases.push_back(Eigen::VectorXd::Ones(1));
  const MlpParams out = polyak_update(target, online, 0.006);
  EXPECT_EQ(out.weights[0](0, 0), 0.006);
  EXPECT_EQ(out.biases[0](0), 0.006);
}

TEST(Polyak, ConvexCombination) {
  const MlpSpec s = small_spec(OutputActivation::kNone);
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpParams a = init_params(s, rng);
    const MlpParams b = init_params(s, rng);
    MlpParams out = polyak_update(a, b, 0.3);
    std::vector<double> lo, hi;
    MlpParams ac = a, bc = b;
    ac.for_each([&](double& v) { lo.push_back(v); });
    bc.for_each([&](double& v) { hi.push_back(v); });
    std::size_t i = 0;
    out.for_each([&](double& v) {
      EXPECT_GE(v, std::min(lo[i], hi[i]));
      EXPECT_LE(v, std::max(lo[i], hi[i]));
      ++i;
    });
  }
}

TEST(Flops, SingleHiddenLayer) {
  MlpSpec policy, value;
  policy.input_dim = 2;
  policy.hidden_dims = {4};
  policy.output_dim = 3;
  value.input_dim = 5;
  value.hidden_dims = {4};
  value.output_dim = 1;
  const FlopsCount f = flops_inference(policy, value);
  EXPECT_EQ(f.policy, 20);
  EXPECT_EQ(f.value, 24);
  EXPECT_EQ(f.policy, mac_count({2, 4, 3}));
  EXPECT_EQ(f.value, mac_count({5, 4, 1}));
}

TEST(Flops, ReferenceNetworks) {
  MlpSpec policy, value;
  policy.input_dim = 6;
  policy.output_dim = 60;
  value.input_dim = 66;
  value.output_dim = 1;
  const FlopsCount f = flops_inference(policy, value);
  EXPECT_EQ(f.policy, 41984);
  EXPECT_EQ(f.value, 49792);
  EXPECT_EQ(f.policy, mac_count({6, 256, 128, 60}));
  EXPECT_EQ(f.value, mac_count({66, 256, 128, 1}));
}

TEST(Flops, GrowWithDepthAndWidth) {
  MlpSpec policy, value;
  policy.input_dim = 6;
  policy.output_dim = 60;
  value.input_dim = 66;
  value.output_dim = 1;
  const FlopsCount base = flops_inference(policy, value);
  policy.hidden_dims = value.hidden_dims = {512, 256};
  const FlopsCount wide = flops_inference(policy, value);
  EXPECT_GT(wide.policy, base.policy);
  EXPECT_GT(wide.value, base.value);
  policy.hidden_dims = value.hidden_dims = {256, 128, 64};
  const FlopsCount deep = flops_inference(policy, value);
  EXPECT_GT(deep.policy, base.policy);
  EXPECT_GT(deep.value, base.value);
}

TEST(Snapshot, RoundTripIsExact) {
  const MlpSpec s = small_spec(OutputActivation::kColumnSoftmax, 3);
  Rng rng(13);
  MlpParams p = init_params(s, rng);
  for (auto& b : p.biases) b.setRandom();
  std::stringstream ss;
  save_params(ss, p);
  EXPECT_TRUE(load_params(ss) == p);
}

TEST(Snapshot, RejectsGarbage) {
  std::stringstream ss("not a snapshot");
  EXPECT_ANY_THROW(load_params(ss));
}

TEST(Spec, ValidateRejectsBadShapes) {
  MlpSpec s;
  s.input_dim = 0;
  EXPECT_ANY_THROW(s.validate());
  s = small_spec(OutputActivation::kColumnSoftmax, 4);
  EXPECT_ANY_THROW(s.validate());
}
