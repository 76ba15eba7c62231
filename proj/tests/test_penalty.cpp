#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "sgl0/error.hpp"
#include "sgl0/optimizer.hpp"
#include "sgl0/penalty.hpp"
#include "sgl0/regularizers.hpp"
#include "sgl0/rng.hpp"
#include "toy.hpp"

using namespace sgl0;

namespace {

NetworkParams scalar_net(double w) {
  const std::vector<std::size_t> sizes{1, 1};
  NetworkParams net = build_mlp(sizes, 1);
  net.layers[0].weight = Tensor::matrix({{w}});
  return net;
}

NetworkGradients scalar_grad(double g) {
  NetworkGradients grads;
  grads.weight.push_back(Tensor::matrix({{g}}));
  grads.bias.push_back(Tensor::vector({0}));
  return grads;
}

OptimizerSpec sgd(double lr) {
  OptimizerSpec s;
  s.method = OptimizerMethod::sgd;
  s.learning_rate = lr;
  return s;
}

}  // namespace

TEST(Optimizer, SgdStep) {
  NetworkParams net = scalar_net(2.0);
  Optimizer opt(sgd(0.1), net);
  NetworkGradients g = scalar_grad(3.0);
  g.bias[0][0] = -1.0;
  opt.step(net, g);
  EXPECT_DOUBLE_EQ(net.layers[0].weight[0], 2.0 - 0.3);
  EXPECT_DOUBLE_EQ(net.layers[0].bias[0], 0.1);
}

TEST(Optimizer, AdamFirstTwoSteps) {
  NetworkParams net = scalar_net(1.0);
  OptimizerSpec spec;
  Optimizer opt(spec, net);
  opt.step(net, scalar_grad(0.5));
  // Bias-corrected moments equal g and g^2 on the first step.
  double w = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(net.layers[0].weight[0], w, 1e-15);
  opt.step(net, scalar_grad(-1.0));
  const double m = (0.9 * 0.1 * 0.5 + 0.1 * -1.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 0.25 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
  w -= 1e-3 * m / (std::sqrt(v) + 1e-8);
  EXPECT_NEAR(net.layers[0].weight[0], w, 1e-15);
  EXPECT_EQ(opt.steps(), 2u);
}

TEST(Optimizer, SpecValidation) {
  OptimizerSpec s;
  s.learning_rate = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.lr_decay = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.lr_decay = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.adam_beta1 = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_optimizer("rmsprop"), ConfigError);
}

TEST(FBeta, AssembledFromRegularizerTerms) {
  const std::vector<std::size_t> sizes{2, 1};
  NetworkParams net = build_mlp(sizes, 1, GroupingMode::output);
  net.layers[0].weight = Tensor::matrix({{3, 4}});
  PenaltyState s = make_penalty_state(net, 1.0, 10.0, 2.0);
  s.aux[0] = net.layers[0].weight;
  EXPECT_NEAR(f_beta_value(0.25, s), 9.3210678, 1e-7);
  EXPECT_NEAR(f_beta_value(0.25, s), 0.25 + std::sqrt(2.0) * 5 + 2, 1e-12);
}

TEST(FBeta, AllZeroGivesLoss) {
  NetworkParams net = linear_net();
  net.layers[0].weight.fill(0.0);
  PenaltyState s = make_penalty_state(net, 0.3, 2.0, 2.0);
  EXPECT_EQ(f_beta_value(0.75, s), 0.75);
}

TEST(FBeta, BoundedBelowByLoss) {
  const Dataset d = regression_toy();
  PenaltyState s = make_penalty_state(linear_net(), 0.1, 3.0, 2.0);
  Rng rng(3);
  for (auto& v : s.aux[0].values()) v += rng.uniform(-1, 1);
  const double loss = mean_loss(s.weights, d);
  EXPECT_GE(f_beta_eval(s, d), loss);
  EXPECT_GE(loss, 0.0);
}

TEST(InnerStepW, HandEvaluatedSgdStep) {
  PenaltyState s = make_penalty_state(scalar_net(2.0), 0.0, 1.0, 2.0);
  s.aux[0][0] = 0.0;
  Optimizer opt(sgd(0.1), s.weights);
  inner_step_w(s, scalar_grad(1.0), opt);
  EXPECT_NEAR(s.weights.layers[0].weight[0], 1.7, 1e-15);
  EXPECT_EQ(s.inner_step, 1u);
}

TEST(InnerStepW, ReducesToPlainStep) {
  const Dataset d = regression_toy();
  const NetworkParams start = linear_net();
  NetworkParams plain = start;
  Optimizer plain_opt(sgd(0.05), plain);
  plain_opt.step(plain, loss_and_gradients(plain, d).grads);

  // beta = 0, lambda = 0.
  PenaltyState off = make_penalty_state(start, 0.0, 0.0, 2.0);
  Optimizer off_opt(sgd(0.05), off.weights);
  inner_step_w(off, d, off_opt);
  EXPECT_TRUE(off.weights == plain);

  // V = W, lambda = 0, beta > 0.
  PenaltyState coupled = make_penalty_state(start, 0.0, 5.0, 2.0);
  ASSERT_EQ(coupled.aux[0], start.layers[0].weight);
  Optimizer c_opt(sgd(0.05), coupled.weights);
  inner_step_w(coupled, d, c_opt);
  EXPECT_TRUE(coupled.weights == plain);
}

TEST(InnerStepW, EffectiveGradientTerms) {
  const std::vector<std::size_t> sizes{2, 1};
  NetworkParams net = build_mlp(sizes, 1, GroupingMode::output);
  net.layers[0].weight = Tensor::matrix({{3, 4}});
  PenaltyState s = make_penalty_state(net, 0.5, 2.0, 2.0);
  s.aux[0] = Tensor::matrix({{1, 0}});
  NetworkGradients g;
  g.weight.push_back(Tensor::matrix({{0.25, -0.5}}));
  g.bias.push_back(Tensor::vector({0.125}));
  const NetworkGradients e = effective_gradient(s, g);
  const double r = std::sqrt(2.0);
  EXPECT_NEAR(e.weight[0][0], 0.25 + 0.5 * r * 0.6 - 2.0 * (1 - 3), 1e-15);
  EXPECT_NEAR(e.weight[0][1], -0.5 + 0.5 * r * 0.8 - 2.0 * (0 - 4), 1e-15);
  EXPECT_EQ(e.bias[0][0], 0.125);
  s.group_term = false;
  EXPECT_NEAR(effective_gradient(s, g).weight[0][0], 0.25 + 4.0, 1e-15);
}

TEST(InnerStepW, NonFiniteGradientDiverges) {
  PenaltyState s = make_penalty_state(scalar_net(1.0), 0.0, 1.0, 2.0);
  Optimizer opt(sgd(0.1), s.weights);
  EXPECT_THROW(inner_step_w(s, scalar_grad(std::numeric_limits<double>::quiet_NaN()), opt), DivergenceError);
  EXPECT_THROW(inner_step_w(s, scalar_grad(std::numeric_limits<double>::infinity()), opt), DivergenceError);
}

TEST(InnerStepV, Threshold) {
  const std::vector<std::size_t> sizes{2, 1};
  NetworkParams net = build_mlp(sizes, 1);
  net.layers[0].weight = Tensor::matrix({{0.5, 3.0}});
  PenaltyState s = make_penalty_state(net, 2.0, 1.0, 2.0);
  inner_step_v(s);
  EXPECT_EQ(s.aux[0], Tensor::matrix({{0, 3.0}}));
  s.lambda = 0.0;
  inner_step_v(s);
  EXPECT_EQ(s.aux[0], net.layers[0].weight);
}

TEST(InnerStepV, LargeBetaApproachesW) {
  PenaltyState s = make_penalty_state(linear_net(), 0.1, 1.0, 2.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 40; ++j) {
    inner_step_v(s);
    const double gap = coupling_gap_max(s);
    EXPECT_LE(gap, prev);
    prev = gap;
    escalate_beta(s);
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(InnerStepV, OptimalAgainstCandidateSets) {
  PenaltyState s = make_penalty_state(linear_net(8, 3, 5), 0.02, 3.0, 2.0);
  inner_step_v(s);
  const double best = penalty_terms(s);
  Rng rng(6);
  const Tensor w = s.weights.layers[0].weight;
  for (int t = 0; t < 200; ++t) {
    PenaltyState other = s;
    for (std::size_t i = 0; i < w.size(); ++i) other.aux[0][i] = rng.uniform() < 0.5 ? 0.0 : w[i];
    EXPECT_LE(best, penalty_terms(other));
  }
}

TEST(PenaltyState, Validation) {
  EXPECT_THROW(make_penalty_state(linear_net(), 0.1, 0.0, 2.0), ConfigError);
  EXPECT_THROW(make_penalty_state(linear_net(), 0.1, 1.0, 1.0), ConfigError);
  EXPECT_THROW(make_penalty_state(linear_net(), -0.1, 1.0, 2.0), ConfigError);
  EXPECT_NO_THROW(make_penalty_state(linear_net(), 0.0, 0.0, 2.0));
}

TEST(PenaltyState, StartsAtThresholdedWeights) {
  const NetworkParams net = linear_net();
  const PenaltyState s = make_penalty_state(net, 0.05, 0.5, 2.0);
  const auto expect = prox_l0(net.layers[0].weight.values(), 0.05, 0.5);
  EXPECT_EQ(std::vector<double>(s.aux[0].values().begin(), s.aux[0].values().end()), expect);
  EXPECT_EQ(s.aux.size(), net.layers.size());
}

TEST(EscalateBeta, MnistSchedule) {
  PenaltyState s = make_penalty_state(linear_net(), 0.1 / 60000, 2.5 / 60000, 1.25);
  escalate_beta(s);
  EXPECT_NEAR(s.beta, 3.125 / 60000, 1e-20);
  EXPECT_EQ(s.outer_iteration, 2u);
}

TEST(BlockSolve, MonotoneAlternation) {
  const Dataset d = regression_toy();
  PenaltyState s = make_penalty_state(linear_net(), 0.05, 10.0, 2.0);
  double prev = f_beta_eval(s, d);
  for (int k = 0; k < 30; ++k) {
    const BlockSolve r = minimize_w_block(s, d, 1e-9, 100000);
    EXPECT_TRUE(r.converged);
    const double after_w = f_beta_eval(s, d);
    EXPECT_LE(after_w, prev + 1e-10);
    inner_step_v(s);
    const double after_v = f_beta_eval(s, d);
    EXPECT_LE(after_v, after_w + 1e-10);
    prev = after_v;
  }
}
