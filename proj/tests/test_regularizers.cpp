#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "sgl0/error.hpp"
#include "sgl0/model.hpp"
#include "sgl0/regularizers.hpp"
#include "sgl0/rng.hpp"

using namespace sgl0;

namespace {

LayerGroups one_group(std::size_t n) {
  LayerGroups g;
  g.weight_count = n;
  g.groups.emplace_back(n);
  std::iota(g.groups[0].begin(), g.groups[0].end(), 0);
  return g;
}

LayerGroups pairs(std::size_t n_pairs) {
  LayerGroups g;
  g.weight_count = 2 * n_pairs;
  for (std::size_t i = 0; i < n_pairs; ++i) g.groups.push_back({2 * i, 2 * i + 1});
  return g;
}

// Two-candidate minimizer of lambda |v|_0 + beta/2 (v - w)^2; ties go to 0.
double two_candidate(double w, double lambda, double beta) {
  const double at_zero = 0.5 * beta * w * w;
  const double at_w = w != 0.0 ? lambda : 0.0;
  return at_zero <= at_w ? 0.0 : w;
}

}  // namespace

TEST(GroupLasso, SingleGroupThreeFour) {
  const std::vector<double> w{3, 4};
  EXPECT_NEAR(group_lasso_value(w, one_group(2)), std::sqrt(2.0) * 5.0, 1e-12);
  EXPECT_NEAR(group_lasso_value(w, one_group(2)), 7.0710678, 1e-7);
}

TEST(GroupLasso, ZeroLayer) {
  const std::vector<double> w(6, 0.0);
  EXPECT_EQ(group_lasso_value(w, pairs(3)), 0.0);
}

TEST(GroupLasso, TwoGroups) {
  const std::vector<double> w{1, 0, 0, 0};
  EXPECT_NEAR(group_lasso_value(w, pairs(2)), 1.4142136, 1e-7);
}

TEST(GroupLasso, NonnegativeAndZeroOnlyAtZero) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> w(8, 0.0);
    if (t % 2) w[rng.below(8)] = rng.uniform(-1e-8, 1e-8) + 1e-12;
    const double v = group_lasso_value(w, pairs(4));
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v == 0.0, std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; }));
  }
}

TEST(GroupLassoSubgrad, ThreeFour) {
  const std::vector<double> w{3, 4};
  const auto g = group_lasso_subgrad(w, one_group(2));
  EXPECT_NEAR(g[0], 0.8485281, 1e-7);
  EXPECT_NEAR(g[1], 1.1313708, 1e-7);
}

TEST(GroupLassoSubgrad, ZeroGroup) {
  const std::vector<double> w{0, 0, 1, 2};
  const auto g = group_lasso_subgrad(w, pairs(2));
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_NE(g[2], 0.0);
}

TEST(GroupLassoSubgrad, MatchesFiniteDifferences) {
  Rng rng(7);
  LayerGroups groups;
  groups.weight_count = 12;
  groups.groups = {{0, 5, 7}, {1, 2}, {3, 4, 6, 8, 9}, {10, 11}};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(12);
    for (auto& x : w) x = rng.uniform(-1, 1);
    const auto g = group_lasso_subgrad(w, groups);
    const double h = 1e-6;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto p = w, m = w;
      p[i] += h;
      m[i] -= h;
      const double fd = (group_lasso_value(p, groups) - group_lasso_value(m, groups)) / (2 * h);
      EXPECT_LE(std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])), 1e-5);
    }
  }
}

TEST(L1, ValueAndSubgrad) {
  const std::vector<double> w{1, -2, 0};
  EXPECT_EQ(l1_value(w), 3.0);
  EXPECT_EQ(l1_subgrad(w), (std::vector<double>{1, -1, 0}));
  EXPECT_EQ(l1_value(std::vector<double>(4, 0.0)), 0.0);
}

TEST(L1, AbsolutelyHomogeneous) {
  const std::vector<double> w{0.5, -1.25, 3, 0};
  for (double c : {-2.0, 0.0, 0.5, 4.0}) {
    std::vector<double> cw;
    for (double x : w) cw.push_back(c * x);
    EXPECT_DOUBLE_EQ(l1_value(cw), std::abs(c) * l1_value(w));
  }
}

TEST(L0, StrictNonzero) {
  EXPECT_EQ(l0_count(std::vector<double>{0, 1e-9, 2}), 2u);
  EXPECT_EQ(l0_count(std::vector<double>(5, 0.0)), 0u);
  EXPECT_EQ(l0_count(std::vector<double>{-0.0, 0.0}), 0u);
  std::vector<double> w{0, 3, 0, -1, 2};
  const auto before = l0_count(w);
  std::reverse(w.begin(), w.end());
  EXPECT_EQ(l0_count(w), before);
}

TEST(Sgl0, SingleGroup) {
  const std::vector<double> w{3, 4};
  EXPECT_NEAR(sgl0_value(w, one_group(2)), 9.0710678, 1e-7);
  EXPECT_EQ(sgl0_value(std::vector<double>(2, 0.0), one_group(2)), 0.0);
}

TEST(Decompositions, ExactOnRandomLayers) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> w(10);
    for (auto& x : w) x = rng.uniform() < 0.3 ? 0.0 : rng.uniform(-2, 2);
    const auto g = pairs(5);
    EXPECT_EQ(sgl0_value(w, g), group_lasso_value(w, g) + static_cast<double>(l0_count(w)));
    EXPECT_EQ(sgl_value(w, g), group_lasso_value(w, g) + l1_value(w));
  }
}

TEST(Sgl0, AdditiveOverLayers) {
  const std::vector<std::size_t> sizes{3, 4, 2};
  const NetworkParams net = build_mlp(sizes, 5);
  double per_layer = 0.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    per_layer += sgl0_value(net.layers[l].weight.values(), net.partition.layers[l]);
  }
  EXPECT_NEAR(regularizer_value({RegularizerKind::sparse_group_l0asso, 1.0}, net), per_layer, 1e-12);
  EXPECT_NEAR(regularizer_value({RegularizerKind::sparse_group_l0asso, 0.25}, net), 0.25 * per_layer, 1e-12);
}

TEST(SoftThreshold, Values) {
  EXPECT_EQ(soft_threshold(3, 1), 2.0);
  EXPECT_EQ(soft_threshold(-0.5, 1), 0.0);
  EXPECT_EQ(soft_threshold(-3, 1), -2.0);
  for (double c : {-2.5, 0.0, 1e-9, 7.0}) EXPECT_EQ(soft_threshold(c, 0), c);
}

TEST(SoftThreshold, ShrinksAndIsLipschitz) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5), l = rng.uniform(0, 3);
    EXPECT_LE(std::abs(soft_threshold(a, l)), std::abs(a));
    EXPECT_LE(std::abs(soft_threshold(a, l) - soft_threshold(b, l)), std::abs(a - b) + 1e-15);
  }
}

TEST(HardThreshold, Cases) {
  EXPECT_EQ(hard_threshold(0.5, 2.0), 0.0);
  EXPECT_EQ(hard_threshold(3.0, 2.0), 3.0);
  EXPECT_EQ(hard_threshold(2.0, 2.0), 0.0);
  EXPECT_EQ(hard_threshold(-2.0, 2.0), 0.0);
  EXPECT_EQ(hard_threshold(-2.5, 2.0), -2.5);
}

TEST(HardThreshold, Idempotent) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double w = rng.uniform(-3, 3), t = rng.uniform(0, 2);
    EXPECT_EQ(hard_threshold(hard_threshold(w, t), t), hard_threshold(w, t));
  }
}

TEST(ProxL0, ThresholdTwo) {
  const std::vector<double> w{0.5, 3.0};
  EXPECT_EQ(prox_l0(w, 2, 1), (std::vector<double>{0, 3.0}));
}

TEST(ProxL0, LambdaZeroIsIdentity) {
  const std::vector<double> w{0.0, -1e-300, 2.5, -7};
  EXPECT_EQ(prox_l0(w, 0, 3), w);
}

TEST(ProxL0, NonPositiveBetaRejected) {
  const std::vector<double> w{1.0};
  EXPECT_THROW(prox_l0(w, 1, 0), ConfigError);
  EXPECT_THROW(prox_l0(w, 1, -1), ConfigError);
}

TEST(ProxL0, MatchesTwoCandidateOracle) {
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    const double lambda = rng.uniform(0, 10);
    const double beta = 10.0 - rng.uniform(0, 10);  // (0, 10]
    const std::vector<double> w{rng.uniform(-6, 6)};
    EXPECT_EQ(prox_l0(w, lambda, beta)[0], two_candidate(w[0], lambda, beta));
  }
}

TEST(ProxL0, OptimalAgainstCandidates) {
  Rng rng(78);
  for (int i = 0; i < 500; ++i) {
    const double lambda = rng.uniform(0, 2), beta = rng.uniform(0.1, 4), w = rng.uniform(-3, 3);
    const double v = prox_l0(std::vector<double>{w}, lambda, beta)[0];
    auto obj = [&](double x) { return lambda * (x != 0.0) + 0.5 * beta * (x - w) * (x - w); };
    EXPECT_LE(obj(v), obj(0.0));
    EXPECT_LE(obj(v), obj(w));
  }
}

TEST(ProxGroupLasso, ShrinksGroupNorms) {
  std::vector<double> w{3, 4, 0.1, 0.1};
  prox_group_lasso(w, pairs(2), 1.0);
  // Group (3, 4): factor 1 - sqrt(2)/5.
  const double f = 1.0 - std::sqrt(2.0) / 5.0;
  EXPECT_NEAR(w[0], 3 * f, 1e-15);
  EXPECT_NEAR(w[1], 4 * f, 1e-15);
  EXPECT_EQ(w[2], 0.0);
  EXPECT_EQ(w[3], 0.0);
}

TEST(Subgrad, KindsAddExpectedTerms) {
  const std::vector<std::size_t> sizes{2, 2};
  NetworkParams net = build_mlp(sizes, 1, GroupingMode::output);
  net.layers[0].weight = Tensor::matrix({{3, 4}, {0, -2}});
  auto grads_for = [&](RegularizerKind k) {
    NetworkGradients g = NetworkGradients::zeros_like(net);
    add_regularizer_subgrad({k, 0.5}, net, g);
    return g.weight[0];
  };
  const double s = std::sqrt(2.0);
  const Tensor gl = grads_for(RegularizerKind::group_lasso);
  EXPECT_NEAR(gl[0], 0.5 * s * 0.6, 1e-15);
  EXPECT_NEAR(gl[3], -0.5 * s, 1e-15);
  const Tensor sgl = grads_for(RegularizerKind::sparse_group_lasso);
  EXPECT_NEAR(sgl[0], gl[0] + 0.5, 1e-15);
  EXPECT_NEAR(sgl[2], gl[2], 1e-15);
  EXPECT_EQ(grads_for(RegularizerKind::l1), Tensor::matrix({{0.5, 0.5}, {0, -0.5}}));
  EXPECT_EQ(grads_for(RegularizerKind::none), Tensor({2, 2}, 0.0));
  EXPECT_EQ(grads_for(RegularizerKind::l0), Tensor({2, 2}, 0.0));
  EXPECT_EQ(grads_for(RegularizerKind::sparse_group_l0asso), gl);
  NetworkGradients g = NetworkGradients::zeros_like(net);
  add_regularizer_subgrad({RegularizerKind::sparse_group_lasso, 0.5}, net, g);
  EXPECT_EQ(g.bias[0], Tensor::vector({0, 0}));
}

TEST(Spec, ParseAndValidate) {
  EXPECT_EQ(parse_regularizer("sgl0"), RegularizerKind::sparse_group_l0asso);
  EXPECT_EQ(parse_regularizer("gl"), RegularizerKind::group_lasso);
  EXPECT_THROW(parse_regularizer("cges"), ConfigError);
  EXPECT_THROW((RegularizerSpec{RegularizerKind::l1, -1e-3}.validate()), ConfigError);
  EXPECT_NO_THROW((RegularizerSpec{RegularizerKind::l1, 0.0}.validate()));
}
