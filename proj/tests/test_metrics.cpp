#include <gtest/gtest.h>

#include "sgl0/metrics.hpp"
#include "sgl0/model.hpp"
#include "sgl0/rng.hpp"

using namespace sgl0;

namespace {

// Three weights plus one bias: four trainable scalars.
NetworkParams four_scalars() {
  const std::vector<std::size_t> sizes{3, 1};
  NetworkParams net = build_mlp(sizes, 1);
  net.layers[0].weight = Tensor::matrix({{0, 2e-6, 0.5}});
  net.layers[0].bias = Tensor::vector({-1});
  return net;
}

NetworkParams zeroed(NetworkParams net) {
  for (auto& l : net.layers) {
    l.weight.fill(0.0);
    l.bias.fill(0.0);
  }
  return net;
}

}  // namespace

TEST(PruneWeights, BelowThresholdToZero) {
  NetworkParams net = four_scalars();
  prune_weights(net, 1e-5);
  EXPECT_EQ(net.layers[0].weight, Tensor::matrix({{0, 0, 0.5}}));
  EXPECT_EQ(net.layers[0].bias, Tensor::vector({-1}));
}

TEST(PruneWeights, StrictBelow) {
  NetworkParams net = four_scalars();
  net.layers[0].weight[1] = 1e-5;
  prune_weights(net, 1e-5);
  EXPECT_EQ(net.layers[0].weight[1], 1e-5);
}

TEST(PruneWeights, ZeroThresholdIsIdentity) {
  NetworkParams net = four_scalars();
  const NetworkParams before = net;
  prune_weights(net, 0.0);
  EXPECT_TRUE(net == before);
}

TEST(PruneWeights, Idempotent) {
  NetworkParams net = build_lenet5_caffe(1);
  prune_weights(net, 1e-2);
  const NetworkParams once = net;
  prune_weights(net, 1e-2);
  EXPECT_TRUE(net == once);
}

TEST(WeightSparsity, HalfOfFour) { EXPECT_DOUBLE_EQ(weight_sparsity(four_scalars(), 1e-5), 50.0); }

TEST(WeightSparsity, ZeroThresholdCountsExactZeros) { EXPECT_DOUBLE_EQ(weight_sparsity(four_scalars(), 0.0), 25.0); }

TEST(WeightSparsity, AllZeroAndDense) {
  EXPECT_DOUBLE_EQ(weight_sparsity(zeroed(build_lenet5_caffe(1)), 1e-5), 100.0);
  NetworkParams dense = build_lenet5_caffe(1);
  for (auto& l : dense.layers) l.bias.fill(0.1);
  EXPECT_LT(weight_sparsity(dense, 1e-5), 0.05);
}

TEST(NeuronSparsity, GroupMeans) {
  const std::vector<std::size_t> sizes{2, 2};
  NetworkParams net = build_mlp(sizes, 1, GroupingMode::output);
  net.layers[0].weight = Tensor::matrix({{1e-7, -1e-7}, {1, 1}});
  EXPECT_DOUBLE_EQ(neuron_sparsity(net, 1e-5), 50.0);
  EXPECT_TRUE(group_is_dead(net.layers[0].weight.values(), net.partition.layers[0].groups[0], 1e-5));
  EXPECT_FALSE(group_is_dead(net.layers[0].weight.values(), net.partition.layers[0].groups[1], 1e-5));
}

TEST(NeuronSparsity, MeanNotMax) {
  const std::vector<std::size_t> sizes{4, 1};
  NetworkParams net = build_mlp(sizes, 1, GroupingMode::output);
  net.layers[0].weight = Tensor::matrix({{3.9e-5, 0, 0, 0}});  // mean 9.75e-6
  EXPECT_DOUBLE_EQ(neuron_sparsity(net, 1e-5), 100.0);
}

TEST(NeuronSparsity, AllZero) { EXPECT_DOUBLE_EQ(neuron_sparsity(zeroed(build_lenet5_caffe(2)), 1e-5), 100.0); }

TEST(NeuronSparsity, OneDeadGroupAddsOneShare) {
  NetworkParams net = build_lenet5_caffe(3);
  const double before = neuron_sparsity(net, 1e-5);
  auto w = net.layers[1].weight.values();
  for (std::size_t i : net.partition.layers[1].groups[7]) w[i] = 0.0;
  EXPECT_NEAR(neuron_sparsity(net, 1e-5) - before, 100.0 / 1370.0, 1e-12);
}

TEST(PruneNeurons, DeadGroupsZeroedBiasesKept) {
  const std::vector<std::size_t> sizes{2, 2};
  NetworkParams net = build_mlp(sizes, 1, GroupingMode::output);
  net.layers[0].weight = Tensor::matrix({{1e-7, -1e-7}, {1, 1}});
  net.layers[0].bias = Tensor::vector({0.3, 0.4});
  prune_neurons(net, 1e-5);
  EXPECT_EQ(net.layers[0].weight, Tensor::matrix({{0, 0}, {1, 1}}));
  EXPECT_EQ(net.layers[0].bias, Tensor::vector({0.3, 0.4}));
}

TEST(PruneNeurons, DeadGroupWeightsCountAsSparse) {
  NetworkParams net = build_lenet5_caffe(4);
  auto w = net.layers[2].weight.values();
  for (std::size_t i : net.partition.layers[2].groups[3]) w[i] = 3e-6;  // above tau_w, dead by mean at 1e-5
  const double before = weight_sparsity(net, 1e-6);
  prune_neurons(net, 1e-5);
  EXPECT_NEAR(weight_sparsity(net, 1e-6) - before, 100.0 * 500 / 431080, 1e-9);
}

TEST(Monotonicity, ThresholdsIncrease) {
  NetworkParams net = build_lenet5_caffe(5);
  double prev_w = -1, prev_n = -1;
  for (double tau : {0.0, 1e-5, 1e-3, 1e-2, 3e-2, 1e-1}) {
    const double ws = weight_sparsity(net, tau), ns = neuron_sparsity(net, tau);
    EXPECT_GE(ws, prev_w);
    EXPECT_GE(ns, prev_n);
    prev_w = ws;
    prev_n = ns;
  }
  EXPECT_GT(prev_n, 0.0);
}

TEST(Report, ReproducibleAndConsistent) {
  NetworkParams net = build_lenet5_caffe(6);
  prune_weights(net, 2e-2);
  const SparsityReport a = sparsity_report(net, 1e-5, 1e-2);
  const SparsityReport b = sparsity_report(net, 1e-5, 1e-2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.total_params, 431080u);
  EXPECT_EQ(a.total_groups, 1370u);
  std::size_t zeros = 0, dead = 0;
  for (const auto& l : a.layers) {
    zeros += l.zero_params;
    dead += l.dead_groups;
    EXPECT_GE(l.weight_sparsity, 0.0);
    EXPECT_LE(l.weight_sparsity, 100.0);
  }
  EXPECT_EQ(zeros, a.zero_params);
  EXPECT_EQ(dead, a.dead_groups);
  EXPECT_DOUBLE_EQ(a.weight_sparsity, 100.0 * a.zero_params / 431080.0);
  EXPECT_DOUBLE_EQ(a.neuron_sparsity, 100.0 * a.dead_groups / 1370.0);
}

TEST(Evaluate, MeasuresPrunedNetwork) {
  const std::vector<std::size_t> sizes{4, 3};
  NetworkParams net = build_mlp(sizes, 1, GroupingMode::output);
  net.layers[0].weight = Tensor::matrix({{5e-6, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}});
  net.layers[0].bias = Tensor::vector({0, 0.3, 0});
  Dataset d;
  d.images = Tensor::matrix({{1e5, 0, 0, 0}, {0, 2, 0, 0}});
  d.labels = {1, 1};
  d.num_classes = 3;
  // Dense, sample 0 scores 0.5 on class 0; pruned, class 1 wins with its bias.
  EXPECT_DOUBLE_EQ(classification_error(net, d), 50.0);
  const Evaluation e = evaluate(net, d, 1e-5, 1e-5);
  EXPECT_DOUBLE_EQ(e.test_error, 0.0);
  EXPECT_DOUBLE_EQ(e.sparsity.weight_sparsity, 100.0 * 12 / 15);
  EXPECT_DOUBLE_EQ(e.sparsity.neuron_sparsity, 100.0 / 3);
}
