#pragma once

#include <cstddef>
#include <vector>

#include "sgl0/data.hpp"
#include "sgl0/model.hpp"

namespace sgl0 {

inline constexpr double kDefaultWeightThreshold = 1e-5;
inline constexpr double kDefaultNeuronThreshold = 1e-5;

struct LayerSparsity {
  std::size_t layer = 0;
  std::size_t params = 0;       // weights + biases
  std::size_t zero_params = 0;  // |w| < tau_w or w == 0
  std::size_t groups = 0;
  std::size_t dead_groups = 0;
  double weight_sparsity = 0.0;
  double neuron_sparsity = 0.0;

  bool operator==(const LayerSparsity&) const = default;
};

struct SparsityReport {
  double weight_sparsity = 0.0;  // percent
  double neuron_sparsity = 0.0;  // percent
  double tau_w = kDefaultWeightThreshold;
  double tau_n = kDefaultNeuronThreshold;
  std::size_t total_params = 0;
  std::size_t zero_params = 0;
  std::size_t total_groups = 0;
  std::size_t dead_groups = 0;
  std::vector<LayerSparsity> layers;

  bool operator==(const SparsityReport&) const = default;
};

/// Sets every trainable scalar (weights and biases) with |w| < tau_w to 0.
void prune_weights(NetworkParams& net, double tau_w);
double weight_sparsity(const NetworkParams& net, double tau_w);

/// A group is dead when its mean absolute weight is below tau_n.
bool group_is_dead(std::span<const double> w, const Group& group, double tau_n);
/// Zeroes the weights of dead groups; biases are left untouched.
void prune_neurons(NetworkParams& net, const GroupPartition& partition, double tau_n);
void prune_neurons(NetworkParams& net, double tau_n);
double neuron_sparsity(const NetworkParams& net, const GroupPartition& partition, double tau_n);
double neuron_sparsity(const NetworkParams& net, double tau_n);

SparsityReport sparsity_report(const NetworkParams& net, double tau_w, double tau_n);

/// Weight pruning followed by neuron pruning on a copy.
NetworkParams pruned(const NetworkParams& net, double tau_w, double tau_n);

struct Evaluation {
  double test_error = 0.0;  // percent, measured on the pruned network
  SparsityReport sparsity;
};

/// Prunes, then measures sparsity and classification error of the pruned network.
Evaluation evaluate(const NetworkParams& net, const Dataset& test, double tau_w, double tau_n);

}  // namespace sgl0
