#include "sgl0/metrics.hpp"

#include <cmath>

#include "sgl0/error.hpp"

namespace sgl0 {
namespace {

void require_threshold(double tau, const char* field) {
  if (!(tau >= 0.0)) throw ConfigError("threshold must be nonnegative", field);
}

bool counts_as_zero(double w, double tau_w) { return w == 0.0 || std::abs(w) < tau_w; }

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

void prune_weights(NetworkParams& net, double tau_w) {
  require_threshold(tau_w, "tau_w");
  for (auto& layer : net.layers) {
    for (double& w : layer.weight.values()) {
      if (std::abs(w) < tau_w) w = 0.0;
    }
    for (double& b : layer.bias.values()) {
      if (std::abs(b) < tau_w) b = 0.0;
    }
  }
}

double weight_sparsity(const NetworkParams& net, double tau_w) {
  return sparsity_report(net, tau_w, 0.0).weight_sparsity;
}

bool group_is_dead(std::span<const double> w, const Group& group, double tau_n) {
  double total = 0.0;
  for (auto i : group) total += std::abs(w[i]);
  return total / static_cast<double>(group.size()) < tau_n;
}

void prune_neurons(NetworkParams& net, const GroupPartition& partition, double tau_n) {
  require_threshold(tau_n, "tau_n");
  if (partition.layers.size() != net.layers.size()) throw DimensionError("partition does not match network depth");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto w = net.layers[l].weight.values();
    for (const auto& g : partition.layers[l].groups) {
      if (group_is_dead(w, g, tau_n)) {
        for (auto i : g) w[i] = 0.0;
      }
    }
  }
}

void prune_neurons(NetworkParams& net, double tau_n) {
  const GroupPartition partition = net.partition;
  prune_neurons(net, partition, tau_n);
}

double neuron_sparsity(const NetworkParams& net, const GroupPartition& partition, double tau_n) {
  require_threshold(tau_n, "tau_n");
  if (partition.layers.size() != net.layers.size()) throw DimensionError("partition does not match network depth");
  std::size_t dead = 0;
  std::size_t total = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto w = net.layers[l].weight.values();
    for (const auto& g : partition.layers[l].groups) dead += group_is_dead(w, g, tau_n) ? 1 : 0;
    total += partition.layers[l].groups.size();
  }
  return percent(dead, total);
}

double neuron_sparsity(const NetworkParams& net, double tau_n) { return neuron_sparsity(net, net.partition, tau_n); }

SparsityReport sparsity_report(const NetworkParams& net, double tau_w, double tau_n) {
  require_threshold(tau_w, "tau_w");
  require_threshold(tau_n, "tau_n");
  SparsityReport r;
  r.tau_w = tau_w;
  r.tau_n = tau_n;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    LayerSparsity ls;
    ls.layer = l;
    ls.params = layer.weight.size() + layer.bias.size();
    for (double w : layer.weight.values()) ls.zero_params += counts_as_zero(w, tau_w) ? 1 : 0;
    for (double b : layer.bias.values()) ls.zero_params += counts_as_zero(b, tau_w) ? 1 : 0;
    const auto& groups = net.partition.layers.at(l).groups;
    ls.groups = groups.size();
    for (const auto& g : groups) ls.dead_groups += group_is_dead(layer.weight.values(), g, tau_n) ? 1 : 0;
    ls.weight_sparsity = percent(ls.zero_params, ls.params);
    ls.neuron_sparsity = percent(ls.dead_groups, ls.groups);
    r.total_params += ls.params;
    r.zero_params += ls.zero_params;
    r.total_groups += ls.groups;
    r.dead_groups += ls.dead_groups;
    r.layers.push_back(ls);
  }
  r.weight_sparsity = percent(r.zero_params, r.total_params);
  r.neuron_sparsity = percent(r.dead_groups, r.total_groups);
  return r;
}

NetworkParams pruned(const NetworkParams& net, double tau_w, double tau_n) {
  NetworkParams out = net;
  prune_weights(out, tau_w);
  prune_neurons(out, tau_n);
  return out;
}

Evaluation evaluate(const NetworkParams& net, const Dataset& test, double tau_w, double tau_n) {
  const NetworkParams p = pruned(net, tau_w, tau_n);
  Evaluation e;
  e.sparsity = sparsity_report(p, tau_w, tau_n);
  e.test_error = classification_error(p, test);
  return e;
}

}  // namespace sgl0
