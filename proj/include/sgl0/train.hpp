#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "sgl0/data.hpp"
#include "sgl0/metrics.hpp"
#include "sgl0/model.hpp"
#include "sgl0/optimizer.hpp"
#include "sgl0/penalty.hpp"
#include "sgl0/regularizers.hpp"

namespace sgl0 {

/// stochastic: one optimizer step per minibatch, then a V update.
/// exact: each epoch is one alternation with the W block minimized on the
/// full training set.
enum class InnerSolver { stochastic, exact };

std::string_view to_string(InnerSolver s);
InnerSolver parse_inner_solver(std::string_view text);

struct TrainConfig {
  RegularizerSpec regularizer{RegularizerKind::sparse_group_l0asso, 0.1 / 60000.0};
  double beta0 = 2.5 / 60000.0;
  double sigma = 1.25;
  std::size_t beta_interval = 40;  // epochs per outer iteration
  OptimizerSpec optimizer;
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  InnerSolver inner_solver = InnerSolver::stochastic;
  double exact_tolerance = 1e-9;
  std::size_t exact_max_iterations = 200000;
  std::size_t probe_size = 512;
  double tau_w = kDefaultWeightThreshold;
  double tau_n = kDefaultNeuronThreshold;

  void validate() const;
};

/// True for regularizers trained by the penalty method (l0, sgl0).
bool uses_penalty_method(RegularizerKind kind);

struct TrainRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;       // mean minibatch loss over the epoch
  double f_beta = 0.0;           // objective on the fixed probe batch
  double test_error = 0.0;       // percent, pruned network; NaN without a test set
  double weight_sparsity = 0.0;  // percent, pruned network
  double neuron_sparsity = 0.0;  // percent, pruned network
  double beta = 0.0;             // penalty weight in effect during the epoch
  double learning_rate = 0.0;    // learning rate in effect during the epoch
  double wall_time = 0.0;        // seconds since training started
};

/// State at the end of an outer iteration, before beta is escalated.
struct OuterRecord {
  std::size_t outer_iteration = 0;
  std::size_t epoch = 0;
  double beta = 0.0;
  double gap_squared = 0.0;  // sum_l ||V_l - W_l||^2
  double gap_max = 0.0;      // max_l ||V_l - W_l||_inf
  double f_beta = 0.0;
};

struct TrainResult {
  NetworkParams net;
  std::vector<Tensor> aux;  // final V (penalty method only)
  std::vector<TrainRecord> records;
  std::vector<OuterRecord> boundaries;
  double final_beta = 0.0;
  double final_learning_rate = 0.0;
};

/// Called after every epoch with the record and the (unpruned) network.
using EpochObserver = std::function<void(const TrainRecord&, const NetworkParams&)>;

/// Penalty decomposition: W step then V step per minibatch, beta <- sigma beta
/// every beta_interval epochs. `test` may be null.
TrainResult run_algorithm1(NetworkParams net, const Dataset& train, const Dataset* test, const TrainConfig& config,
                           const EpochObserver& observer = {});

/// Subgradient training on loss + lambda R for none, l1, gl and sgl.
TrainResult run_baseline(NetworkParams net, const Dataset& train, const Dataset* test, const TrainConfig& config,
                         const EpochObserver& observer = {});

/// Dispatches on the regularizer kind.
TrainResult train(NetworkParams net, const Dataset& train, const Dataset* test, const TrainConfig& config,
                  const EpochObserver& observer = {});

}  // namespace sgl0
