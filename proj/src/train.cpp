#include "sgl0/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "sgl0/error.hpp"

namespace sgl0 {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void fill_metrics(TrainRecord& rec, const NetworkParams& net, const Dataset* test, const TrainConfig& config) {
  if (test && !test->is_regression()) {
    const Evaluation e = evaluate(net, *test, config.tau_w, config.tau_n);
    rec.test_error = e.test_error;
    rec.weight_sparsity = e.sparsity.weight_sparsity;
    rec.neuron_sparsity = e.sparsity.neuron_sparsity;
  } else {
    const SparsityReport r = sparsity_report(pruned(net, config.tau_w, config.tau_n), config.tau_w, config.tau_n);
    rec.test_error = std::numeric_limits<double>::quiet_NaN();
    rec.weight_sparsity = r.weight_sparsity;
    rec.neuron_sparsity = r.neuron_sparsity;
  }
}

void apply_lr_schedule(Optimizer& optimizer, std::size_t epoch) {
  const auto& spec = optimizer.spec();
  if (spec.lr_decay_interval > 0 && epoch % spec.lr_decay_interval == 0) {
    optimizer.set_learning_rate(optimizer.learning_rate() * spec.lr_decay);
  }
}

void check_dataset(const NetworkParams& net, const Dataset& train) {
  if (train.size() == 0) throw InputError("training set is empty");
  (void)net;
}

}  // namespace

std::string_view to_string(InnerSolver s) { return s == InnerSolver::exact ? "exact" : "stochastic"; }

InnerSolver parse_inner_solver(std::string_view text) {
  if (text == "stochastic") return InnerSolver::stochastic;
  if (text == "exact") return InnerSolver::exact;
  throw ConfigError("unknown inner solver '" + std::string(text) + "' (expected stochastic or exact)", "inner_solver");
}

bool uses_penalty_method(RegularizerKind kind) {
  return kind == RegularizerKind::l0 || kind == RegularizerKind::sparse_group_l0asso;
}

void TrainConfig::validate() const {
  regularizer.validate();
  optimizer.validate();
  if (uses_penalty_method(regularizer.kind)) {
    const bool disabled = beta0 == 0.0 && regularizer.lambda == 0.0;
    if (!(beta0 > 0.0) && !disabled) throw ConfigError("must be positive (0 only together with lambda = 0)", "beta0");
    if (!(sigma > 1.0)) throw ConfigError("must be greater than 1", "sigma");
    if (beta_interval == 0) throw ConfigError("must be positive", "beta_interval");
  }
  if (epochs == 0) throw ConfigError("must be positive", "epochs");
  if (batch_size == 0) throw ConfigError("must be positive", "batch_size");
  if (threads == 0) throw ConfigError("must be positive", "threads");
  if (probe_size == 0) throw ConfigError("must be positive", "probe_size");
  if (!(exact_tolerance > 0.0)) throw ConfigError("must be positive", "exact_tolerance");
  if (!(tau_w >= 0.0)) throw ConfigError("must be nonnegative", "tau_w");
  if (!(tau_n >= 0.0)) throw ConfigError("must be nonnegative", "tau_n");
}

TrainResult run_algorithm1(NetworkParams net, const Dataset& train, const Dataset* test, const TrainConfig& config,
                           const EpochObserver& observer) {
  config.validate();
  if (!uses_penalty_method(config.regularizer.kind)) {
    throw ConfigError("the penalty method needs regularizer l0 or sgl0", "kind");
  }
  check_dataset(net, train);
  const bool group_term = config.regularizer.kind == RegularizerKind::sparse_group_l0asso;
  PenaltyState state =
      make_penalty_state(std::move(net), config.regularizer.lambda, config.beta0, config.sigma, group_term);
  Optimizer optimizer(config.optimizer, state.weights);
  const Dataset probe = train.head(config.probe_size);
  const BatchPlan plan{std::min(config.batch_size, train.size()), config.seed, true};
  const auto start = Clock::now();

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    TrainRecord rec;
    rec.epoch = epoch;
    rec.beta = state.beta;
    rec.learning_rate = optimizer.learning_rate();

    if (config.inner_solver == InnerSolver::exact) {
      minimize_w_block(state, train, config.exact_tolerance, config.exact_max_iterations);
      ++state.inner_step;
      inner_step_v(state);
      rec.train_loss = mean_loss(state.weights, train);
    } else {
      double loss_sum = 0.0;
      std::size_t count = 0;
      for (const auto& idx : batches(train.size(), plan, epoch)) {
        const Dataset mb = train.subset(idx);
        try {
          loss_sum += inner_step_w(state, mb, optimizer, config.threads);
        } catch (const DivergenceError& e) {
          throw DivergenceError(e.message(), epoch, state.inner_step);
        }
        inner_step_v(state);
        ++count;
      }
      rec.train_loss = loss_sum / static_cast<double>(count);
    }

    rec.f_beta = f_beta_eval(state, probe);
    if (!std::isfinite(rec.f_beta)) throw DivergenceError("non-finite objective on probe batch", epoch, state.inner_step);
    fill_metrics(rec, state.weights, test, config);
    rec.wall_time = seconds_since(start);
    result.records.push_back(rec);
    if (observer) observer(rec, state.weights);

    if (epoch % config.beta_interval == 0) {
      result.boundaries.push_back({state.outer_iteration, epoch, state.beta, coupling_gap_squared(state),
                                   coupling_gap_max(state), rec.f_beta});
      escalate_beta(state);
    }
    apply_lr_schedule(optimizer, epoch);
  }
  result.final_beta = state.beta;
  result.final_learning_rate = optimizer.learning_rate();
  result.net = std::move(state.weights);
  result.aux = std::move(state.aux);
  return result;
}

TrainResult run_baseline(NetworkParams net, const Dataset& train, const Dataset* test, const TrainConfig& config,
                         const EpochObserver& observer) {
  config.validate();
  if (uses_penalty_method(config.regularizer.kind)) {
    throw ConfigError("l0 and sgl0 are trained by the penalty method", "kind");
  }
  if (config.inner_solver == InnerSolver::exact) {
    throw ConfigError("exact block minimization applies to the penalty method only", "inner_solver");
  }
  check_dataset(net, train);
  Optimizer optimizer(config.optimizer, net);
  const Dataset probe = train.head(config.probe_size);
  const BatchPlan plan{std::min(config.batch_size, train.size()), config.seed, true};
  const auto start = Clock::now();

  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    TrainRecord rec;
    rec.epoch = epoch;
    rec.beta = 0.0;
    rec.learning_rate = optimizer.learning_rate();
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (const auto& idx : batches(train.size(), plan, epoch)) {
      LossAndGradients lg = loss_and_gradients(net, train.subset(idx), config.threads);
      if (!std::isfinite(lg.loss)) throw DivergenceError("non-finite loss", epoch, step);
      add_regularizer_subgrad(config.regularizer, net, lg.grads);
      if (!lg.grads.all_finite()) throw DivergenceError("non-finite gradient", epoch, step);
      optimizer.step(net, lg.grads);
      loss_sum += lg.loss;
      ++count;
      ++step;
    }
    rec.train_loss = loss_sum / static_cast<double>(count);
    rec.f_beta = mean_loss(net, probe) + regularizer_value(config.regularizer, net);
    if (!std::isfinite(rec.f_beta)) throw DivergenceError("non-finite objective on probe batch", epoch, step);
    fill_metrics(rec, net, test, config);
    rec.wall_time = seconds_since(start);
    result.records.push_back(rec);
    if (observer) observer(rec, net);
    apply_lr_schedule(optimizer, epoch);
  }
  result.final_learning_rate = optimizer.learning_rate();
  result.net = std::move(net);
  return result;
}

TrainResult train(NetworkParams net, const Dataset& train_set, const Dataset* test, const TrainConfig& config,
                  const EpochObserver& observer) {
  if (uses_penalty_method(config.regularizer.kind)) return run_algorithm1(std::move(net), train_set, test, config, observer);
  return run_baseline(std::move(net), train_set, test, config, observer);
}

}  // namespace sgl0
