#include "sgl0/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgl0/error.hpp"
#include "sgl0/regularizers.hpp"

namespace sgl0 {
namespace {

double smooth_part(const NetworkParams& weights, const PenaltyState& state, double loss) {
  double total = loss;
  for (std::size_t l = 0; l < state.aux.size(); ++l) {
    const auto w = weights.layers[l].weight.values();
    const auto v = state.aux[l].values();
    double gap = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) gap += (v[i] - w[i]) * (v[i] - w[i]);
    total += 0.5 * state.beta * gap;
  }
  return total;
}

double group_part(const NetworkParams& weights, const PenaltyState& state) {
  if (!state.group_term) return 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l < state.aux.size(); ++l) {
    total += group_lasso_value(weights.layers[l].weight.values(), weights.partition.layers[l]);
  }
  return state.lambda * total;
}

// Gradient of loss + (beta / 2)||V - W||^2, without the group term.
NetworkGradients smooth_gradient(const PenaltyState& state, NetworkGradients g) {
  if (state.beta != 0.0) {
    for (std::size_t l = 0; l < state.aux.size(); ++l) {
      const auto w = state.weights.layers[l].weight.values();
      const auto v = state.aux[l].values();
      auto out = g.weight[l].values();
      for (std::size_t i = 0; i < w.size(); ++i) out[i] -= state.beta * (v[i] - w[i]);
    }
  }
  return g;
}

}  // namespace

PenaltyState make_penalty_state(NetworkParams net, double lambda, double beta0, double sigma, bool group_term) {
  if (!(lambda >= 0.0)) throw ConfigError("must be nonnegative", "lambda");
  if (!(sigma > 1.0)) throw ConfigError("must be greater than 1", "sigma");
  const bool disabled = beta0 == 0.0 && lambda == 0.0;
  if (!(beta0 > 0.0) && !disabled) throw ConfigError("must be positive (0 only together with lambda = 0)", "beta0");

  PenaltyState s;
  s.weights = std::move(net);
  s.lambda = lambda;
  s.beta = beta0;
  s.sigma = sigma;
  s.group_term = group_term;
  for (const auto& layer : s.weights.layers) s.aux.push_back(layer.weight);
  if (!disabled) inner_step_v(s);
  return s;
}

double penalty_terms(const PenaltyState& state) {
  double l0 = 0.0;
  for (const auto& v : state.aux) l0 += static_cast<double>(l0_count(v.values()));
  return group_part(state.weights, state) + state.lambda * l0 + smooth_part(state.weights, state, 0.0);
}

double f_beta_eval(const PenaltyState& state, const Dataset& batch) {
  return f_beta_value(mean_loss(state.weights, batch), state);
}

NetworkGradients effective_gradient(const PenaltyState& state, NetworkGradients loss_grads) {
  NetworkGradients g = smooth_gradient(state, std::move(loss_grads));
  if (state.group_term && state.lambda != 0.0) {
    add_regularizer_subgrad({RegularizerKind::group_lasso, state.lambda}, state.weights, g);
  }
  return g;
}

void inner_step_w(PenaltyState& state, const NetworkGradients& loss_grads, Optimizer& optimizer) {
  const NetworkGradients g = effective_gradient(state, loss_grads);
  if (!g.all_finite()) {
    throw DivergenceError("non-finite effective gradient", state.outer_iteration, state.inner_step);
  }
  optimizer.step(state.weights, g);
  ++state.inner_step;
}

double inner_step_w(PenaltyState& state, const Dataset& minibatch, Optimizer& optimizer, unsigned threads) {
  if (minibatch.size() == 0) throw InputError("inner_step_w: empty minibatch");
  LossAndGradients lg = loss_and_gradients(state.weights, minibatch, threads);
  if (!std::isfinite(lg.loss)) throw DivergenceError("non-finite loss", state.outer_iteration, state.inner_step);
  inner_step_w(state, lg.grads, optimizer);
  return lg.loss;
}

void inner_step_v(PenaltyState& state) {
  if (state.beta == 0.0 && state.lambda == 0.0) {
    for (std::size_t l = 0; l < state.aux.size(); ++l) state.aux[l] = state.weights.layers[l].weight;
    return;
  }
  for (std::size_t l = 0; l < state.aux.size(); ++l) {
    prox_l0_into(state.weights.layers[l].weight.values(), state.lambda, state.beta, state.aux[l].values());
  }
}

void escalate_beta(PenaltyState& state) {
  state.beta *= state.sigma;
  ++state.outer_iteration;
}

double coupling_gap_squared(const PenaltyState& state) {
  double total = 0.0;
  for (std::size_t l = 0; l < state.aux.size(); ++l) {
    const auto w = state.weights.layers[l].weight.values();
    const auto v = state.aux[l].values();
    for (std::size_t i = 0; i < w.size(); ++i) total += (v[i] - w[i]) * (v[i] - w[i]);
  }
  return total;
}

double coupling_gap_max(const PenaltyState& state) {
  double worst = 0.0;
  for (std::size_t l = 0; l < state.aux.size(); ++l) {
    const auto w = state.weights.layers[l].weight.values();
    const auto v = state.aux[l].values();
    for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(v[i] - w[i]));
  }
  return worst;
}

BlockSolve minimize_w_block(PenaltyState& state, const Dataset& data, double tolerance, std::size_t max_iterations) {
  if (!(tolerance > 0.0)) throw ConfigError("must be positive", "exact_tolerance");
  BlockSolve result;
  const double group_lambda = state.group_term ? state.lambda : 0.0;
  const double beta = state.beta;

  // Only the loss is treated as smooth. The coupling and group terms form the
  // proximal part: for a step t,
  //   argmin_W ||W - Z||^2 / (2t) + (beta / 2)||W - V||^2 + lambda R_GL(W)
  // is the group prox at (Z + t beta V) / (1 + t beta) with step t / (1 + t beta),
  // so the step size does not shrink as beta grows.
  LossAndGradients lg = loss_and_gradients(state.weights, data);
  double loss = lg.loss;
  NetworkGradients grad = std::move(lg.grads);
  double step = 1.0;

  while (result.iterations < max_iterations) {
    ++result.iterations;
    NetworkParams trial = state.weights;
    const double shrink = 1.0 / (1.0 + step * beta);
    double model_gap = 0.0;  // <grad, W+ - W> + ||W+ - W||^2 / (2 step)
    double move_sq = 0.0;
    for (std::size_t l = 0; l < trial.layers.size(); ++l) {
      auto w = trial.layers[l].weight.values();
      const auto v = state.aux[l].values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = (w[i] - step * grad.weight[l][i] + step * beta * v[i]) * shrink;
      if (group_lambda != 0.0) prox_group_lasso(w, trial.partition.layers[l], step * shrink * group_lambda);
      auto b = trial.layers[l].bias.values();
      for (std::size_t i = 0; i < b.size(); ++i) b[i] -= step * grad.bias[l][i];

      const auto w0 = state.weights.layers[l].weight.values();
      const auto b0 = state.weights.layers[l].bias.values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = w[i] - w0[i];
        model_gap += grad.weight[l][i] * d;
        move_sq += d * d;
      }
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double d = b[i] - b0[i];
        model_gap += grad.bias[l][i] * d;
        move_sq += d * d;
      }
    }
    model_gap += move_sq / (2.0 * step);

    LossAndGradients next = loss_and_gradients(trial, data);
    if (!std::isfinite(next.loss)) {
      throw DivergenceError("non-finite loss in block solve", state.outer_iteration, result.iterations);
    }
    // Backtracking on the loss. The step never grows again, so once it fits
    // the curvature the tail of the solve is a fixed-step iteration and
    // round-off in the loss cannot shrink it to nothing.
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(loss));
    if (next.loss > loss + model_gap + slack) {
      step *= 0.5;
      if (step < 1e-30) break;
      continue;
    }
    result.mapping_norm = std::sqrt(move_sq) / step;
    state.weights = std::move(trial);
    loss = next.loss;
    grad = std::move(next.grads);
    if (result.mapping_norm < tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace sgl0
