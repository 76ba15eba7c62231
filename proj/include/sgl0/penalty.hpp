#pragma once

#include <cstddef>
#include <vector>

#include "sgl0/data.hpp"
#include "sgl0/model.hpp"
#include "sgl0/optimizer.hpp"

namespace sgl0 {

/// Primal weights W and auxiliary copies V of the quadratic-penalty
/// relaxation, with the penalty weight beta escalated by sigma between outer
/// iterations.
struct PenaltyState {
  NetworkParams weights;     // W
  std::vector<Tensor> aux;   // V, one tensor per layer weight; biases have none
  double lambda = 0.0;
  double beta = 0.0;
  double sigma = 2.0;
  bool group_term = true;    // false drops lambda * R_GL (plain l0 penalty)
  std::size_t inner_step = 0;       // k
  std::size_t outer_iteration = 1;  // j
};

/// Builds the state with V = prox_l0(W, lambda, beta0). beta0 == 0 is only
/// accepted together with lambda == 0 (coupling disabled, V = W).
PenaltyState make_penalty_state(NetworkParams net, double lambda, double beta0, double sigma, bool group_term = true);

/// sum_l [ lambda (R_GL(W_l) + ||V_l||_0) + (beta / 2) ||V_l - W_l||^2 ].
double penalty_terms(const PenaltyState& state);

/// F_beta(V, W) given the data loss at W.
inline double f_beta_value(double loss, const PenaltyState& state) { return loss + penalty_terms(state); }

/// F_beta(V, W) with the loss measured on `batch`.
double f_beta_eval(const PenaltyState& state, const Dataset& batch);

/// Loss gradient plus lambda * dR_GL(W_l) - beta (V_l - W_l) on each weight
/// tensor; biases keep the plain loss gradient.
NetworkGradients effective_gradient(const PenaltyState& state, NetworkGradients loss_grads);

/// One W update from precomputed loss gradients. Throws DivergenceError on a
/// non-finite effective gradient.
void inner_step_w(PenaltyState& state, const NetworkGradients& loss_grads, Optimizer& optimizer);

/// One W update on a minibatch; returns the minibatch loss before the step.
double inner_step_w(PenaltyState& state, const Dataset& minibatch, Optimizer& optimizer, unsigned threads = 1);

/// V_l = prox_l0(W_l, lambda, beta) for every layer.
void inner_step_v(PenaltyState& state);

/// beta <- sigma * beta and advance the outer counter.
void escalate_beta(PenaltyState& state);

/// sum_l ||V_l - W_l||_2^2
double coupling_gap_squared(const PenaltyState& state);
/// max_l ||V_l - W_l||_inf
double coupling_gap_max(const PenaltyState& state);

struct BlockSolve {
  std::size_t iterations = 0;
  double mapping_norm = 0.0;  // norm of the final proximal-gradient mapping
  bool converged = false;
};

/// Minimizes F_beta over W with V fixed by proximal gradient with
/// backtracking on the full dataset, until the proximal-gradient mapping
/// norm drops below `tolerance`. Never increases F_beta.
BlockSolve minimize_w_block(PenaltyState& state, const Dataset& data, double tolerance, std::size_t max_iterations);

}  // namespace sgl0
