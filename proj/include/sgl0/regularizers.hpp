#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sgl0/model.hpp"

namespace sgl0 {

enum class RegularizerKind { none, l1, l0, group_lasso, sparse_group_lasso, sparse_group_l0asso };

std::string_view to_string(RegularizerKind kind);
RegularizerKind parse_regularizer(std::string_view text);

struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::none;
  double lambda = 0.0;

  void validate() const;
};

/// sum_g sqrt(|g|) * ||w_g||_2
double group_lasso_value(std::span<const double> w, const LayerGroups& groups);

/// sqrt(|g|) * w_g / ||w_g||_2 per group; zero for all-zero groups.
std::vector<double> group_lasso_subgrad(std::span<const double> w, const LayerGroups& groups);

double l1_value(std::span<const double> w);
/// sign(w), with 0 at w == 0.
std::vector<double> l1_subgrad(std::span<const double> w);

/// Exact count of entries that are not equal to zero.
std::size_t l0_count(std::span<const double> w);

/// group_lasso_value + l1_value.
double sgl_value(std::span<const double> w, const LayerGroups& groups);
/// group_lasso_value + l0_count. Unweighted; callers apply lambda.
double sgl0_value(std::span<const double> w, const LayerGroups& groups);

double soft_threshold(double c, double lambda);

/// 0 when |w| <= t, else w.
inline double hard_threshold(double w, double t) { return (w < 0 ? -w : w) <= t ? 0.0 : w; }

/// Elementwise hard threshold at sqrt(2 lambda / beta): the exact minimizer
/// of lambda ||v||_0 + (beta / 2) ||v - w||^2. Throws ConfigError for beta <= 0.
std::vector<double> prox_l0(std::span<const double> w, double lambda, double beta);
void prox_l0_into(std::span<const double> w, double lambda, double beta, std::span<double> out);

/// Block soft threshold, the proximal map of t * group_lasso_value:
/// w_g * max(0, 1 - t sqrt(|g|) / ||w_g||).
void prox_group_lasso(std::span<double> w, const LayerGroups& groups, double t);

/// lambda * sum_l R(W_l) over the network for the given kind.
double regularizer_value(const RegularizerSpec& spec, const NetworkParams& net);

/// Adds lambda * (selected subgradient of R) to `grads` for every layer. The
/// l0 parts of l0 and sparse-group-l0asso have no useful subgradient and are
/// handled by the penalty method instead, so only their group term is added.
void add_regularizer_subgrad(const RegularizerSpec& spec, const NetworkParams& net, NetworkGradients& grads);

}  // namespace sgl0
