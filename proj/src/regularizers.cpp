#include "sgl0/regularizers.hpp"

#include <cmath>
#include <string>

#include "sgl0/error.hpp"

namespace sgl0 {
namespace {

double group_norm(std::span<const double> w, const Group& g) {
  double s = 0.0;
  for (auto i : g) s += w[i] * w[i];
  return std::sqrt(s);
}

void require_layer(std::span<const double> w, const LayerGroups& groups) {
  if (w.size() != groups.weight_count) {
    throw DimensionError("partition covers " + std::to_string(groups.weight_count) + " weights but layer has " +
                         std::to_string(w.size()));
  }
}

}  // namespace

std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::none: return "none";
    case RegularizerKind::l1: return "l1";
    case RegularizerKind::l0: return "l0";
    case RegularizerKind::group_lasso: return "gl";
    case RegularizerKind::sparse_group_lasso: return "sgl";
    case RegularizerKind::sparse_group_l0asso: return "sgl0";
  }
  return "none";
}

RegularizerKind parse_regularizer(std::string_view text) {
  for (auto k : {RegularizerKind::none, RegularizerKind::l1, RegularizerKind::l0, RegularizerKind::group_lasso,
                 RegularizerKind::sparse_group_lasso, RegularizerKind::sparse_group_l0asso}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown regularizer '" + std::string(text) + "' (expected none, l1, l0, gl, sgl or sgl0)",
                    "kind");
}

void RegularizerSpec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("lambda must be a finite nonnegative number", "lambda");
  }
}

double group_lasso_value(std::span<const double> w, const LayerGroups& groups) {
  require_layer(w, groups);
  double total = 0.0;
  for (const auto& g : groups.groups) total += std::sqrt(static_cast<double>(g.size())) * group_norm(w, g);
  return total;
}

std::vector<double> group_lasso_subgrad(std::span<const double> w, const LayerGroups& groups) {
  require_layer(w, groups);
  std::vector<double> out(w.size(), 0.0);
  for (const auto& g : groups.groups) {
    const double norm = group_norm(w, g);
    if (norm == 0.0) continue;
    const double factor = std::sqrt(static_cast<double>(g.size())) / norm;
    for (auto i : g) out[i] = factor * w[i];
  }
  return out;
}

double l1_value(std::span<const double> w) {
  double total = 0.0;
  for (double v : w) total += std::abs(v);
  return total;
}

std::vector<double> l1_subgrad(std::span<const double> w) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] > 0.0 ? 1.0 : (w[i] < 0.0 ? -1.0 : 0.0);
  return out;
}

std::size_t l0_count(std::span<const double> w) {
  std::size_t n = 0;
  for (double v : w) n += v != 0.0 ? 1 : 0;
  return n;
}

double sgl_value(std::span<const double> w, const LayerGroups& groups) {
  return group_lasso_value(w, groups) + l1_value(w);
}

double sgl0_value(std::span<const double> w, const LayerGroups& groups) {
  return group_lasso_value(w, groups) + static_cast<double>(l0_count(w));
}

double soft_threshold(double c, double lambda) {
  const double mag = std::abs(c) - lambda;
  if (mag <= 0.0) return 0.0;
  return c > 0.0 ? mag : -mag;
}

void prox_l0_into(std::span<const double> w, double lambda, double beta, std::span<double> out) {
  if (!(beta > 0.0)) throw ConfigError("prox_l0 needs beta > 0", "beta");
  if (!(lambda >= 0.0)) throw ConfigError("prox_l0 needs lambda >= 0", "lambda");
  if (out.size() != w.size()) throw DimensionError("prox_l0: output size mismatch");
  const double t = std::sqrt(2.0 * lambda / beta);
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = hard_threshold(w[i], t);
}

std::vector<double> prox_l0(std::span<const double> w, double lambda, double beta) {
  std::vector<double> out(w.size());
  prox_l0_into(w, lambda, beta, out);
  return out;
}

void prox_group_lasso(std::span<double> w, const LayerGroups& groups, double t) {
  require_layer(w, groups);
  for (const auto& g : groups.groups) {
    const double norm = group_norm(w, g);
    const double shrink = t * std::sqrt(static_cast<double>(g.size()));
    const double factor = norm > shrink ? 1.0 - shrink / norm : 0.0;
    for (auto i : g) w[i] *= factor;
  }
}

double regularizer_value(const RegularizerSpec& spec, const NetworkParams& net) {
  double total = 0.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto w = net.layers[l].weight.values();
    const auto& groups = net.partition.layers[l];
    switch (spec.kind) {
      case RegularizerKind::none: break;
      case RegularizerKind::l1: total += l1_value(w); break;
      case RegularizerKind::l0: total += static_cast<double>(l0_count(w)); break;
      case RegularizerKind::group_lasso: total += group_lasso_value(w, groups); break;
      case RegularizerKind::sparse_group_lasso: total += sgl_value(w, groups); break;
      case RegularizerKind::sparse_group_l0asso: total += sgl0_value(w, groups); break;
    }
  }
  return spec.lambda * total;
}

void add_regularizer_subgrad(const RegularizerSpec& spec, const NetworkParams& net, NetworkGradients& grads) {
  if (spec.kind == RegularizerKind::none || spec.kind == RegularizerKind::l0 || spec.lambda == 0.0) return;
  const bool group = spec.kind == RegularizerKind::group_lasso || spec.kind == RegularizerKind::sparse_group_lasso ||
                     spec.kind == RegularizerKind::sparse_group_l0asso;
  const bool l1 = spec.kind == RegularizerKind::l1 || spec.kind == RegularizerKind::sparse_group_lasso;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto w = net.layers[l].weight.values();
    auto g = grads.weight[l].values();
    if (group) {
      const auto sg = group_lasso_subgrad(w, net.partition.layers[l]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += spec.lambda * sg[i];
    }
    if (l1) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += spec.lambda * (w[i] > 0.0 ? 1.0 : (w[i] < 0.0 ? -1.0 : 0.0));
      }
    }
  }
}

}  // namespace sgl0
