#include "sgl0/optimizer.hpp"

#include <cmath>
#include <string>

#include "sgl0/error.hpp"

namespace sgl0 {

std::string_view to_string(OptimizerMethod m) { return m == OptimizerMethod::adam ? "adam" : "sgd"; }

OptimizerMethod parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerMethod::adam;
  if (text == "sgd") return OptimizerMethod::sgd;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected sgd or adam)", "method");
}

void OptimizerSpec::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("must be positive", "lr");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("must lie in (0, 1]", "lr_decay");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("must lie in [0, 1)", "adam_beta1");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("must lie in [0, 1)", "adam_beta2");
  if (!(adam_epsilon > 0.0)) throw ConfigError("must be positive", "adam_epsilon");
}

Optimizer::Optimizer(const OptimizerSpec& spec, const NetworkParams& net) : spec_(spec), lr_(spec.learning_rate) {
  spec_.validate();
  if (spec_.method == OptimizerMethod::adam) {
    for (const auto& l : net.layers) {
      m_weight_.emplace_back(l.weight.size(), 0.0);
      v_weight_.emplace_back(l.weight.size(), 0.0);
      m_bias_.emplace_back(l.bias.size(), 0.0);
      v_bias_.emplace_back(l.bias.size(), 0.0);
    }
  }
}

void Optimizer::update(std::span<double> w, std::span<const double> g, std::vector<double>& m, std::vector<double>& v,
                       double c1, double c2) const {
  const double b1 = spec_.adam_beta1, b2 = spec_.adam_beta2, eps = spec_.adam_epsilon;
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

void Optimizer::step(NetworkParams& net, const NetworkGradients& grads) {
  if (grads.weight.size() != net.layers.size() || grads.bias.size() != net.layers.size()) {
    throw DimensionError("optimizer: gradient layout does not match the network");
  }
  ++t_;
  if (spec_.method == OptimizerMethod::sgd) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto w = net.layers[l].weight.values();
      auto b = net.layers[l].bias.values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * grads.weight[l][i];
      for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr_ * grads.bias[l][i];
    }
    return;
  }
  const double c1 = 1.0 - std::pow(spec_.adam_beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(spec_.adam_beta2, static_cast<double>(t_));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].weight.values(), grads.weight[l].values(), m_weight_[l], v_weight_[l], c1, c2);
    update(net.layers[l].bias.values(), grads.bias[l].values(), m_bias_[l], v_bias_[l], c1, c2);
  }
}

}  // namespace sgl0
