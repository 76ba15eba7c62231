#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "sgl0/model.hpp"

namespace sgl0 {

enum class OptimizerMethod { sgd, adam };

std::string_view to_string(OptimizerMethod m);
OptimizerMethod parse_optimizer(std::string_view text);

struct OptimizerSpec {
  OptimizerMethod method = OptimizerMethod::adam;
  double learning_rate = 1e-3;
  double lr_decay = 0.1;               // multiplier applied every lr_decay_interval epochs
  std::size_t lr_decay_interval = 40;  // 0 disables decay
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// First-order update rule over every weight and bias tensor of a network.
/// Adam moments persist for the optimizer's lifetime.
class Optimizer {
 public:
  Optimizer(const OptimizerSpec& spec, const NetworkParams& net);

  void step(NetworkParams& net, const NetworkGradients& grads);

  double learning_rate() const noexcept { return lr_; }
  void set_learning_rate(double lr) noexcept { lr_ = lr; }
  std::size_t steps() const noexcept { return t_; }
  const OptimizerSpec& spec() const noexcept { return spec_; }

 private:
  void update(std::span<double> w, std::span<const double> g, std::vector<double>& m, std::vector<double>& v,
              double c1, double c2) const;

  OptimizerSpec spec_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_weight_, v_weight_, m_bias_, v_bias_;
};

}  // namespace sgl0
