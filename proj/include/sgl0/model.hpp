#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgl0/autodiff.hpp"
#include "sgl0/data.hpp"
#include "sgl0/tensor.hpp"

namespace sgl0 {

enum class LayerKind { conv2d, affine };
enum class Activation { none, relu };
enum class Architecture { lenet5_caffe, mlp };

/// How weights of a layer are grouped into "neurons".
///
/// output: conv by filter, affine by output row.
/// input:  conv by filter, affine by input column.
enum class GroupingMode { output, input };

std::string_view to_string(Architecture a);
std::string_view to_string(GroupingMode g);
Architecture parse_architecture(std::string_view text);
GroupingMode parse_grouping(std::string_view text);

struct LayerParams {
  LayerKind kind = LayerKind::affine;
  std::size_t index = 0;
  Tensor weight;  // conv: [F x C x k x k]; affine: [O x I]
  Tensor bias;    // [F] or [O]
  std::size_t stride = 1;
  std::size_t pool = 0;  // max-pool window applied after the layer; 0 = none
  Activation activation = Activation::none;

  std::size_t fan_in() const;
  std::size_t fan_out() const;
};

/// Flat weight indices of one group within its layer's weight tensor.
using Group = std::vector<std::size_t>;

struct LayerGroups {
  std::vector<Group> groups;
  std::size_t weight_count = 0;
};

/// Per-layer assignment of regularized weight indices to groups. Biases are
/// never part of a group.
struct GroupPartition {
  std::vector<LayerGroups> layers;

  std::size_t total_groups() const;
  std::vector<std::size_t> group_counts() const;
};

/// Throws DimensionError unless the groups are nonempty, pairwise disjoint,
/// and cover [0, weight_count).
void validate_groups(const LayerGroups& groups);

struct NetworkParams {
  Architecture architecture = Architecture::mlp;
  std::vector<std::size_t> mlp_sizes;
  GroupingMode grouping = GroupingMode::input;
  std::vector<LayerParams> layers;
  GroupPartition partition;

  /// Weights and biases.
  std::size_t parameter_count() const;
  /// Regularized weights only.
  std::size_t weight_count() const;

  bool operator==(const NetworkParams& other) const;
};

/// conv(1->20, 5x5) -> pool 2 -> conv(20->50, 5x5) -> pool 2 -> fc(800->500) -> relu -> fc(500->10).
NetworkParams build_lenet5_caffe(std::uint64_t seed, GroupingMode grouping = GroupingMode::input);

/// Affine+ReLU chain ending in a plain affine layer.
NetworkParams build_mlp(std::span<const std::size_t> sizes, std::uint64_t seed,
                        GroupingMode grouping = GroupingMode::input);

GroupPartition extract_groups(const NetworkParams& net, GroupingMode mode);

/// Parameter leaves of one layer on a tape.
struct LayerVars {
  Var weight;
  Var bias;
};

/// Records the network on `tape` and returns the logits (or regression output).
Var forward(const NetworkParams& net, Var input, std::span<const LayerVars> params);

/// Gradients laid out like the network's layers.
struct NetworkGradients {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;

  static NetworkGradients zeros_like(const NetworkParams& net);
  bool all_finite() const;
};

struct LossAndGradients {
  double loss = 0.0;
  NetworkGradients grads;
};

/// Mean loss over `batch` (cross-entropy, or least squares for regression
/// data) and its gradient. With threads > 1 the batch is split into that many
/// contiguous shards whose results are summed in shard order, so the output
/// is reproducible for a fixed thread count.
LossAndGradients loss_and_gradients(const NetworkParams& net, const Dataset& batch, unsigned threads = 1);

/// Mean loss without gradients, evaluated in chunks.
double mean_loss(const NetworkParams& net, const Dataset& data, std::size_t chunk = 512);

/// Network outputs for every sample, evaluated in chunks.
Tensor predict(const NetworkParams& net, const Tensor& inputs, std::size_t chunk = 512);

/// Percentage of misclassified samples.
double classification_error(const NetworkParams& net, const Dataset& data, std::size_t chunk = 512);

/// Versioned little-endian binary checkpoint; round trips are bit-exact.
std::vector<std::uint8_t> serialize_checkpoint(const NetworkParams& net);
NetworkParams deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const NetworkParams& net);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sgl0
