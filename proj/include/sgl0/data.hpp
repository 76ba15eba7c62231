#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sgl0/tensor.hpp"

namespace sgl0 {

enum class Split { train, test };

/// Samples with class labels, or regression targets when `targets` is non-empty.
struct Dataset {
  Tensor images;  // [N x C x H x W] or [N x D]
  std::vector<int> labels;
  Tensor targets;  // [N x O], regression only
  std::size_t num_classes = 0;
  Split split = Split::train;

  std::size_t size() const noexcept { return images.empty() ? 0 : images.dim(0); }
  bool is_regression() const noexcept { return !targets.empty(); }

  /// Rows in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// The first `count` rows (all rows when count exceeds the size).
  Dataset head(std::size_t count) const;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Parses big-endian IDX image and label buffers into an N x 1 x 28 x 28
/// dataset scaled to [0, 1]. Throws ParseError naming the failing offset.
Dataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                        Split split = Split::train);

Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                       Split split = Split::train);

/// Loads `train-*` or `t10k-*` files from an MNIST directory.
Dataset load_mnist_dir(const std::filesystem::path& dir, Split split);

/// Seeded Gaussian blobs, one per class, with centers spread on a scaled
/// simplex-like layout so the classes are linearly separable at `spread`.
Dataset make_synthetic(std::size_t classes, std::size_t dim, std::size_t per_class, std::uint64_t seed,
                       double spread = 0.15, Split split = Split::train);

struct BatchPlan {
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  bool shuffle = true;
};

/// Index batches for one epoch. The permutation depends only on (seed, epoch);
/// the final short batch is kept.
std::vector<std::vector<std::size_t>> batches(std::size_t n, const BatchPlan& plan, std::size_t epoch);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace sgl0
