#include "sgl0/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "sgl0/error.hpp"
#include "sgl0/rng.hpp"

namespace sgl0 {
namespace {

constexpr std::size_t kMnistSide = 28;
constexpr std::size_t kMnistClasses = 10;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size()) {
    throw ParseError(std::string(what) + ": truncated header", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined key.
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.split = split;
  if (indices.empty()) return out;
  const std::size_t row = images.size() / size();
  Shape shape = images.shape();
  shape[0] = indices.size();
  std::vector<double> values(indices.size() * row);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw InputError("sample index " + std::to_string(indices[i]) + " out of range");
    std::copy_n(images.data() + indices[i] * row, row, values.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  out.images = Tensor(std::move(shape), std::move(values));
  if (!labels.empty()) {
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(labels[i]);
  }
  if (!targets.empty()) {
    const std::size_t trow = targets.size() / size();
    Shape tshape = targets.shape();
    tshape[0] = indices.size();
    std::vector<double> tv(indices.size() * trow);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      std::copy_n(targets.data() + indices[i] * trow, trow, tv.begin() + static_cast<std::ptrdiff_t>(i * trow));
    }
    out.targets = Tensor(std::move(tshape), std::move(tv));
  }
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  std::vector<std::size_t> idx(std::min(count, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

Dataset parse_mnist_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels, Split split) {
  const std::uint32_t img_magic = read_be32(images, 0, "images");
  if (img_magic != kIdxImagesMagic) throw ParseError("images: bad magic number " + std::to_string(img_magic), 0);
  const std::uint32_t n = read_be32(images, 4, "images");
  const std::uint32_t rows = read_be32(images, 8, "images");
  const std::uint32_t cols = read_be32(images, 12, "images");
  if (n == 0) throw ParseError("images: zero image count", 4);
  if (rows != kMnistSide) throw ParseError("images: expected 28 rows, header says " + std::to_string(rows), 8);
  if (cols != kMnistSide) throw ParseError("images: expected 28 columns, header says " + std::to_string(cols), 12);
  const std::size_t pixels = std::size_t{n} * rows * cols;
  if (images.size() != 16 + pixels) {
    throw ParseError("images: header declares " + std::to_string(n) + " images (" + std::to_string(16 + pixels) +
                         " bytes) but file has " + std::to_string(images.size()) + " bytes",
                     std::min(images.size(), 16 + pixels));
  }

  const std::uint32_t lbl_magic = read_be32(labels, 0, "labels");
  if (lbl_magic != kIdxLabelsMagic) throw ParseError("labels: bad magic number " + std::to_string(lbl_magic), 0);
  const std::uint32_t nl = read_be32(labels, 4, "labels");
  if (nl != n) {
    throw ParseError("labels: count " + std::to_string(nl) + " does not match image count " + std::to_string(n), 4);
  }
  if (labels.size() != 8 + std::size_t{nl}) {
    throw ParseError("labels: header declares " + std::to_string(nl) + " labels but file has " +
                         std::to_string(labels.size()) + " bytes",
                     std::min(labels.size(), 8 + std::size_t{nl}));
  }

  Dataset ds;
  ds.split = split;
  ds.num_classes = kMnistClasses;
  std::vector<double> values(pixels);
  for (std::size_t i = 0; i < pixels; ++i) values[i] = static_cast<double>(images[16 + i]) / 255.0;
  ds.images = Tensor({n, 1, rows, cols}, std::move(values));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t label = labels[8 + i];
    if (label >= kMnistClasses) throw ParseError("labels: value " + std::to_string(label) + " out of range", 8 + i);
    ds.labels[i] = label;
  }
  return ds;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                       Split split) {
  const auto images = read_file_bytes(images_path);
  const auto labels = read_file_bytes(labels_path);
  try {
    return parse_mnist_idx(images, labels, split);
  } catch (const ParseError& e) {
    throw ParseError(images_path.filename().string() + "/" + labels_path.filename().string() + ": " +
                         std::string(e.what()),
                     e.offset());
  }
}

Dataset load_mnist_dir(const std::filesystem::path& dir, Split split) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  return load_mnist_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"), split);
}

Dataset make_synthetic(std::size_t classes, std::size_t dim, std::size_t per_class, std::uint64_t seed,
                       double spread, Split split) {
  if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes", "synthetic_classes");
  if (dim == 0) throw ConfigError("synthetic dimension must be positive", "synthetic_dim");
  if (per_class == 0) throw ConfigError("synthetic per-class count must be positive", "synthetic_per_class");

  // Centers depend only on (classes, dim) so train and test draws share them.
  Rng center_rng(mix(classes, dim));
  std::vector<double> centers(classes * dim);
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      centers[c * dim + d] = center_rng.normal();
      norm += centers[c * dim + d] * centers[c * dim + d];
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < dim; ++d) centers[c * dim + d] /= norm;
  }
  if (dim >= classes) {
    // Orthonormal class directions make separability independent of the draw.
    std::fill(centers.begin(), centers.end(), 0.0);
    for (std::size_t c = 0; c < classes; ++c) centers[c * dim + c] = 1.0;
  }

  Rng rng(mix(seed, split == Split::train ? 0 : 1));
  const std::size_t n = classes * per_class;
  std::vector<double> values(n * dim);
  Dataset ds;
  ds.split = split;
  ds.num_classes = classes;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t d = 0; d < dim; ++d) values[i * dim + d] = centers[c * dim + d] + spread * rng.normal();
  }
  ds.images = Tensor({n, dim}, std::move(values));
  return ds;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, const BatchPlan& plan, std::size_t epoch) {
  if (plan.batch_size == 0) throw ConfigError("batch size must be positive", "batch_size");
  if (plan.batch_size > n) {
    throw ConfigError("batch size " + std::to_string(plan.batch_size) + " exceeds dataset size " + std::to_string(n),
                      "batch_size");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (plan.shuffle) {
    Rng rng(mix(plan.seed, epoch));
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += plan.batch_size) {
    const std::size_t end = std::min(n, start + plan.batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace sgl0
