#include "sgl0/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "sgl0/error.hpp"
#include "sgl0/rng.hpp"

namespace sgl0 {
namespace {

constexpr char kCheckpointMagic[8] = {'S', 'G', 'L', '0', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer) {
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + layer + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
void initialize(LayerParams& layer, std::uint64_t seed) {
  Rng rng(layer_seed(seed, layer.index));
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.fan_in() + layer.fan_out()));
  for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
  layer.bias.fill(0.0);
}

LayerParams conv_layer(std::size_t index, std::size_t in, std::size_t out, std::size_t k, std::size_t pool) {
  LayerParams p;
  p.kind = LayerKind::conv2d;
  p.index = index;
  p.weight = Tensor({out, in, k, k});
  p.bias = Tensor({out});
  p.pool = pool;
  return p;
}

LayerParams affine_layer(std::size_t index, std::size_t in, std::size_t out, Activation act) {
  LayerParams p;
  p.kind = LayerKind::affine;
  p.index = index;
  p.weight = Tensor({out, in});
  p.bias = Tensor({out});
  p.activation = act;
  return p;
}

// Little-endian writer/reader for checkpoints.
class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) u64(e);
    for (double v : t.values()) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  void expect(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(bytes_.data() + pos_, p, n) != 0) throw ParseError("checkpoint: bad magic", pos_);
    pos_ += n;
  }
  Tensor tensor() {
    const std::size_t at = pos_;
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 8) throw ParseError("checkpoint: implausible tensor rank " + std::to_string(rank), at);
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& e : shape) {
      e = u64();
      if (e == 0 || e > (std::size_t{1} << 32)) throw ParseError("checkpoint: bad tensor extent", pos_ - 8);
      count *= e;
    }
    need(count * 8);
    std::vector<double> values(count);
    for (auto& v : values) v = f64();
    return Tensor(std::move(shape), std::move(values));
  }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint: truncated", bytes_.size());
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(Architecture a) { return a == Architecture::lenet5_caffe ? "lenet5-caffe" : "mlp"; }
std::string_view to_string(GroupingMode g) { return g == GroupingMode::input ? "input" : "output"; }

Architecture parse_architecture(std::string_view text) {
  if (text == "lenet5-caffe") return Architecture::lenet5_caffe;
  if (text == "mlp") return Architecture::mlp;
  throw ConfigError("unknown architecture '" + std::string(text) + "' (expected lenet5-caffe or mlp)",
                    "architecture");
}

GroupingMode parse_grouping(std::string_view text) {
  if (text == "input") return GroupingMode::input;
  if (text == "output") return GroupingMode::output;
  throw ConfigError("unknown grouping mode '" + std::string(text) + "' (expected input or output)", "grouping");
}

std::size_t LayerParams::fan_in() const {
  if (kind == LayerKind::affine) return weight.dim(1);
  return weight.dim(1) * weight.dim(2) * weight.dim(3);
}

std::size_t LayerParams::fan_out() const {
  if (kind == LayerKind::affine) return weight.dim(0);
  return weight.dim(0) * weight.dim(2) * weight.dim(3);
}

std::size_t GroupPartition::total_groups() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.groups.size();
  return n;
}

std::vector<std::size_t> GroupPartition::group_counts() const {
  std::vector<std::size_t> counts;
  for (const auto& l : layers) counts.push_back(l.groups.size());
  return counts;
}

void validate_groups(const LayerGroups& groups) {
  std::vector<char> seen(groups.weight_count, 0);
  std::size_t covered = 0;
  for (std::size_t g = 0; g < groups.groups.size(); ++g) {
    if (groups.groups[g].empty()) throw DimensionError("group " + std::to_string(g) + " is empty");
    for (auto i : groups.groups[g]) {
      if (i >= groups.weight_count) {
        throw DimensionError("group " + std::to_string(g) + " references weight " + std::to_string(i) +
                             " beyond layer size " + std::to_string(groups.weight_count));
      }
      if (seen[i]) throw DimensionError("weight " + std::to_string(i) + " belongs to more than one group");
      seen[i] = 1;
      ++covered;
    }
  }
  if (covered != groups.weight_count) {
    throw DimensionError("groups cover " + std::to_string(covered) + " of " + std::to_string(groups.weight_count) +
                         " weights");
  }
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

std::size_t NetworkParams::weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size();
  return n;
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  if (architecture != other.architecture || mlp_sizes != other.mlp_sizes || grouping != other.grouping ||
      layers.size() != other.layers.size()) {
    return false;
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.kind != b.kind || a.stride != b.stride || a.pool != b.pool || a.activation != b.activation) return false;
    if (a.weight.shape() != b.weight.shape() || a.bias.shape() != b.bias.shape()) return false;
    // Bitwise comparison so that -0.0 and NaN payloads count as differences.
    if (std::memcmp(a.weight.data(), b.weight.data(), a.weight.size() * sizeof(double)) != 0) return false;
    if (std::memcmp(a.bias.data(), b.bias.data(), a.bias.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

NetworkParams build_lenet5_caffe(std::uint64_t seed, GroupingMode grouping) {
  NetworkParams net;
  net.architecture = Architecture::lenet5_caffe;
  net.grouping = grouping;
  net.layers.push_back(conv_layer(0, 1, 20, 5, 2));
  net.layers.push_back(conv_layer(1, 20, 50, 5, 2));
  net.layers.push_back(affine_layer(2, 800, 500, Activation::relu));
  net.layers.push_back(affine_layer(3, 500, 10, Activation::none));
  for (auto& l : net.layers) initialize(l, seed);
  net.partition = extract_groups(net, grouping);
  return net;
}

NetworkParams build_mlp(std::span<const std::size_t> sizes, std::uint64_t seed, GroupingMode grouping) {
  if (sizes.size() < 2) throw ConfigError("an MLP needs at least input and output sizes", "mlp_sizes");
  for (auto s : sizes) {
    if (s < 1) throw ConfigError("MLP layer sizes must be positive", "mlp_sizes");
  }
  NetworkParams net;
  net.architecture = Architecture::mlp;
  net.mlp_sizes.assign(sizes.begin(), sizes.end());
  net.grouping = grouping;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const bool last = l + 2 == sizes.size();
    net.layers.push_back(affine_layer(l, sizes[l], sizes[l + 1], last ? Activation::none : Activation::relu));
  }
  for (auto& l : net.layers) initialize(l, seed);
  net.partition = extract_groups(net, grouping);
  return net;
}

GroupPartition extract_groups(const NetworkParams& net, GroupingMode mode) {
  GroupPartition part;
  for (const auto& layer : net.layers) {
    LayerGroups lg;
    lg.weight_count = layer.weight.size();
    const std::size_t rows = layer.weight.dim(0);
    const std::size_t row_len = layer.weight.size() / rows;
    if (layer.kind == LayerKind::affine && mode == GroupingMode::input) {
      lg.groups.resize(row_len);
      for (std::size_t c = 0; c < row_len; ++c) {
        lg.groups[c].reserve(rows);
        for (std::size_t r = 0; r < rows; ++r) lg.groups[c].push_back(r * row_len + c);
      }
    } else {
      lg.groups.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        lg.groups[r].resize(row_len);
        for (std::size_t c = 0; c < row_len; ++c) lg.groups[r][c] = r * row_len + c;
      }
    }
    part.layers.push_back(std::move(lg));
  }
  return part;
}

Var forward(const NetworkParams& net, Var input, std::span<const LayerVars> params) {
  if (params.size() != net.layers.size()) {
    throw DimensionError("forward: " + std::to_string(params.size()) + " parameter sets for " +
                         std::to_string(net.layers.size()) + " layers");
  }
  Var h = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.kind == LayerKind::conv2d) {
      h = conv2d(h, params[l].weight, params[l].bias, layer.stride);
    } else {
      h = affine(h, params[l].weight, params[l].bias);
    }
    if (layer.pool > 0) h = maxpool2d(h, layer.pool);
    if (layer.activation == Activation::relu) h = relu(h);
  }
  return h;
}

NetworkGradients NetworkGradients::zeros_like(const NetworkParams& net) {
  NetworkGradients g;
  for (const auto& l : net.layers) {
    g.weight.emplace_back(l.weight.shape(), 0.0);
    g.bias.emplace_back(l.bias.shape(), 0.0);
  }
  return g;
}

bool NetworkGradients::all_finite() const {
  for (const auto& t : weight) {
    if (!sgl0::all_finite(t.values())) return false;
  }
  for (const auto& t : bias) {
    if (!sgl0::all_finite(t.values())) return false;
  }
  return true;
}

namespace {

Var loss_node(Var output, const Dataset& batch) {
  if (batch.is_regression()) return least_squares(output, batch.targets);
  return softmax_cross_entropy(output, batch.labels);
}

LossAndGradients shard_gradients(const NetworkParams& net, const Dataset& batch) {
  Tape tape;
  std::vector<LayerVars> vars;
  vars.reserve(net.layers.size());
  for (const auto& l : net.layers) vars.push_back({tape.leaf(l.weight), tape.leaf(l.bias)});
  Var x = tape.constant(batch.images);
  Var loss = loss_node(forward(net, x, vars), batch);
  tape.backward(loss);
  LossAndGradients out;
  out.loss = loss.value()[0];
  for (const auto& v : vars) {
    out.grads.weight.push_back(v.weight.grad());
    out.grads.bias.push_back(v.bias.grad());
  }
  return out;
}

void accumulate(std::vector<Tensor>& into, const std::vector<Tensor>& from, double factor) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    for (std::size_t j = 0; j < into[i].size(); ++j) into[i][j] += factor * from[i][j];
  }
}

}  // namespace

LossAndGradients loss_and_gradients(const NetworkParams& net, const Dataset& batch, unsigned threads) {
  const std::size_t n = batch.size();
  if (n == 0) throw InputError("loss_and_gradients: empty batch");
  const std::size_t shards = std::clamp<std::size_t>(threads, 1, n);
  if (shards == 1) return shard_gradients(net, batch);

  std::vector<LossAndGradients> parts(shards);
  std::vector<Dataset> pieces(shards);
  std::vector<std::size_t> sizes(shards);
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t begin = s * n / shards;
    const std::size_t end = (s + 1) * n / shards;
    std::vector<std::size_t> idx(end - begin);
    for (std::size_t i = begin; i < end; ++i) idx[i - begin] = i;
    pieces[s] = batch.subset(idx);
    sizes[s] = end - begin;
  }
  {
    std::vector<std::jthread> workers;
    for (std::size_t s = 0; s < shards; ++s) {
      workers.emplace_back([&, s] { parts[s] = shard_gradients(net, pieces[s]); });
    }
  }
  LossAndGradients out;
  out.grads = NetworkGradients::zeros_like(net);
  for (std::size_t s = 0; s < shards; ++s) {
    const double w = static_cast<double>(sizes[s]) / static_cast<double>(n);
    out.loss += w * parts[s].loss;
    accumulate(out.grads.weight, parts[s].grads.weight, w);
    accumulate(out.grads.bias, parts[s].grads.bias, w);
  }
  return out;
}

double mean_loss(const NetworkParams& net, const Dataset& data, std::size_t chunk) {
  const std::size_t n = data.size();
  if (n == 0) throw InputError("mean_loss: empty dataset");
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const Dataset piece = data.subset(idx);
    Tape tape;
    std::vector<LayerVars> vars;
    for (const auto& l : net.layers) vars.push_back({tape.constant(l.weight), tape.constant(l.bias)});
    Var loss = loss_node(forward(net, tape.constant(piece.images), vars), piece);
    total += loss.value()[0] * static_cast<double>(end - start);
  }
  return total / static_cast<double>(n);
}

Tensor predict(const NetworkParams& net, const Tensor& inputs, std::size_t chunk) {
  const std::size_t n = inputs.dim(0);
  const std::size_t row = inputs.size() / n;
  std::vector<double> out;
  std::size_t width = 0;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    Shape shape = inputs.shape();
    shape[0] = end - start;
    Tensor piece(shape, std::vector<double>(inputs.data() + start * row, inputs.data() + end * row));
    Tape tape;
    std::vector<LayerVars> vars;
    for (const auto& l : net.layers) vars.push_back({tape.constant(l.weight), tape.constant(l.bias)});
    const Tensor& y = forward(net, tape.constant(std::move(piece)), vars).value();
    width = y.size() / (end - start);
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return Tensor({n, width}, std::move(out));
}

double classification_error(const NetworkParams& net, const Dataset& data, std::size_t chunk) {
  if (data.size() == 0) throw InputError("classification_error: empty dataset");
  const Tensor logits = predict(net, data.images, chunk);
  const std::size_t classes = logits.dim(1);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double* row = logits.data() + i * classes;
    const auto best = static_cast<int>(std::max_element(row, row + classes) - row);
    if (best != data.labels[i]) ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(data.size());
}

std::vector<std::uint8_t> serialize_checkpoint(const NetworkParams& net) {
  ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(net.architecture == Architecture::lenet5_caffe ? 0 : 1);
  w.u32(net.grouping == GroupingMode::input ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(net.mlp_sizes.size()));
  for (auto s : net.mlp_sizes) w.u64(s);
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    w.u32(l.kind == LayerKind::conv2d ? 0 : 1);
    w.u32(l.activation == Activation::relu ? 1 : 0);
    w.u64(l.stride);
    w.u64(l.pool);
    w.tensor(l.weight);
    w.tensor(l.bias);
  }
  return w.take();
}

NetworkParams deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), r.position() - 4);
  }
  NetworkParams net;
  const std::uint32_t arch = r.u32();
  if (arch > 1) throw ParseError("checkpoint: unknown architecture tag", r.position() - 4);
  net.architecture = arch == 0 ? Architecture::lenet5_caffe : Architecture::mlp;
  const std::uint32_t grouping = r.u32();
  if (grouping > 1) throw ParseError("checkpoint: unknown grouping tag", r.position() - 4);
  net.grouping = grouping == 0 ? GroupingMode::input : GroupingMode::output;
  const std::uint32_t nsizes = r.u32();
  if (nsizes > 1024) throw ParseError("checkpoint: implausible MLP size count", r.position() - 4);
  for (std::uint32_t i = 0; i < nsizes; ++i) net.mlp_sizes.push_back(r.u64());
  const std::uint32_t nlayers = r.u32();
  if (nlayers == 0 || nlayers > 1024) throw ParseError("checkpoint: implausible layer count", r.position() - 4);
  for (std::uint32_t i = 0; i < nlayers; ++i) {
    LayerParams l;
    l.index = i;
    const std::uint32_t kind = r.u32();
    if (kind > 1) throw ParseError("checkpoint: unknown layer kind", r.position() - 4);
    l.kind = kind == 0 ? LayerKind::conv2d : LayerKind::affine;
    l.activation = r.u32() == 1 ? Activation::relu : Activation::none;
    l.stride = r.u64();
    l.pool = r.u64();
    const std::size_t at = r.position();
    l.weight = r.tensor();
    l.bias = r.tensor();
    const std::size_t expected_rank = l.kind == LayerKind::conv2d ? 4 : 2;
    if (l.weight.rank() != expected_rank || l.bias.rank() != 1 || l.bias.dim(0) != l.weight.dim(0)) {
      throw ParseError("checkpoint: layer " + std::to_string(i) + " has inconsistent shapes", at);
    }
    net.layers.push_back(std::move(l));
  }
  if (!r.done()) throw ParseError("checkpoint: trailing bytes", r.position());
  net.partition = extract_groups(net, net.grouping);
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& net) {
  const auto bytes = serialize_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file_bytes(path)); }

}  // namespace sgl0
