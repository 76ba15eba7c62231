#include "sgl0/run.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "sgl0/error.hpp"

namespace sgl0 {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("expected a finite number, got '" + t + "'", field);
  }
  return v;
}

std::uint64_t to_unsigned(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("expected a nonnegative integer, got '" + t + "'", field);
  }
  return v;
}

std::vector<std::size_t> to_sizes(const std::string& text, const std::string& field) {
  std::vector<std::size_t> out;
  const std::string t = trim(text);
  if (t.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = t.find(',', start);
    out.push_back(to_unsigned(t.substr(start, comma - start), field));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string_view to_string(DataSource s) { return s == DataSource::mnist ? "mnist" : "synthetic"; }

DataSource parse_source(const std::string& text) {
  if (text == "mnist") return DataSource::mnist;
  if (text == "synthetic") return DataSource::synthetic;
  throw ConfigError("unknown data source '" + text + "' (expected mnist or synthetic)", "data.source");
}

// Re-raises a ConfigError from a lower layer with the config file's section.key name.
template <class F>
void with_field(const std::string& field, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    if (const auto colon = msg.find(": "); colon != std::string::npos && msg.compare(0, colon, e.field()) == 0) {
      msg = msg.substr(colon + 2);
    }
    throw ConfigError(msg, field);
  }
}

const std::map<std::string, std::string>& qualified_fields() {
  static const std::map<std::string, std::string> m = {
      {"kind", "regularizer.kind"},
      {"lambda", "regularizer.lambda"},
      {"beta0", "regularizer.beta0"},
      {"sigma", "regularizer.sigma"},
      {"beta_interval", "regularizer.beta_interval"},
      {"method", "optimizer.method"},
      {"lr", "optimizer.lr"},
      {"lr_decay", "optimizer.lr_decay"},
      {"lr_decay_interval", "optimizer.lr_decay_interval"},
      {"adam_beta1", "optimizer.adam_beta1"},
      {"adam_beta2", "optimizer.adam_beta2"},
      {"adam_epsilon", "optimizer.adam_epsilon"},
      {"epochs", "train.epochs"},
      {"batch_size", "train.batch_size"},
      {"threads", "train.threads"},
      {"probe_size", "train.probe_size"},
      {"inner_solver", "train.inner_solver"},
      {"exact_tolerance", "train.exact_tolerance"},
      {"tau_w", "metrics.tau_w"},
      {"tau_n", "metrics.tau_n"},
  };
  return m;
}

struct KeySpec {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

const std::map<std::string, std::map<std::string, KeySpec>>& key_table() {
  using S = const std::string&;
  static const std::map<std::string, std::map<std::string, KeySpec>> table = {
      {"model",
       {
           {"architecture", {[](RunConfig& c, S v, S f) { with_field(f, [&] { c.model.architecture = parse_architecture(v); }); }}},
           {"mlp_sizes", {[](RunConfig& c, S v, S f) { c.model.mlp_sizes = to_sizes(v, f); }}},
           {"grouping", {[](RunConfig& c, S v, S f) { with_field(f, [&] { c.model.grouping = parse_grouping(v); }); }}},
       }},
      {"data",
       {
           {"source", {[](RunConfig& c, S v, S) { c.data.source = parse_source(v); }}},
           {"mnist_dir", {[](RunConfig& c, S v, S) { c.data.mnist_dir = v; }}},
           {"synthetic_classes", {[](RunConfig& c, S v, S f) { c.data.synthetic_classes = to_unsigned(v, f); }}},
           {"synthetic_dim", {[](RunConfig& c, S v, S f) { c.data.synthetic_dim = to_unsigned(v, f); }}},
           {"synthetic_train_per_class", {[](RunConfig& c, S v, S f) { c.data.synthetic_train_per_class = to_unsigned(v, f); }}},
           {"synthetic_test_per_class", {[](RunConfig& c, S v, S f) { c.data.synthetic_test_per_class = to_unsigned(v, f); }}},
           {"synthetic_spread", {[](RunConfig& c, S v, S f) { c.data.synthetic_spread = to_double(v, f); }}},
           {"synthetic_seed", {[](RunConfig& c, S v, S f) { c.data.synthetic_seed = to_unsigned(v, f); }}},
       }},
      {"regularizer",
       {
           {"kind", {[](RunConfig& c, S v, S f) { with_field(f, [&] { c.train.regularizer.kind = parse_regularizer(v); }); }}},
           {"lambda", {[](RunConfig& c, S v, S f) { c.train.regularizer.lambda = to_double(v, f); }}},
           {"beta0", {[](RunConfig& c, S v, S f) { c.train.beta0 = to_double(v, f); }}},
           {"sigma", {[](RunConfig& c, S v, S f) { c.train.sigma = to_double(v, f); }}},
           {"beta_interval", {[](RunConfig& c, S v, S f) { c.train.beta_interval = to_unsigned(v, f); }}},
       }},
      {"optimizer",
       {
           {"method", {[](RunConfig& c, S v, S f) { with_field(f, [&] { c.train.optimizer.method = parse_optimizer(v); }); }}},
           {"lr", {[](RunConfig& c, S v, S f) { c.train.optimizer.learning_rate = to_double(v, f); }}},
           {"lr_decay", {[](RunConfig& c, S v, S f) { c.train.optimizer.lr_decay = to_double(v, f); }}},
           {"lr_decay_interval", {[](RunConfig& c, S v, S f) { c.train.optimizer.lr_decay_interval = to_unsigned(v, f); }}},
           {"adam_beta1", {[](RunConfig& c, S v, S f) { c.train.optimizer.adam_beta1 = to_double(v, f); }}},
           {"adam_beta2", {[](RunConfig& c, S v, S f) { c.train.optimizer.adam_beta2 = to_double(v, f); }}},
           {"adam_epsilon", {[](RunConfig& c, S v, S f) { c.train.optimizer.adam_epsilon = to_double(v, f); }}},
       }},
      {"train",
       {
           {"epochs", {[](RunConfig& c, S v, S f) { c.train.epochs = to_unsigned(v, f); }}},
           {"batch_size", {[](RunConfig& c, S v, S f) { c.train.batch_size = to_unsigned(v, f); }}},
           {"seed", {[](RunConfig& c, S v, S f) { c.train.seed = to_unsigned(v, f); }}},
           {"threads", {[](RunConfig& c, S v, S f) { c.train.threads = static_cast<unsigned>(to_unsigned(v, f)); }}},
           {"precision", {[](RunConfig& c, S v, S) { c.precision = trim(v); }}},
           {"inner_solver", {[](RunConfig& c, S v, S f) { with_field(f, [&] { c.train.inner_solver = parse_inner_solver(v); }); }}},
           {"exact_tolerance", {[](RunConfig& c, S v, S f) { c.train.exact_tolerance = to_double(v, f); }}},
           {"exact_max_iterations", {[](RunConfig& c, S v, S f) { c.train.exact_max_iterations = to_unsigned(v, f); }}},
           {"probe_size", {[](RunConfig& c, S v, S f) { c.train.probe_size = to_unsigned(v, f); }}},
       }},
      {"metrics",
       {
           {"tau_w", {[](RunConfig& c, S v, S f) { c.train.tau_w = to_double(v, f); }}},
           {"tau_n", {[](RunConfig& c, S v, S f) { c.train.tau_n = to_double(v, f); }}},
       }},
      {"output",
       {
           {"dir", {[](RunConfig& c, S v, S) { c.output_dir = trim(v); }}},
       }},
  };
  return table;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
  if (!f) throw InputError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void save_checkpoint_atomic(const fs::path& path, const NetworkParams& net) {
  const fs::path tmp = path.string() + ".tmp";
  save_checkpoint(tmp, net);
  fs::rename(tmp, path);
}

json report_fields(const Evaluation& e, const NetworkParams& net) {
  json j;
  j["version"] = std::string(kVersion);
  j["architecture"] = std::string(to_string(net.architecture));
  j["grouping"] = std::string(to_string(net.grouping));
  j["test_error"] = e.test_error;
  j["weight_sparsity"] = e.sparsity.weight_sparsity;
  j["neuron_sparsity"] = e.sparsity.neuron_sparsity;
  j["total_params"] = e.sparsity.total_params;
  j["zero_params"] = e.sparsity.zero_params;
  j["total_groups"] = e.sparsity.total_groups;
  j["dead_groups"] = e.sparsity.dead_groups;
  j["tau_w"] = e.sparsity.tau_w;
  j["tau_n"] = e.sparsity.tau_n;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  try {
    train.validate();
  } catch (const ConfigError& e) {
    const auto& q = qualified_fields();
    const auto it = q.find(e.field());
    if (it == q.end()) throw;
    std::string msg = e.what();
    msg = msg.substr(std::min(msg.size(), e.field().size() + 2));
    throw ConfigError(msg, it->second);
  }
  if (precision != "f64") throw ConfigError("only f64 is supported, got '" + precision + "'", "train.precision");
  if (output_dir.empty()) throw ConfigError("must not be empty", "output.dir");
  if (model.architecture == Architecture::mlp) {
    if (model.mlp_sizes.size() < 2) throw ConfigError("an mlp needs at least an input and an output size", "model.mlp_sizes");
    if (std::ranges::find(model.mlp_sizes, std::size_t{0}) != model.mlp_sizes.end()) {
      throw ConfigError("sizes must be positive", "model.mlp_sizes");
    }
  } else if (!model.mlp_sizes.empty()) {
    throw ConfigError("only meaningful for architecture = mlp", "model.mlp_sizes");
  }
  if (data.source == DataSource::synthetic) {
    if (data.synthetic_classes < 2) throw ConfigError("need at least 2 classes", "data.synthetic_classes");
    if (data.synthetic_dim == 0) throw ConfigError("must be positive", "data.synthetic_dim");
    if (data.synthetic_train_per_class == 0) throw ConfigError("must be positive", "data.synthetic_train_per_class");
    if (data.synthetic_test_per_class == 0) throw ConfigError("must be positive", "data.synthetic_test_per_class");
    if (!(data.synthetic_spread > 0.0)) throw ConfigError("must be positive", "data.synthetic_spread");
    if (model.architecture != Architecture::mlp) throw ConfigError("synthetic data needs architecture = mlp", "model.architecture");
    if (model.mlp_sizes.front() != data.synthetic_dim) {
      throw ConfigError("first size must equal data.synthetic_dim (" + std::to_string(data.synthetic_dim) + ")",
                        "model.mlp_sizes");
    }
    if (model.mlp_sizes.back() != data.synthetic_classes) {
      throw ConfigError("last size must equal data.synthetic_classes (" + std::to_string(data.synthetic_classes) + ")",
                        "model.mlp_sizes");
    }
  } else if (model.architecture == Architecture::mlp &&
             (model.mlp_sizes.front() != 784 || model.mlp_sizes.back() != 10)) {
    throw ConfigError("an mnist mlp must map 784 inputs to 10 outputs", "model.mlp_sizes");
  }
}

RunConfig parse_run_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message(), "");
  }
  RunConfig c;
  const auto& table = key_table();
  for (const auto& [section, body] : tree) {
    const auto sec = table.find(section);
    if (sec == table.end()) {
      if (body.empty()) throw ConfigError("key outside any section", section);
      throw ConfigError("unknown section", section);
    }
    for (const auto& [key, node] : body) {
      const std::string field = section + "." + key;
      const auto k = sec->second.find(key);
      if (k == sec->second.end()) throw ConfigError("unknown key", field);
      k->second.set(c, node.data(), field);
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what(), "");
  }
  return parse_run_config(text);
}

std::string serialize_run_config(const RunConfig& c) {
  const auto& t = c.train;
  std::ostringstream o;
  o << "[model]\n"
    << "architecture = " << to_string(c.model.architecture) << "\n"
    << "mlp_sizes = " << join_sizes(c.model.mlp_sizes) << "\n"
    << "grouping = " << to_string(c.model.grouping) << "\n\n"
    << "[data]\n"
    << "source = " << to_string(c.data.source) << "\n"
    << "mnist_dir = " << c.data.mnist_dir.string() << "\n"
    << "synthetic_classes = " << c.data.synthetic_classes << "\n"
    << "synthetic_dim = " << c.data.synthetic_dim << "\n"
    << "synthetic_train_per_class = " << c.data.synthetic_train_per_class << "\n"
    << "synthetic_test_per_class = " << c.data.synthetic_test_per_class << "\n"
    << "synthetic_spread = " << fmt(c.data.synthetic_spread) << "\n"
    << "synthetic_seed = " << c.data.synthetic_seed << "\n\n"
    << "[regularizer]\n"
    << "kind = " << to_string(t.regularizer.kind) << "\n"
    << "lambda = " << fmt(t.regularizer.lambda) << "\n"
    << "beta0 = " << fmt(t.beta0) << "\n"
    << "sigma = " << fmt(t.sigma) << "\n"
    << "beta_interval = " << t.beta_interval << "\n\n"
    << "[optimizer]\n"
    << "method = " << to_string(t.optimizer.method) << "\n"
    << "lr = " << fmt(t.optimizer.learning_rate) << "\n"
    << "lr_decay = " << fmt(t.optimizer.lr_decay) << "\n"
    << "lr_decay_interval = " << t.optimizer.lr_decay_interval << "\n"
    << "adam_beta1 = " << fmt(t.optimizer.adam_beta1) << "\n"
    << "adam_beta2 = " << fmt(t.optimizer.adam_beta2) << "\n"
    << "adam_epsilon = " << fmt(t.optimizer.adam_epsilon) << "\n\n"
    << "[train]\n"
    << "epochs = " << t.epochs << "\n"
    << "batch_size = " << t.batch_size << "\n"
    << "seed = " << t.seed << "\n"
    << "threads = " << t.threads << "\n"
    << "precision = " << c.precision << "\n"
    << "inner_solver = " << to_string(t.inner_solver) << "\n"
    << "exact_tolerance = " << fmt(t.exact_tolerance) << "\n"
    << "exact_max_iterations = " << t.exact_max_iterations << "\n"
    << "probe_size = " << t.probe_size << "\n\n"
    << "[metrics]\n"
    << "tau_w = " << fmt(t.tau_w) << "\n"
    << "tau_n = " << fmt(t.tau_n) << "\n\n"
    << "[output]\n"
    << "dir = " << c.output_dir.string() << "\n";
  return o.str();
}

std::string config_hash(const RunConfig& config) {
  RunConfig copy = config;
  copy.output_dir = "-";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize_run_config(copy))));
  return buf;
}

void resolve_data_dir(RunConfig& config) {
  if (!config.data.mnist_dir.empty()) return;
  const char* env = std::getenv(kDataDirEnv);
  config.data.mnist_dir = (env && *env) ? fs::path(env) : fs::path("data/mnist");
}

LoadedData load_data(const RunConfig& config) {
  const auto& d = config.data;
  if (d.source == DataSource::synthetic) {
    return {make_synthetic(d.synthetic_classes, d.synthetic_dim, d.synthetic_train_per_class, d.synthetic_seed,
                           d.synthetic_spread, Split::train),
            make_synthetic(d.synthetic_classes, d.synthetic_dim, d.synthetic_test_per_class, d.synthetic_seed,
                           d.synthetic_spread, Split::test)};
  }
  return {load_mnist_dir(d.mnist_dir, Split::train), load_mnist_dir(d.mnist_dir, Split::test)};
}

NetworkParams build_network(const RunConfig& config) {
  if (config.model.architecture == Architecture::lenet5_caffe) {
    return build_lenet5_caffe(config.train.seed, config.model.grouping);
  }
  return build_mlp(config.model.mlp_sizes, config.train.seed, config.model.grouping);
}

void check_compatible(const NetworkParams& net, const Dataset& data) {
  if (data.size() == 0) throw InputError("dataset is empty");
  if (net.layers.empty()) throw DimensionError("network has no layers");
  const Shape& s = data.images.shape();
  const std::size_t features = data.images.size() / data.size();
  const auto& first = net.layers.front();
  if (first.kind == LayerKind::conv2d) {
    if (s.size() != 4 || s[1] != first.weight.dim(1)) {
      throw DimensionError("network expects images with " + std::to_string(first.weight.dim(1)) +
                           " channels, data has shape " + shape_string(s));
    }
    if (net.architecture == Architecture::lenet5_caffe && (s[2] != 28 || s[3] != 28)) {
      throw DimensionError("lenet5-caffe expects 28x28 images, data has shape " + shape_string(s));
    }
  } else if (first.weight.dim(1) != features) {
    throw DimensionError("network expects " + std::to_string(first.weight.dim(1)) + " inputs, data has " +
                         std::to_string(features));
  }
  const std::size_t outputs = net.layers.back().weight.dim(0);
  if (data.is_regression()) {
    if (data.targets.size() / data.size() != outputs) {
      throw DimensionError("network has " + std::to_string(outputs) + " outputs, targets have shape " +
                           shape_string(data.targets.shape()));
    }
  } else if (data.num_classes > outputs) {
    throw DimensionError("network has " + std::to_string(outputs) + " outputs for " +
                         std::to_string(data.num_classes) + " classes");
  }
}

std::string records_csv_header() {
  return "epoch,train_loss,f_beta,test_error,weight_sparsity,neuron_sparsity,beta,learning_rate\n";
}

std::string records_csv_row(const TrainRecord& r) {
  return std::to_string(r.epoch) + "," + fmt(r.train_loss) + "," + fmt(r.f_beta) + "," + fmt(r.test_error) + "," +
         fmt(r.weight_sparsity) + "," + fmt(r.neuron_sparsity) + "," + fmt(r.beta) + "," + fmt(r.learning_rate) + "\n";
}

TrainOutcome run_training(const RunConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  write_text(dir / "config.ini", serialize_run_config(config));

  const LoadedData data = load_data(config);
  NetworkParams net = build_network(config);
  check_compatible(net, data.train);
  check_compatible(net, data.test);

  std::ofstream records(dir / "records.csv", std::ios::binary | std::ios::trunc);
  std::ofstream timing(dir / "timing.csv", std::ios::binary | std::ios::trunc);
  if (!records || !timing) throw InputError("cannot write into " + dir.string());
  records << records_csv_header() << std::flush;
  timing << "epoch,wall_time\n" << std::flush;

  const fs::path ckpt = dir / "checkpoint.bin";
  save_checkpoint_atomic(ckpt, net);
  const auto observer = [&](const TrainRecord& r, const NetworkParams& current) {
    records << records_csv_row(r) << std::flush;
    timing << r.epoch << "," << fmt(r.wall_time) << "\n" << std::flush;
    save_checkpoint_atomic(ckpt, current);
    char line[256];
    std::snprintf(line, sizeof line,
                  "epoch %3zu  loss %.5f  F %.5f  err %.2f%%  wsp %.2f%%  nsp %.2f%%  beta %.3g  lr %.3g  %.1fs\n",
                  r.epoch, r.train_loss, r.f_beta, r.test_error, r.weight_sparsity, r.neuron_sparsity, r.beta,
                  r.learning_rate, r.wall_time);
    log << line << std::flush;
  };

  TrainOutcome out;
  out.result = train(std::move(net), data.train, &data.test, config.train, observer);

  std::ostringstream outer;
  outer << "outer_iteration,epoch,beta,gap_squared,gap_max,f_beta\n";
  for (const auto& b : out.result.boundaries) {
    outer << b.outer_iteration << "," << b.epoch << "," << fmt(b.beta) << "," << fmt(b.gap_squared) << ","
          << fmt(b.gap_max) << "," << fmt(b.f_beta) << "\n";
  }
  write_text(dir / "outer.csv", outer.str());

  out.final_eval = evaluate(out.result.net, data.test, config.train.tau_w, config.train.tau_n);
  json j = report_fields(out.final_eval, out.result.net);
  const TrainRecord& last = out.result.records.back();
  j["method"] = std::string(to_string(config.train.regularizer.kind));
  j["config_hash"] = config_hash(config);
  j["seed"] = config.train.seed;
  j["epochs"] = config.train.epochs;
  j["final_train_loss"] = last.train_loss;
  j["final_f_beta"] = last.f_beta;
  j["final_beta"] = out.result.final_beta;
  j["final_learning_rate"] = out.result.final_learning_rate;
  j["wall_time"] = last.wall_time;
  write_text(dir / "report.json", j.dump(2) + "\n");
  return out;
}

std::string evaluation_json(const Evaluation& e, const NetworkParams& net) { return report_fields(e, net).dump(2); }

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  // shifted by the first value so identical runs give exactly that value and std 0
  const double shift = values.front();
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  const double centered = sum / n;
  s.mean = shift + centered;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - shift - centered) * (v - shift - centered);
    s.std = std::sqrt(ss / (n - 1));
  }
  return s;
}

ReportTable aggregate_reports(std::span<const fs::path> run_dirs) {
  struct Acc {
    std::vector<double> err, wsp, nsp;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  ReportTable table;
  for (const auto& dir : run_dirs) {
    const fs::path file = dir / "report.json";
    if (!fs::is_regular_file(file)) {
      table.skipped.push_back(dir.string() + ": missing report.json");
      continue;
    }
    json j;
    try {
      j = json::parse(read_text(file));
    } catch (const std::exception& e) {
      table.skipped.push_back(dir.string() + ": unreadable report.json (" + e.what() + ")");
      continue;
    }
    const bool ok = j.is_object() && j.contains("method") && j["method"].is_string() && j.contains("version") &&
                    j["version"].is_string() && j.contains("test_error") && j["test_error"].is_number() &&
                    j.contains("weight_sparsity") && j["weight_sparsity"].is_number() &&
                    j.contains("neuron_sparsity") && j["neuron_sparsity"].is_number();
    if (!ok) {
      table.skipped.push_back(dir.string() + ": report.json lacks required fields");
      continue;
    }
    if (j["version"].get<std::string>() != kVersion) {
      table.skipped.push_back(dir.string() + ": report version " + j["version"].get<std::string>() +
                              " is incompatible with " + std::string(kVersion));
      continue;
    }
    const std::string method = j["method"].get<std::string>();
    if (!acc.contains(method)) order.push_back(method);
    Acc& a = acc[method];
    a.err.push_back(j["test_error"].get<double>());
    a.wsp.push_back(j["weight_sparsity"].get<double>());
    a.nsp.push_back(j["neuron_sparsity"].get<double>());
  }
  for (const auto& m : order) {
    const Acc& a = acc[m];
    table.rows.push_back({m, a.err.size(), summarize(a.err), summarize(a.wsp), summarize(a.nsp)});
  }
  return table;
}

std::string report_csv(const ReportTable& table) {
  std::string s =
      "method,runs,test_error_mean,test_error_std,weight_sparsity_mean,weight_sparsity_std,neuron_sparsity_mean,"
      "neuron_sparsity_std\n";
  for (const auto& r : table.rows) {
    s += r.method + "," + std::to_string(r.runs) + "," + fmt(r.test_error.mean) + "," + fmt(r.test_error.std) + "," +
         fmt(r.weight_sparsity.mean) + "," + fmt(r.weight_sparsity.std) + "," + fmt(r.neuron_sparsity.mean) + "," +
         fmt(r.neuron_sparsity.std) + "\n";
  }
  return s;
}

std::string report_text(const ReportTable& table) {
  std::string s;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %4s  %-22s %-22s %-22s\n", "method", "runs", "test error % [std]",
                "weight sparsity % [std]", "neuron sparsity % [std]");
  s += line;
  for (const auto& r : table.rows) {
    char a[32], b[32], c[32];
    std::snprintf(a, sizeof a, "%.4f [%.4f]", r.test_error.mean, r.test_error.std);
    std::snprintf(b, sizeof b, "%.2f [%.2f]", r.weight_sparsity.mean, r.weight_sparsity.std);
    std::snprintf(c, sizeof c, "%.2f [%.2f]", r.neuron_sparsity.mean, r.neuron_sparsity.std);
    std::snprintf(line, sizeof line, "%-8s %4zu  %-22s %-22s %-22s\n", r.method.c_str(), r.runs, a, b, c);
    s += line;
  }
  return s;
}

namespace {

void print_config_error(std::ostream& err, const ConfigError& e) {
  err << "config error: " << e.what() << "\n";
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = load_run_config(args.config);
    if (args.seed) config.train.seed = *args.seed;
    if (args.out) config.output_dir = *args.out;
    if (args.threads) config.train.threads = *args.threads;
    resolve_data_dir(config);
    config.validate();
  } catch (const ConfigError& e) {
    print_config_error(err, e);
    return kExitConfig;
  }
  try {
    const TrainOutcome o = run_training(config, out);
    out << "done: " << config.output_dir.string() << "\n";
    (void)o;
    return kExitOk;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\nlast good checkpoint kept in " << config.output_dir.string() << "\n";
    return kExitRuntime;
  } catch (const ConfigError& e) {
    print_config_error(err, e);
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    if (args.config) config = load_run_config(*args.config);
    resolve_data_dir(config);
    if (!(args.tau_w >= 0.0)) throw ConfigError("must be nonnegative", "tau_w");
    if (!(args.tau_n >= 0.0)) throw ConfigError("must be nonnegative", "tau_n");
  } catch (const ConfigError& e) {
    print_config_error(err, e);
    return kExitConfig;
  }
  try {
    const NetworkParams net = load_checkpoint(args.checkpoint);
    const Dataset test = load_data(config).test;
    check_compatible(net, test);
    const Evaluation e = evaluate(net, test, args.tau_w, args.tau_n);
    const std::string text = evaluation_json(e, net) + "\n";
    out << text;
    if (args.out) write_text(*args.out, text);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  if (args.run_dirs.empty()) {
    err << "report: no run directories given\n";
    return kExitConfig;
  }
  const ReportTable table = aggregate_reports(args.run_dirs);
  for (const auto& s : table.skipped) err << "warning: skipped " << s << "\n";
  if (table.rows.empty()) {
    err << "report: every run directory was skipped\n";
    return kExitRuntime;
  }
  out << report_text(table);
  try {
    if (args.csv) write_text(*args.csv, report_csv(table));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace sgl0
