#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgl0/data.hpp"
#include "sgl0/model.hpp"
#include "sgl0/train.hpp"

namespace sgl0 {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr const char* kDataDirEnv = "SGL0_DATA_DIR";

enum class DataSource { mnist, synthetic };

struct ModelConfig {
  Architecture architecture = Architecture::lenet5_caffe;
  std::vector<std::size_t> mlp_sizes;
  GroupingMode grouping = GroupingMode::input;
};

struct DataConfig {
  DataSource source = DataSource::mnist;
  std::filesystem::path mnist_dir;  // empty: $SGL0_DATA_DIR, then data/mnist
  std::size_t synthetic_classes = 3;
  std::size_t synthetic_dim = 16;
  std::size_t synthetic_train_per_class = 200;
  std::size_t synthetic_test_per_class = 100;
  double synthetic_spread = 0.15;
  std::uint64_t synthetic_seed = 7;
};

struct RunConfig {
  ModelConfig model;
  DataConfig data;
  TrainConfig train;
  std::string precision = "f64";
  std::filesystem::path output_dir = "runs/default";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Sectioned key = value text; unknown sections or keys are rejected.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every effective value, defaults included, in a form parse_run_config reads back.
std::string serialize_run_config(const RunConfig& config);

/// FNV-1a 64 of the serialized config without the output directory.
std::string config_hash(const RunConfig& config);

/// Fills an empty mnist_dir from the environment or the built-in default.
void resolve_data_dir(RunConfig& config);

struct LoadedData {
  Dataset train;
  Dataset test;
};
LoadedData load_data(const RunConfig& config);

NetworkParams build_network(const RunConfig& config);

/// Throws DimensionError when the data cannot be fed to the network.
void check_compatible(const NetworkParams& net, const Dataset& data);

std::string records_csv_header();
std::string records_csv_row(const TrainRecord& r);

struct TrainOutcome {
  TrainResult result;
  Evaluation final_eval;
};

/// Trains per config and writes config.ini, records.csv, timing.csv,
/// outer.csv, report.json and checkpoint.bin into config.output_dir.
TrainOutcome run_training(const RunConfig& config, std::ostream& log);

/// Flat summary: metrics of the pruned network plus provenance.
std::string evaluation_json(const Evaluation& e, const NetworkParams& net);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
Summary summarize(std::span<const double> values);

struct ReportRow {
  std::string method;
  std::size_t runs = 0;
  Summary test_error;
  Summary weight_sparsity;
  Summary neuron_sparsity;
};

struct ReportTable {
  std::vector<ReportRow> rows;
  std::vector<std::string> skipped;  // "dir: reason"
};

ReportTable aggregate_reports(std::span<const std::filesystem::path> run_dirs);
std::string report_csv(const ReportTable& table);
std::string report_text(const ReportTable& table);

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2 };

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<unsigned> threads;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> config;  // supplies the dataset; MNIST test split otherwise
  double tau_w = kDefaultWeightThreshold;
  double tau_n = kDefaultNeuronThreshold;
  std::optional<std::filesystem::path> out;
};

struct ReportArgs {
  std::vector<std::filesystem::path> run_dirs;
  std::optional<std::filesystem::path> csv;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

}  // namespace sgl0
