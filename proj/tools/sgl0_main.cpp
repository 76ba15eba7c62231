#include <iostream>

#include <CLI11.hpp>

#include "sgl0/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sparse group l0asso training, evaluation and reporting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sgl0::kVersion));

  sgl0::TrainArgs train;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 1;
  auto* t = app.add_subcommand("train", "Train one run from a config file");
  t->add_option("--config", train.config, "Run config (INI)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = t->add_option("--seed", seed, "Override the config seed");
  auto* out_opt = t->add_option("--out", out, "Override the output directory");
  auto* threads_opt = t->add_option("--threads", threads, "Worker threads (1 = deterministic)")->check(CLI::PositiveNumber);

  sgl0::EvalArgs eval;
  std::string eval_config, eval_out;
  auto* e = app.add_subcommand("eval", "Prune and evaluate a checkpoint");
  e->add_option("--checkpoint", eval.checkpoint, "checkpoint.bin")->required()->check(CLI::ExistingFile);
  auto* eval_config_opt = e->add_option("--config", eval_config, "Config supplying the dataset (default: MNIST test split)");
  e->add_option("--tau-w", eval.tau_w, "Weight threshold")->check(CLI::NonNegativeNumber);
  e->add_option("--tau-n", eval.tau_n, "Neuron threshold")->check(CLI::NonNegativeNumber);
  auto* eval_out_opt = e->add_option("--out", eval_out, "Also write the JSON report here");

  sgl0::ReportArgs report;
  std::string csv;
  auto* r = app.add_subcommand("report", "Aggregate run directories into a table");
  r->add_option("runs", report.run_dirs, "Run directories")->required();
  auto* csv_opt = r->add_option("--csv", csv, "Write the table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? sgl0::kExitOk : sgl0::kExitConfig;
  }

  if (t->parsed()) {
    if (*seed_opt) train.seed = seed;
    if (*out_opt) train.out = out;
    if (*threads_opt) train.threads = threads;
    return sgl0::cmd_train(train, std::cout, std::cerr);
  }
  if (e->parsed()) {
    if (*eval_config_opt) eval.config = eval_config;
    if (*eval_out_opt) eval.out = eval_out;
    return sgl0::cmd_eval(eval, std::cout, std::cerr);
  }
  if (*csv_opt) report.csv = csv;
  return sgl0::cmd_report(report, std::cout, std::cerr);
}
