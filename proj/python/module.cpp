#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgl0/error.hpp"
#include "sgl0/model.hpp"
#include "sgl0/regularizers.hpp"
#include "sgl0/run.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace sgl0;

namespace {

py::array_t<double> prox_l0_py(py::array_t<double, py::array::c_style | py::array::forcecast> w, double lambda,
                               double beta) {
  py::array_t<double> out(w.request().shape);
  prox_l0_into(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), lambda, beta,
               std::span<double>(out.mutable_data(), static_cast<std::size_t>(out.size())));
  return out;
}

py::dict architecture_counts(const std::string& grouping) {
  const NetworkParams net = build_lenet5_caffe(1, parse_grouping(grouping));
  py::dict d;
  d["parameters"] = net.parameter_count();
  d["weights"] = net.weight_count();
  d["groups"] = net.partition.total_groups();
  d["groups_per_layer"] = net.partition.group_counts();
  return d;
}

// Runs a CLI subcommand, returning (exit code, stdout, stderr).
template <class Args, class F>
py::tuple run_command(F f, const Args& args) {
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = f(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_sgl0, m) {
  m.doc() = "Sparse group l0asso training core";
  m.attr("__version__") = std::string(kVersion);

  // translators run newest first, so the base class goes first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("prox_l0", &prox_l0_py, py::arg("w"), py::arg("lam"), py::arg("beta"),
        "Hard threshold at sqrt(2 lam / beta); ties map to zero.");
  m.def("lenet5_counts", &architecture_counts, py::arg("grouping") = "input");

  m.def(
      "normalize_config", [](const std::string& text) { return serialize_run_config(parse_run_config(text)); },
      py::arg("text"), "Every effective value, defaults included.");
  m.def(
      "config_hash", [](const std::string& text) { return config_hash(parse_run_config(text)); }, py::arg("text"));

  m.def(
      "summarize",
      [](const std::vector<double>& values) {
        const Summary s = summarize(values);
        return py::make_tuple(s.mean, s.std);
      },
      py::arg("values"), "(mean, sample std); std is 0 for a single value.");

  m.def(
      "train",
      [](const fs::path& config, std::optional<std::uint64_t> seed, std::optional<fs::path> out,
         std::optional<unsigned> threads) { return run_command(cmd_train, TrainArgs{config, seed, out, threads}); },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(), py::arg("threads") = py::none(),
      "Same as `sgl0 train`; returns (exit code, stdout, stderr).");
  m.def(
      "evaluate",
      [](const fs::path& checkpoint, std::optional<fs::path> config, double tau_w, double tau_n) {
        return run_command(cmd_eval, EvalArgs{checkpoint, config, tau_w, tau_n, std::nullopt});
      },
      py::arg("checkpoint"), py::arg("config") = py::none(), py::arg("tau_w") = kDefaultWeightThreshold,
      py::arg("tau_n") = kDefaultNeuronThreshold, "Same as `sgl0 eval`; returns (exit code, stdout, stderr).");
  m.def(
      "report",
      [](const std::vector<fs::path>& runs, std::optional<fs::path> csv) {
        return run_command(cmd_report, ReportArgs{runs, csv});
      },
      py::arg("runs"), py::arg("csv") = py::none(), "Same as `sgl0 report`; returns (exit code, stdout, stderr).");
}
