#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "stgcgrn/app/commands.hpp"
#include "stgcgrn/errors.hpp"
#include "stgcgrn/gradcheck_suite.hpp"
#include "stgcgrn/graph.hpp"
#include "stgcgrn/tensor_io.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace stgcgrn;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

app::Overrides overrides_from(const py::kwargs& kw) {
  app::Overrides o;
  for (const auto& [key_obj, value] : kw) {
    const auto key = py::cast<std::string>(key_obj);
    if (key == "ablation")
      o.ablation = py::cast<std::string>(value);
    else if (key == "order")
      o.order = py::cast<std::string>(value);
    else if (key == "seeds")
      o.seeds = py::cast<std::vector<std::uint64_t>>(value);
    else if (key == "jobs")
      o.jobs = py::cast<std::size_t>(value);
    else if (key == "max_epochs")
      o.max_epochs = py::cast<std::size_t>(value);
    else if (key == "max_steps")
      o.max_steps = py::cast<std::size_t>(value);
    else if (key == "patience")
      o.patience = py::cast<std::size_t>(value);
    else if (key == "batch_size")
      o.batch_size = py::cast<std::size_t>(value);
    else if (key == "n_head")
      o.n_head = py::cast<std::size_t>(value);
    else if (key == "d_h")
      o.d_h = py::cast<std::size_t>(value);
    else if (key == "learning_rate")
      o.learning_rate = py::cast<double>(value);
    else
      throw ConfigError("unknown override: " + key);
  }
  return o;
}

// key=value report lines as a dict of strings.
py::dict parse_report(const std::string& text) {
  py::dict out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[py::str(line.substr(0, eq))] = line.substr(eq + 1);
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

PYBIND11_MODULE(stgcgrn, m) {
  m.doc() = "Spatio-temporal graph forecasting with periodic attention and double graph convolution";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  m.def(
      "generate_synthetic",
      [](std::size_t nodes, std::size_t days, std::size_t samples_per_day, double shift_max, double noise,
         double weekly_amp, std::uint64_t seed) {
        data::SynthOptions o{nodes, days, samples_per_day, shift_max, noise, weekly_amp, seed};
        auto r = data::synth_generate(o);
        py::list edges;
        for (const auto& e : r.graph.edges) edges.append(py::make_tuple(e.from, e.to, e.dist));
        py::dict out;
        out["series"] = to_numpy(r.series.data);
        out["edges"] = edges;
        out["shifts"] = r.shifts;
        return out;
      },
      py::arg("nodes") = 8, py::arg("days") = 28, py::arg("samples_per_day") = 48, py::arg("shift_max") = 0.0,
      py::arg("noise") = 0.0, py::arg("weekly_amp") = 0.0, py::arg("seed") = 1,
      "Synthetic periodic series [T x N x 1] on a ring graph.");

  m.def(
      "predefined_adjacency",
      [](std::size_t n_nodes, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges, double kappa,
         std::optional<double> sigma, bool normalize) {
        graph::GraphSpec g;
        g.n_nodes = n_nodes;
        g.kappa = kappa;
        g.sigma = sigma;
        for (const auto& [i, j, d] : edges) g.edges.push_back({i, j, d});
        auto a = graph::build_predefined(g);
        return to_numpy(normalize ? graph::row_normalize(a).matrix : a);
      },
      py::arg("n_nodes"), py::arg("edges"), py::arg("kappa") = std::numeric_limits<double>::infinity(),
      py::arg("sigma") = py::none(), py::arg("normalize") = true,
      "Thresholded Gaussian kernel adjacency, row-normalized by default.");

  m.def(
      "gradcheck",
      [](const std::string& fault, std::uint64_t seed, std::size_t probes) {
        const auto f = fault == "tanh"     ? debug::Fault::negate_tanh_backward
                       : fault == "matmul" ? debug::Fault::negate_matmul_backward
                       : fault == "none"   ? debug::Fault::none
                                           : throw ConfigError("fault must be none, tanh or matmul");
        debug::set_fault(f);
        struct Reset {
          ~Reset() { debug::set_fault(debug::Fault::none); }
        } reset;
        auto results = checks::primitive_suite(seed, 1e-6);
        checks::ToyOptions toy;
        toy.seed = seed;
        toy.probes = probes;
        results.push_back(checks::model_check(toy));
        py::list out;
        for (const auto& c : results) {
          py::dict row;
          row["name"] = c.name;
          row["max_rel_error"] = c.report.max_rel_error;
          row["max_abs_error"] = c.report.max_abs_error;
          row["checked"] = c.report.checked;
          row["passed"] = c.report.passed;
          out.append(row);
        }
        return out;
      },
      py::arg("fault") = "none", py::arg("seed") = 1, py::arg("probes") = 32,
      "Finite-difference checks over every primitive and the toy model.");

  m.def(
      "train",
      [](const fs::path& config, const fs::path& out_dir, const py::kwargs& kw) {
        app::RunOptions opts{config, out_dir, overrides_from(kw)};
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          app::cmd_train(opts, log);
        }
        return parse_report(read_file(out_dir / "metrics.txt"));
      },
      py::arg("config"), py::arg("out_dir") = "run",
      "Trains every configured seed; returns the aggregated metric report. Keyword overrides match the CLI.");

  m.def(
      "evaluate",
      [](const fs::path& config, const fs::path& checkpoint, const py::kwargs& kw) {
        app::EvalOptions opts{config, checkpoint, std::nullopt, overrides_from(kw)};
        std::ostringstream log;
        std::string report;
        {
          py::gil_scoped_release release;
          report = app::cmd_eval(opts, log);
        }
        return parse_report(report);
      },
      py::arg("config"), py::arg("checkpoint"), "Test-split metrics for a saved checkpoint.");

  m.def(
      "run_experiment",
      [](const std::string& kind, const fs::path& config, const fs::path& out_dir, const py::kwargs& kw) {
        app::RunOptions opts{config, out_dir, overrides_from(kw)};
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          app::cmd_experiment(kind, opts, log);
        }
        return read_file(out_dir / "table.csv");
      },
      py::arg("kind"), py::arg("config"), py::arg("out_dir") = "experiment",
      "Runs the ablation, multihead or order grid; returns the comparison table as CSV text.");

  m.def(
      "load_tensor", [](const fs::path& path) { return to_numpy(io::load_tensor(path)); }, py::arg("path"));
  m.def(
      "save_tensor",
      [](const fs::path& path, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
        io::save_tensor(path, from_numpy(a));
      },
      py::arg("path"), py::arg("array"));
}
