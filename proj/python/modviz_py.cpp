#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "modviz/cli/commands.hpp"
#include "modviz/common/runtime.hpp"
#include "modviz/explain/gradcam.hpp"
#include "modviz/explain/mask.hpp"
#include "modviz/models/checkpoint.hpp"
#include "modviz/models/models.hpp"
#include "modviz/signal/dataset.hpp"
#include "modviz/signal/dataset_io.hpp"
#include "modviz/signal/modulation.hpp"
#include "modviz/train/metrics.hpp"
#include "modviz/train/trainer.hpp"
#include "modviz/viz/render.hpp"

namespace py = pybind11;
using namespace modviz;

namespace {

using CArray = py::array_t<std::complex<float>, py::array::c_style | py::array::forcecast>;
using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const DArray& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

DArray to_array(const std::vector<double>& v) {
  DArray a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<std::complex<float>> to_iq(const CArray& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a 1-d complex array");
  return {a.data(), a.data() + a.size()};
}

const signal::RadioSample& sample_at(const signal::Dataset& ds, std::size_t index) {
  if (index >= ds.samples.size())
    throw InvalidArgument("index " + std::to_string(index) + " out of range for " +
                          std::to_string(ds.samples.size()) + " samples");
  return ds.samples[index];
}

py::dict dataset_arrays(const signal::Dataset& ds) {
  const auto n = static_cast<py::ssize_t>(ds.samples.size()), len = static_cast<py::ssize_t>(ds.n_x());
  py::array_t<std::complex<float>> iq({n, len});
  py::array_t<int> labels(n), snr(n), split(n);
  auto iqm = iq.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    for (py::ssize_t j = 0; j < len; ++j) iqm(i, j) = s.iq[static_cast<std::size_t>(j)];
    labels.mutable_at(i) = s.label;
    snr.mutable_at(i) = s.snr_db;
    split.mutable_at(i) = static_cast<int>(s.split);
  }
  py::dict d;
  d["iq"] = iq;
  d["label"] = labels;
  d["snr_db"] = snr;
  d["split"] = split;
  d["label_names"] = ds.label_names;
  return d;
}

signal::Dataset generate(const std::vector<std::string>& schemes, int count, int snr_min, int snr_max, int snr_step,
                         std::size_t n_x, std::uint64_t seed) {
  signal::GenerationConfig cfg;
  for (const auto& s : schemes) cfg.schemes.push_back(signal::scheme_by_name(s).id);
  cfg.count_per_cell = count;
  cfg.snr_min = snr_min;
  cfg.snr_max = snr_max;
  cfg.snr_step = snr_step;
  cfg.n_x = n_x;
  return signal::generate_dataset(cfg, seed);
}

py::dict train_model(const std::string& model, const std::string& data, const std::string& out,
                     const std::string& format, std::size_t epochs, std::size_t batch, double lr, std::uint64_t seed,
                     std::size_t patience, double clip_norm, const std::map<std::string, std::string>& overrides) {
  const auto ds = signal::read_dataset(data);
  const auto arch = models::parse_arch(model);
  auto fmt = arch == models::Arch::Lstm ? models::InputFormat::AP : models::InputFormat::IQ;
  if (!format.empty()) fmt = models::parse_format(format);
  auto kv = models::build_model(arch, ds.n_x(), ds.label_names.size(), fmt).to_kv();
  for (const auto& [k, v] : overrides) kv.set(k, v);
  const auto spec = models::ModelSpec::from_kv(kv);

  train::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.lr = lr;
  cfg.seed = seed;
  cfg.patience = patience;
  cfg.clip_norm = clip_norm;
  auto res = [&] {
    py::gil_scoped_release release;
    return train::train(spec, ds, cfg);
  }();
  models::write_checkpoint(res.snapshot, out);

  py::list epochs_out;
  for (const auto& e : res.history.epochs) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["train_loss"] = e.train_loss;
    row["val_accuracy"] = e.val_accuracy;
    epochs_out.append(row);
  }
  py::dict d;
  d["epochs"] = epochs_out;
  d["best_epoch"] = res.history.best_epoch;
  d["best_val_accuracy"] = res.history.best_val_accuracy;
  d["stopped_early"] = res.history.stopped_early;
  return d;
}

py::dict evaluate(const std::string& model_file, const std::string& data, const std::string& split) {
  const auto snap = models::read_checkpoint(model_file);
  const auto ds = signal::read_dataset(data);
  const auto model = models::instantiate<float>(snap);
  const auto r = train::evaluate(ds, signal::parse_split(split), train::model_predictor(*model), snap.spec.n_y);
  const auto cm = r.confusion.row_normalized();
  py::array_t<double> m({static_cast<py::ssize_t>(cm.n), static_cast<py::ssize_t>(cm.n)});
  std::copy(cm.v.begin(), cm.v.end(), m.mutable_data());
  py::dict per_snr;
  for (const auto& [snr, cell] : r.per_snr) per_snr[py::int_(snr)] = cell.accuracy();
  py::dict d;
  d["accuracy"] = r.accuracy;
  d["count"] = r.count;
  d["confusion"] = m;
  d["per_snr"] = per_snr;
  return d;
}

py::dict cav_dict(const explain::ClassActivationVector& cav) {
  py::dict d;
  d["w"] = to_array(cav.w);
  d["target_class"] = cav.target_class;
  d["method"] = cav.method;
  d["pre_resize_length"] = cav.pre_resize_length;
  return d;
}

py::dict gradcam(const std::string& model_file, const std::string& data, std::size_t index, double score_scale) {
  const auto snap = models::read_checkpoint(model_file);
  const auto ds = signal::read_dataset(data);
  const auto model = models::instantiate<double>(snap);
  explain::GradcamOptions opt;
  opt.score_scale = score_scale;
  const auto r = explain::explain_gradcam(*model, sample_at(ds, index), opt);
  auto d = cav_dict(r.cav);
  d["alphas"] = to_array(r.alphas);
  return d;
}

py::dict mask(const std::string& model_file, const std::string& data, std::size_t index, std::size_t iterations,
              double lambda1, double lambda2, double xi, double p) {
  const auto snap = models::read_checkpoint(model_file);
  const auto ds = signal::read_dataset(data);
  const auto model = models::instantiate<float>(snap);
  explain::MaskConfig cfg;
  cfg.iterations = iterations;
  cfg.lambda1 = lambda1;
  cfg.lambda2 = lambda2;
  cfg.xi = xi;
  cfg.p = p;
  cfg.validate();
  const auto input = models::make_input<float>(sample_at(ds, index), snap.spec.input_format);
  auto r = [&] {
    py::gil_scoped_release release;
    return explain::optimize_mask<float>(*model, input, cfg).front();
  }();
  auto d = cav_dict(r.cav);
  std::vector<double> objective, prob;
  for (const auto& e : r.trace.entries) {
    objective.push_back(e.terms.objective);
    prob.push_back(e.terms.prob);
  }
  d["objective"] = to_array(objective);
  d["prob"] = to_array(prob);
  d["best_iteration"] = r.trace.best;
  d["unmasked_prob"] = r.unmasked_prob;
  return d;
}

std::string constellation_svg(const CArray& iq, const DArray& w, double eta, const std::string& axis,
                              const std::string& title) {
  viz::RenderSpec spec;
  spec.eta_w = eta;
  spec.title = title;
  if (axis == "ap" || axis == "polar") spec.axis = viz::AxisMode::Polar;
  else if (axis != "iq" && axis != "cartesian") throw InvalidArgument("axis must be iq or ap, got '" + axis + "'");
  return viz::constellation_svg(to_iq(iq), to_vector(w), spec);
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::main_entry(args, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_modviz, m) {
  m.doc() = "Modulation classifiers with Grad-CAM and mask explanations.";
  tune_allocator();

  // Most recently registered translators are tried first, so the base goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<cli::MismatchError>(m, "MismatchError", PyExc_ValueError);
  py::register_exception<NoTapPoint>(m, "NoTapPoint", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  m.def("label_names", &signal::label_names);

  m.def(
      "generate",
      [](const std::string& out, const std::vector<std::string>& schemes, int count, int snr_min, int snr_max,
         int snr_step, std::size_t n_x, std::uint64_t seed) {
        signal::write_dataset(generate(schemes, count, snr_min, snr_max, snr_step, n_x, seed), out);
      },
      py::arg("out"), py::arg("schemes") = std::vector<std::string>{}, py::arg("count") = 1000,
      py::arg("snr_min") = 0, py::arg("snr_max") = 18, py::arg("snr_step") = 2, py::arg("n_x") = 128,
      py::arg("seed") = 0, "Generate a dataset and write it to `out`.");

  m.def(
      "load_dataset", [](const std::string& path) { return dataset_arrays(signal::read_dataset(path)); },
      py::arg("path"), "Dataset as numpy arrays: iq [N, n_x], label, snr_db, split (0 train, 1 val, 2 test).");

  m.def(
      "amplitude_phase",
      [](const CArray& iq) {
        const auto pts = to_iq(iq);
        std::vector<double> a, ph;
        for (const auto& x : pts) {
          const auto r = signal::to_amplitude_phase(signal::Complex(x.real(), x.imag()));
          a.push_back(r.amplitude);
          ph.push_back(r.phase);
        }
        return py::make_tuple(to_array(a), to_array(ph));
      },
      py::arg("iq"));

  m.def("parameter_count",
        [](const std::string& model, std::size_t n_x, std::size_t n_y, const std::string& format) {
          return models::parameter_count(
              models::build_model(models::parse_arch(model), n_x, n_y, models::parse_format(format)));
        },
        py::arg("model"), py::arg("n_x") = 128, py::arg("n_y") = 11, py::arg("format") = "iq");

  m.def("train", &train_model, py::arg("model"), py::arg("data"), py::arg("out"), py::arg("format") = "",
        py::arg("epochs") = 150, py::arg("batch") = 128, py::arg("lr") = 1e-3, py::arg("seed") = 0,
        py::arg("patience") = 0, py::arg("clip_norm") = 0.0,
        py::arg("overrides") = std::map<std::string, std::string>{},
        "Train a classifier on a dataset file and write the best-validation checkpoint.");

  m.def("evaluate", &evaluate, py::arg("model_file"), py::arg("data"), py::arg("split") = "test");

  m.def("gradcam", &gradcam, py::arg("model_file"), py::arg("data"), py::arg("index"), py::arg("score_scale") = 1.0);

  m.def("mask", &mask, py::arg("model_file"), py::arg("data"), py::arg("index"), py::arg("iterations") = 500,
        py::arg("lambda1") = 1e-4, py::arg("lambda2") = 1e-3, py::arg("xi") = 0.01, py::arg("p") = 3.0);

  m.def(
      "resize_bilinear", [](const DArray& v, std::size_t n) { return to_array(explain::resize_bilinear(to_vector(v), n)); },
      py::arg("v"), py::arg("n"));
  m.def(
      "normalize_unit", [](const DArray& v) { return to_array(explain::normalize_unit(to_vector(v))); }, py::arg("v"));
  m.def(
      "connect_segments", [](const DArray& w, double eta) { return viz::connect_segments(to_vector(w), eta); },
      py::arg("w"), py::arg("eta"));
  m.def("constellation_svg", &constellation_svg, py::arg("iq"), py::arg("w"), py::arg("eta") = 0.4,
        py::arg("axis") = "iq", py::arg("title") = "");

  m.def("cli", &run_cli, py::arg("args"), "Run the command-line tool in-process; returns (code, stdout, stderr).");
}
