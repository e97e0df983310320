// Python bindings over the core: synthetic generation, the epoch container,
// preprocessing, training/evaluation, gradient checks and connectivity export.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mieeg/commands.hpp"
#include "mieeg/gradcheck_registry.hpp"
#include "mieeg/model_io.hpp"

namespace py = pybind11;
using namespace mieeg;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

EpochSet epochs_from_arrays(const FloatArray& data, const IntArray& labels, float fs, int n_classes) {
  if (data.ndim() != 3) throw std::invalid_argument("data must be [trials, channels, samples]");
  if (labels.ndim() != 1 || labels.shape(0) != data.shape(0))
    throw std::invalid_argument("labels must be one per trial");
  EpochSet e;
  e.n_trials = static_cast<int>(data.shape(0));
  e.n_channels = static_cast<int>(data.shape(1));
  e.n_samples = static_cast<int>(data.shape(2));
  e.n_classes = n_classes;
  e.fs = fs;
  e.channel_names = default_channel_names(e.n_channels);
  e.data.assign(data.data(), data.data() + data.size());
  e.labels.assign(labels.data(), labels.data() + labels.shape(0));
  for (int l : e.labels)
    if (l < 0 || l >= n_classes)
      throw std::invalid_argument("label " + std::to_string(l) + " outside 0.." +
                                  std::to_string(n_classes - 1));
  return e;
}

py::tuple epochs_to_arrays(const EpochSet& e) {
  FloatArray data({e.n_trials, e.n_channels, e.n_samples});
  std::copy(e.data.begin(), e.data.end(), data.mutable_data());
  IntArray labels(static_cast<py::ssize_t>(e.labels.size()));
  std::copy(e.labels.begin(), e.labels.end(), labels.mutable_data());
  return py::make_tuple(data, labels, e.fs, e.n_classes);
}

RunConfig config_from_text(const std::string& text) {
  if (text.empty()) return RunConfig{};
  std::istringstream is(text);
  return RunConfig::parse(is, "<config>");
}

DoubleArray square_matrix(const std::vector<double>& values, int n) {
  DoubleArray out({n, n});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

std::vector<double> matrix_from(const DoubleArray& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw std::invalid_argument("expected a square matrix");
  return std::vector<double>(a.data(), a.data() + a.size());
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["kappa"] = m.kappa;
  d["macro_f1"] = m.macro_f1;
  d["macro_auc"] = m.macro_auc;
  d["confusion"] = m.confusion;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mieeg, m) {
  m.doc() = "motor-imagery EEG graph classifier core";

  m.def(
      "generate_epochs",
      [](const std::string& config_text) {
        auto cfg = config_from_text(config_text);
        return epochs_to_arrays(generate_synthetic(cfg.synth));
      },
      py::arg("config_text") = "",
      "Synthesize epochs; returns (data [T,C,S], labels, fs, n_classes).");

  m.def(
      "write_epochs",
      [](const std::string& path, const FloatArray& data, const IntArray& labels, float fs,
         int n_classes) { write_epochs(path, epochs_from_arrays(data, labels, fs, n_classes)); },
      py::arg("path"), py::arg("data"), py::arg("labels"), py::arg("fs"), py::arg("n_classes"));

  m.def(
      "read_epochs", [](const std::string& path) { return epochs_to_arrays(read_epochs(path)); },
      py::arg("path"));

  m.def(
      "common_average_reference",
      [](const FloatArray& data, const IntArray& labels, float fs, int n_classes) {
        auto e = common_average_reference(epochs_from_arrays(data, labels, fs, n_classes));
        FloatArray out({e.n_trials, e.n_channels, e.n_samples});
        std::copy(e.data.begin(), e.data.end(), out.mutable_data());
        return out;
      },
      py::arg("data"), py::arg("labels"), py::arg("fs"), py::arg("n_classes") = 4);

  m.def(
      "pearson_adjacency",
      [](const FloatArray& data, const IntArray& labels, float fs, int n_classes) {
        auto e = epochs_from_arrays(data, labels, fs, n_classes);
        return square_matrix(pearson_adjacency(e), e.n_channels);
      },
      py::arg("data"), py::arg("labels"), py::arg("fs"), py::arg("n_classes") = 4);

  m.def(
      "extract_features",
      [](const FloatArray& data, const IntArray& labels, float fs, int n_classes, int omega, int step) {
        auto e = epochs_from_arrays(data, labels, fs, n_classes);
        auto w = sliding_windows(e, WindowConfig{omega, step});
        auto f = extract_features(w, fs);
        FloatArray x({f.n_windows, f.n_channels, f.n_features});
        std::copy(f.x.begin(), f.x.end(), x.mutable_data());
        IntArray wl(static_cast<py::ssize_t>(f.labels.size()));
        std::copy(f.labels.begin(), f.labels.end(), wl.mutable_data());
        return py::make_tuple(x, wl);
      },
      py::arg("data"), py::arg("labels"), py::arg("fs"), py::arg("n_classes"), py::arg("omega"),
      py::arg("step"), "Window the trials and compute the 18 per-channel features.");

  m.def(
      "train",
      [](const FloatArray& data, const IntArray& labels, float fs, int n_classes,
         const std::string& config_text) {
        auto cfg = config_from_text(config_text);
        auto epochs = epochs_from_arrays(data, labels, fs, n_classes);
        auto prepared =
            prepare_pipeline(epochs, cfg.window, cfg.train.seed, cfg.test_fraction, cfg.val_fraction);
        ModelDims dims;
        dims.n_nodes = prepared.n_channels;
        dims.n_classes = prepared.n_classes;
        auto result = train_model(prepared.train, prepared.val, prepared.pearson, dims,
                                  ModelVariant::Full, cfg.train);
        auto eval = evaluate_model(result.model, prepared.test, cfg.train.weights());

        py::dict out;
        out["metrics"] = metrics_dict(eval.metrics);
        out["best_epoch"] = result.best_epoch;
        out["epochs_run"] = result.log.size();
        out["split_hash"] = prepared.split_hash;
        out["param_count"] = result.model.trainable_count(false);
        out["param_count_with_adjacency"] = result.model.trainable_count(true);
        out["adjacency_before"] = square_matrix(result.adj_before, dims.n_nodes);
        out["adjacency_after"] = square_matrix(result.adj_after, dims.n_nodes);
        py::list log;
        for (const auto& l : result.log)
          log.append(py::make_tuple(l.epoch, l.train_loss, l.val_loss, l.val_accuracy));
        out["log"] = log;
        return out;
      },
      py::arg("data"), py::arg("labels"), py::arg("fs"), py::arg("n_classes"),
      py::arg("config_text") = "",
      "Full pipeline on in-memory epochs; returns metrics, adjacency and the log.");

  m.def(
      "gradcheck_ops",
      [](uint64_t seed) {
        py::list rows;
        for (auto& chk : op_gradcheck_registry<double>(seed)) {
          auto rep = finite_diff_gradcheck(chk.spec);
          rows.append(py::make_tuple(chk.name, rep.max_rel_err));
        }
        return rows;
      },
      py::arg("seed") = 2026, "Per-operation finite-difference errors at double precision.");

  m.def("param_counts", []() {
    const auto c = analytic_layer_counts(ModelDims{});
    py::dict d;
    d["dense_block"] = c.dense_block;
    d["bottleneck"] = c.bottleneck;
    d["decoder"] = c.decoder;
    d["ae_head_hidden"] = c.ae_head_hidden;
    d["ae_head_out"] = c.ae_head_out;
    d["gc1"] = c.gc1;
    d["gc2"] = c.gc2;
    d["bilstm"] = c.bilstm;
    d["attention"] = c.attention;
    d["st_head_hidden"] = c.st_head_hidden;
    d["st_head_out"] = c.st_head_out;
    d["ae_total"] = c.ae_total();
    d["st_total"] = c.st_total();
    d["total"] = c.total();
    return d;
  });

  m.def(
      "masked_row_softmax",
      [](const DoubleArray& raw) {
        auto v = matrix_from(raw);
        const int n = static_cast<int>(raw.shape(0));
        return square_matrix(masked_row_softmax_values(v, n), n);
      },
      py::arg("matrix"), "Row softmax with the diagonal excluded from the support.");

  m.def(
      "top_k_edge_deltas",
      [](const DoubleArray& before, const DoubleArray& after, int k) {
        const int n = static_cast<int>(before.shape(0));
        auto deltas = top_k_edge_deltas(matrix_from(before), matrix_from(after), n, k);
        py::list rows;
        for (const auto& d : deltas) rows.append(py::make_tuple(d.i, d.j, d.delta));
        return rows;
      },
      py::arg("before"), py::arg("after"), py::arg("k"));

  m.attr("FEATURE_COUNT") = kFeatureCount;
  m.attr("__version__") = "0.1.0";
}
