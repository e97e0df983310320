#include "mieeg/commands.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "mieeg/gradcheck_registry.hpp"
#include "mieeg/model_io.hpp"

namespace mieeg {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string matrix_csv(const std::vector<double>& values, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j) out += ",";
      out += format_value(values[static_cast<size_t>(i) * n + j]);
    }
    out += "\n";
  }
  return out;
}

std::string training_log_text(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& l : log) {
    out += std::to_string(l.epoch);
    out += "\t" + format_value(l.train_loss);
    out += "\t" + format_value(l.val_loss);
    out += "\t" + format_value(l.val_accuracy);
    out += "\n";
  }
  return out;
}

ModelDims dims_from(const PreparedData& data) {
  ModelDims dims;
  dims.n_nodes = data.n_channels;
  dims.n_classes = data.n_classes;
  return dims;
}

nlohmann::json metrics_json(const Metrics& m) {
  nlohmann::json j;
  j["accuracy"] = m.accuracy;
  j["kappa"] = m.kappa;
  j["macro_f1"] = m.macro_f1;
  j["macro_auc"] = m.macro_auc;
  j["confusion"] = m.confusion;
  return j;
}

// Structural checks surfaced in the artifact: normalized adjacency rows,
// attention weight normalization, decoder output range.
void check_model_invariants(Model<float>& model, const FeatureTensor& sample) {
  if (model.has_graph()) {
    const auto adj = normalized_adjacency_values(model);
    const int N = model.dims.n_nodes;
    for (int i = 0; i < N; ++i) {
      if (adj[static_cast<size_t>(i) * N + i] != 0.0)
        throw std::runtime_error("invariant violated: adjacency diagonal not zero");
      double row = 0;
      for (int j = 0; j < N; ++j) row += adj[static_cast<size_t>(i) * N + j];
      if (std::abs(row - 1.0) > 1e-6)
        throw std::runtime_error("invariant violated: adjacency row sum " + std::to_string(row));
    }
  }
  const int B = std::min(8, sample.n_windows);
  if (B < 1) return;
  auto x_ae = make_tensor<float>({B, sample.n_features, sample.n_channels});
  auto x_graph = make_tensor<float>({B, sample.n_channels, sample.n_features});
  std::vector<int> labels(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    labels[static_cast<size_t>(b)] = sample.labels[static_cast<size_t>(b)];
    for (int c = 0; c < sample.n_channels; ++c)
      for (int f = 0; f < sample.n_features; ++f) {
        x_ae->data[(static_cast<size_t>(b) * sample.n_features + f) * sample.n_channels + c] =
            sample.at(b, c, f);
        x_graph->data[(static_cast<size_t>(b) * sample.n_channels + c) * sample.n_features + f] =
            sample.at(b, c, f);
      }
  }
  Tape<float> tape;
  std::mt19937_64 rng(0);
  auto out = model_forward(tape, model, x_ae, x_graph, labels, LossWeights{0.3, 1.0}, Mode::Eval,
                           0.0f, rng);
  if (model.has_autoencoder())
    for (float v : out.ae.recon->data)
      if (!(v > 0.0f && v < 1.0f))
        throw std::runtime_error("invariant violated: decoder output outside (0,1)");
  if (model.has_graph()) {
    const int N = model.dims.n_nodes;
    for (int b = 0; b < B; ++b) {
      double s = 0;
      for (int n = 0; n < N; ++n) {
        const float a = out.st.alpha->data[static_cast<size_t>(b) * N + n];
        if (a < 0.0f) throw std::runtime_error("invariant violated: negative attention weight");
        s += a;
      }
      if (std::abs(s - 1.0) > 1e-6)
        throw std::runtime_error("invariant violated: attention weights sum to " + std::to_string(s));
    }
  }
}

}  // namespace

std::vector<double> masked_row_softmax_values(const std::vector<double>& raw, int n) {
  if (raw.size() != static_cast<size_t>(n) * n)
    throw std::invalid_argument("matrix size does not match node count");
  std::vector<double> out(raw.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (i != j) mx = std::max(mx, raw[static_cast<size_t>(i) * n + j]);
    double denom = 0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double e = std::exp(raw[static_cast<size_t>(i) * n + j] - mx);
      out[static_cast<size_t>(i) * n + j] = e;
      denom += e;
    }
    for (int j = 0; j < n; ++j)
      if (i != j) out[static_cast<size_t>(i) * n + j] /= denom;
  }
  return out;
}

void cmd_gen_data(const RunConfig& cfg, const std::string& out_path) {
  auto epochs = generate_synthetic(cfg.synth);
  const fs::path path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_epochs(out_path, epochs);
  std::cout << "wrote " << out_path << ": " << epochs.n_trials << " trials, " << epochs.n_channels
            << " channels, " << epochs.n_samples << " samples @ " << epochs.fs << " Hz, "
            << epochs.n_classes << " classes\n";
}

void cmd_train(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_text(out / "config_resolved.txt", cfg.echo());

  auto epochs = read_epochs(data_path);
  auto data = prepare_pipeline(epochs, cfg.window, cfg.train.seed, cfg.test_fraction, cfg.val_fraction);
  const auto dims = dims_from(data);

  auto result = train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg.train);
  write_text(out / "train.log", training_log_text(result.log));

  auto eval = evaluate_model(result.model, data.test, cfg.train.weights());
  check_model_invariants(result.model, data.test);

  auto j = metrics_json(eval.metrics);
  j["best_epoch"] = result.best_epoch;
  j["epochs_run"] = result.log.size();
  j["split_hash"] = data.split_hash;
  j["param_count"] = result.model.trainable_count(false);
  j["param_count_with_adjacency"] = result.model.trainable_count(true);
  write_text(out / "metrics.json", j.dump(2) + "\n");

  write_text(out / "adjacency_before.csv", matrix_csv(result.adj_before, dims.n_nodes));
  write_text(out / "adjacency_after.csv", matrix_csv(result.adj_after, dims.n_nodes));

  const int max_pairs = dims.n_nodes * (dims.n_nodes - 1) / 2;
  const int k = std::min(10, max_pairs);
  auto edges = top_k_edge_deltas(result.adj_before, result.adj_after, dims.n_nodes, k);
  std::string edge_csv;
  for (const auto& e : edges)
    edge_csv += std::to_string(e.i) + "," + std::to_string(e.j) + "," + format_value(e.delta) + "\n";
  write_text(out / "edges_top10.csv", edge_csv);

  save_model((out / "model.bin").string(), result.model);

  const double latency = mean_inference_ms(result.model, data.test, 200);
  write_text(out / "timing.txt", "mean_inference_ms = " + format_value(latency) + "\n");

  std::cout << "test accuracy " << format_value(eval.metrics.accuracy) << ", kappa "
            << format_value(eval.metrics.kappa) << ", macro_f1 " << format_value(eval.metrics.macro_f1)
            << ", macro_auc " << format_value(eval.metrics.macro_auc) << "\n"
            << "best epoch " << result.best_epoch << " of " << result.log.size() << ", inference "
            << format_value(latency) << " ms/window\n";
}

void cmd_eval(const RunConfig& cfg, const std::string& data_path, const std::string& model_path,
              const std::string& out_dir) {
  auto epochs = read_epochs(data_path);
  auto data = prepare_pipeline(epochs, cfg.window, cfg.train.seed, cfg.test_fraction, cfg.val_fraction);
  auto model = load_model(model_path);
  if (model.dims.n_nodes != data.n_channels)
    throw std::runtime_error("model expects " + std::to_string(model.dims.n_nodes) +
                             " channels but the data has " + std::to_string(data.n_channels));
  auto eval = evaluate_model(model, data.test, cfg.train.weights());
  auto j = metrics_json(eval.metrics);
  j["split_hash"] = data.split_hash;
  const std::string text = j.dump(2) + "\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "metrics.json", text);
    write_text(fs::path(out_dir) / "config_resolved.txt", cfg.echo());
  }
  std::cout << text;
}

void cmd_sweep(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_text(out / "config_resolved.txt", cfg.echo());

  auto epochs = read_epochs(data_path);
  const int omegas[3] = {125, 250, 500};
  const int steps[3] = {62, 125, 250};

  std::string csv = "omega\\step";
  for (int s : steps) csv += "," + std::to_string(s);
  csv += "\n";

  // Every cell trains with the shared base seed; cells are fully independent
  // runs over the same epoch file.
  for (int r = 0; r < 3; ++r) {
    csv += std::to_string(omegas[r]);
    for (int c = 0; c < 3; ++c) {
      RunConfig cell = cfg;
      cell.window = WindowConfig{omegas[r], steps[c]};
      std::string value = "invalid";
      if (cell.window.omega <= epochs.n_samples) {
        auto data = prepare_pipeline(epochs, cell.window, cell.train.seed, cell.test_fraction,
                                     cell.val_fraction);
        auto result = train_model(data.train, data.val, data.pearson, dims_from(data),
                                  ModelVariant::Full, cell.train);
        auto eval = evaluate_model(result.model, data.test, cell.train.weights());
        value = format_value(eval.metrics.accuracy);
      }
      std::cout << "cell omega=" << omegas[r] << " step=" << steps[c] << ": " << value << "\n";
      csv += "," + value;
    }
    csv += "\n";
  }
  write_text(out / "sweep.csv", csv);
}

void cmd_ablate(const RunConfig& cfg, const std::string& data_path, const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_text(out / "config_resolved.txt", cfg.echo());

  auto epochs = read_epochs(data_path);
  auto data = prepare_pipeline(epochs, cfg.window, cfg.train.seed, cfg.test_fraction, cfg.val_fraction);
  AblationInputs in;
  in.train = &data.train;
  in.val = &data.val;
  in.test = &data.test;
  in.pearson = data.pearson;
  in.dims = dims_from(data);
  in.split_hash = data.split_hash;

  auto rows = run_ablation(in, cfg.train);
  std::string csv = "variant,description,params,accuracy,kappa,macro_f1,macro_auc,split_hash\n";
  for (const auto& r : rows) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016" PRIx64, r.split_hash);
    csv += r.id + "," + r.description + "," + std::to_string(r.param_count) + "," +
           format_value(r.metrics.accuracy) + "," + format_value(r.metrics.kappa) + "," +
           format_value(r.metrics.macro_f1) + "," + format_value(r.metrics.macro_auc) + "," + hash + "\n";
    std::cout << "variant " << r.id << ": accuracy " << format_value(r.metrics.accuracy) << "\n";
  }
  write_text(out / "ablation.csv", csv);
}

int cmd_gradcheck(double threshold) {
  int failures = 0;
  std::printf("%-20s %14s %12s  %s\n", "operation", "max_rel_err", "threshold", "status");
  auto report_row = [&](const std::string& name, double err) {
    const bool ok = err < threshold;
    if (!ok) ++failures;
    std::printf("%-20s %14.3e %12.0e  %s\n", name.c_str(), err, threshold, ok ? "PASS" : "FAIL");
  };

  for (auto& chk : op_gradcheck_registry<double>(2026)) {
    auto rep = finite_diff_gradcheck(chk.spec);
    report_row(chk.name, static_cast<double>(rep.max_rel_err));
  }

  // Composite objective on a small two-sample graph, every parameter tensor
  // perturbed on an even stride, adjacency included. Batch norm runs in eval
  // mode so pre-norm biases keep nonzero gradients (batch statistics absorb
  // constant shifts exactly, which leaves nothing a floored relative error
  // can certify). The instance seed is chosen so no attention hidden unit is
  // active at every node; such units make their bias score-shift-invariant,
  // another structurally zero gradient.
  ModelDims dims;
  dims.n_nodes = 4;
  std::mt19937_64 rng(12007);
  std::vector<double> corr(16, 0.0);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) corr[static_cast<size_t>(i) * 4 + j] = corr[static_cast<size_t>(j) * 4 + i] = u(rng);
  for (int i = 0; i < 4; ++i) corr[static_cast<size_t>(i) * 4 + i] = 1.0;
  auto model = init_model<double>(dims, ModelVariant::Full, GraphInput::Features, corr, 12);

  auto x_ae = make_tensor<double>({2, dims.n_features, dims.n_nodes});
  fill_uniform(*x_ae, rng, 0.05, 0.95);
  auto x_graph = make_tensor<double>({2, dims.n_nodes, dims.n_features});
  for (int b = 0; b < 2; ++b)
    for (int n = 0; n < dims.n_nodes; ++n)
      for (int f = 0; f < dims.n_features; ++f)
        x_graph->data[(b * dims.n_nodes + n) * dims.n_features + f] =
            x_ae->data[(b * dims.n_features + f) * dims.n_nodes + n];
  std::vector<int> labels{1, 3};

  GradCheckSpec<double> spec;
  for (auto& p : model.ae_group) spec.params.push_back(p.tensor);
  for (auto& p : model.st_group) spec.params.push_back(p.tensor);
  spec.max_entries_per_param = 256;
  spec.build_loss = [&](Tape<double>& t) {
    std::mt19937_64 local(0);
    return model_forward(t, model, x_ae, x_graph, labels, LossWeights{0.3, 1.0}, Mode::Eval, 0.0, local)
        .total;
  };
  auto rep = finite_diff_gradcheck(spec);
  report_row("composite_loss", static_cast<double>(rep.max_rel_err));
  std::printf("%d failing row(s)\n", failures);
  return failures;
}

void cmd_export_graph(const RunConfig& cfg, const std::string& data_path,
                      const std::string& model_path, const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out);

  auto epochs = read_epochs(data_path);
  auto data = prepare_pipeline(epochs, cfg.window, cfg.train.seed, cfg.test_fraction, cfg.val_fraction);
  auto model = load_model(model_path);
  if (!model.has_graph()) throw std::runtime_error("model variant has no graph branch to export");
  if (model.dims.n_nodes != data.n_channels)
    throw std::runtime_error("model expects " + std::to_string(model.dims.n_nodes) +
                             " channels but the data has " + std::to_string(data.n_channels));

  const int N = model.dims.n_nodes;
  // Quantize through float first so the matrix matches the one the training
  // run started from (the adjacency is stored in single precision).
  std::vector<double> pearson_f(data.pearson.size());
  for (size_t i = 0; i < data.pearson.size(); ++i)
    pearson_f[i] = static_cast<double>(static_cast<float>(data.pearson[i]));
  auto before = masked_row_softmax_values(pearson_f, N);
  auto after = normalized_adjacency_values(model);
  write_text(out / "adjacency_before.csv", matrix_csv(before, N));
  write_text(out / "adjacency_after.csv", matrix_csv(after, N));
  const int k = std::min(10, N * (N - 1) / 2);
  auto edges = top_k_edge_deltas(before, after, N, k);
  std::string edge_csv;
  for (const auto& e : edges)
    edge_csv += std::to_string(e.i) + "," + std::to_string(e.j) + "," + format_value(e.delta) + "\n";
  write_text(out / "edges_top10.csv", edge_csv);
  std::cout << "exported adjacency matrices and top-" << k << " edge deltas to " << out_dir << "\n";
}

}  // namespace mieeg
