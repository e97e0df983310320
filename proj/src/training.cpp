#include "mieeg/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mieeg {

void TrainConfig::validate() const {
  if (lr_ae <= 0 || lr_st <= 0) throw std::invalid_argument("learning rates must be positive");
  if (batch_ae < 2 || batch_st < 2)
    throw std::invalid_argument("batch sizes must be at least 2 (batch normalization)");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (dropout < 0 || dropout >= 1) throw std::invalid_argument("dropout must lie in [0,1)");
  if (lambda < 0 || gamma < 0) throw std::invalid_argument("loss weights must be nonnegative");
}

void adam_step(std::vector<NamedParam<float>>& group, AdamState& state, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (state.m.size() != group.size()) {
    state.m.assign(group.size(), {});
    state.v.assign(group.size(), {});
    for (size_t i = 0; i < group.size(); ++i) {
      state.m[i].assign(group[i].tensor->data.size(), 0.0f);
      state.v[i].assign(group[i].tensor->data.size(), 0.0f);
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < group.size(); ++i) {
    auto& p = *group[i].tensor;
    if (p.grad.empty()) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t j = 0; j < p.data.size(); ++j) {
      const double g = p.grad[j];
      m[j] = static_cast<float>(beta1 * m[j] + (1.0 - beta1) * g);
      v[j] = static_cast<float>(beta2 * v[j] + (1.0 - beta2) * g * g);
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.data[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

namespace {

// Copies window w of the feature tensor into the two model layouts.
void fill_batch(const FeatureTensor& f, const std::vector<int>& window_ids, size_t offset, int batch,
                Tensor<float>& x_ae, Tensor<float>& x_graph, std::vector<int>& labels) {
  const int C = f.n_channels, F = f.n_features;
  labels.resize(static_cast<size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    const int w = window_ids[offset + static_cast<size_t>(b)];
    labels[static_cast<size_t>(b)] = f.labels[static_cast<size_t>(w)];
    for (int c = 0; c < C; ++c)
      for (int ff = 0; ff < F; ++ff) {
        const float v = f.at(w, c, ff);
        x_ae.data[(static_cast<size_t>(b) * F + ff) * C + c] = v;      // [B, F, N]
        x_graph.data[(static_cast<size_t>(b) * C + c) * F + ff] = v;   // [B, N, F]
      }
  }
}

struct BatchEval {
  double loss_sum = 0;
  int64_t n = 0;
};

}  // namespace

std::vector<double> normalized_adjacency_values(const Model<float>& m) {
  if (!m.has_graph()) throw std::invalid_argument("model variant has no adjacency");
  const int N = m.graph.adjacency->dim(0);
  std::vector<double> out(static_cast<size_t>(N) * N, 0.0);
  for (int i = 0; i < N; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < N; ++j)
      if (i != j) mx = std::max(mx, static_cast<double>(m.graph.adjacency->data[static_cast<size_t>(i) * N + j]));
    double denom = 0;
    for (int j = 0; j < N; ++j) {
      if (i == j) continue;
      const double e = std::exp(m.graph.adjacency->data[static_cast<size_t>(i) * N + j] - mx);
      out[static_cast<size_t>(i) * N + j] = e;
      denom += e;
    }
    for (int j = 0; j < N; ++j)
      if (i != j) out[static_cast<size_t>(i) * N + j] /= denom;
  }
  return out;
}

EvalResult evaluate_model(Model<float>& m, const FeatureTensor& f, const LossWeights& w) {
  if (f.n_windows == 0) throw std::invalid_argument("evaluation partition is empty");
  const int K = m.dims.n_classes;
  EvalResult res;
  res.predictions.resize(static_cast<size_t>(f.n_windows));
  res.scores.resize(static_cast<size_t>(f.n_windows) * K);

  std::mt19937_64 unused_rng(0);  // dropout is inactive in eval mode
  const int chunk = 128;
  double loss_sum = 0;
  for (int start = 0; start < f.n_windows; start += chunk) {
    const int B = std::min(chunk, f.n_windows - start);
    auto x_ae = make_tensor<float>({B, f.n_features, f.n_channels});
    auto x_graph = make_tensor<float>({B, f.n_channels, f.n_features});
    std::vector<int> ids(static_cast<size_t>(B));
    std::iota(ids.begin(), ids.end(), start);
    std::vector<int> labels;
    fill_batch(f, ids, 0, B, *x_ae, *x_graph, labels);

    Tape<float> tape;
    auto out = model_forward(tape, m, x_ae, x_graph, labels, w, Mode::Eval, 0.0f, unused_rng);
    loss_sum += static_cast<double>(out.total->data[0]) * B;

    for (int b = 0; b < B; ++b) {
      const float* row = &out.st_logits->data[static_cast<size_t>(b) * K];
      float mx = row[0];
      int arg = 0;
      for (int k = 1; k < K; ++k)
        if (row[k] > mx) {
          mx = row[k];
          arg = k;
        }
      res.predictions[static_cast<size_t>(start + b)] = arg;
      double denom = 0;
      for (int k = 0; k < K; ++k) denom += std::exp(static_cast<double>(row[k]) - mx);
      for (int k = 0; k < K; ++k)
        res.scores[static_cast<size_t>(start + b) * K + k] =
            std::exp(static_cast<double>(row[k]) - mx) / denom;
    }
  }
  res.mean_loss = loss_sum / f.n_windows;
  res.metrics = compute_metrics(f.labels, res.predictions, res.scores, K);
  return res;
}

double mean_inference_ms(Model<float>& m, const FeatureTensor& f, int repeats) {
  if (f.n_windows == 0) throw std::invalid_argument("latency measurement needs at least one window");
  std::mt19937_64 unused_rng(0);
  auto x_ae = make_tensor<float>({1, f.n_features, f.n_channels});
  auto x_graph = make_tensor<float>({1, f.n_channels, f.n_features});
  std::vector<int> labels{0};

  auto run_once = [&](int w) {
    std::vector<int> ids{w};
    std::vector<int> lab;
    fill_batch(f, ids, 0, 1, *x_ae, *x_graph, lab);
    Tape<float> tape;
    if (m.has_graph()) {
      if (m.graph_input == GraphInput::Latent) {
        auto out = model_forward(tape, m, x_ae, x_graph, labels, LossWeights{0, 1}, Mode::Eval, 0.0f,
                                 unused_rng);
        return out.st_logits->data[0];
      }
      auto out = graph_forward(tape, x_graph, m.graph, m.residual_enabled(), Mode::Eval, 0.0f, unused_rng);
      return out.logits->data[0];
    }
    return mlp_forward(tape, x_graph, m.mlp)->data[0];
  };

  volatile float sink = 0;
  for (int i = 0; i < 3; ++i) sink = sink + run_once(i % f.n_windows);  // warmup
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) sink = sink + run_once(i % f.n_windows);
  const auto t1 = std::chrono::steady_clock::now();
  (void)sink;
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

TrainResult train_model(const FeatureTensor& train, const FeatureTensor& val,
                        const std::vector<double>& pearson, const ModelDims& dims,
                        ModelVariant variant, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.n_windows == 0 || val.n_windows == 0)
    throw std::invalid_argument("training and validation partitions must be non-empty");
  if (cfg.batch_st > train.n_windows)
    throw std::invalid_argument("batch size " + std::to_string(cfg.batch_st) +
                                " exceeds training windows " + std::to_string(train.n_windows));

  TrainResult res;
  res.model = init_model<float>(dims, variant, cfg.stgnn_input, pearson, cfg.seed);
  auto& model = res.model;
  if (model.has_graph()) res.adj_before = normalized_adjacency_values(model);

  std::mt19937_64 loop_rng(cfg.seed + 0x9e3779b97f4a7c15ull);
  AdamState adam_ae, adam_st;
  const LossWeights w = cfg.weights();

  std::vector<int> order(static_cast<size_t>(train.n_windows));
  std::iota(order.begin(), order.end(), 0);

  double best_val = std::numeric_limits<double>::infinity();
  ModelSnapshot<float> best_snapshot = snapshot_model(model);
  int best_epoch = 0;
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), loop_rng);
    double loss_sum = 0;
    int64_t seen = 0;
    for (size_t off = 0; off < order.size();) {
      const int B = static_cast<int>(std::min<size_t>(cfg.batch_st, order.size() - off));
      if (B < 2) break;  // a single leftover window cannot pass batch norm
      auto x_ae = make_tensor<float>({B, train.n_features, train.n_channels});
      auto x_graph = make_tensor<float>({B, train.n_channels, train.n_features});
      std::vector<int> labels;
      fill_batch(train, order, off, B, *x_ae, *x_graph, labels);

      Tape<float> tape;
      auto out = model_forward(tape, model, x_ae, x_graph, labels, w, Mode::Train,
                               static_cast<float>(cfg.dropout), loop_rng);
      tape.backward(out.total);
      adam_step(model.ae_group, adam_ae, cfg.lr_ae);
      adam_step(model.st_group, adam_st, cfg.lr_st);
      for (auto& p : model.ae_group) p.tensor->zero_grad();
      for (auto& p : model.st_group) p.tensor->zero_grad();

      loss_sum += static_cast<double>(out.total->data[0]) * B;
      seen += B;
      off += static_cast<size_t>(B);
    }

    auto val_eval = evaluate_model(model, val, w);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(seen);
    log.val_loss = val_eval.mean_loss;
    log.val_accuracy = val_eval.metrics.accuracy;
    res.log.push_back(log);
    if (on_epoch) on_epoch(log, model);

    if (log.val_loss < best_val) {
      best_val = log.val_loss;
      best_snapshot = snapshot_model(model);
      best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
      if (stale >= cfg.patience) break;
    }
  }

  restore_model(model, best_snapshot);
  res.best_epoch = best_epoch;
  res.best_val_loss = best_val;
  if (model.has_graph()) res.adj_after = normalized_adjacency_values(model);
  return res;
}

std::vector<AblationRow> run_ablation(const AblationInputs& in, const TrainConfig& cfg) {
  if (!in.train || !in.val || !in.test) throw std::invalid_argument("ablation needs all three partitions");
  struct VariantSpec {
    ModelVariant v;
    const char* description;
  };
  const VariantSpec variants[4] = {
      {ModelVariant::Full, "full model"},
      {ModelVariant::MlpSpatial, "graph branch replaced by a two-layer fully connected network"},
      {ModelVariant::NoAutoencoder, "autoencoder removed; scaled features fed onward"},
      {ModelVariant::NoResidual, "residual connections removed from graph layers"},
  };
  std::vector<AblationRow> rows;
  for (const auto& vs : variants) {
    TrainConfig vcfg = cfg;
    if (vs.v == ModelVariant::NoAutoencoder) vcfg.lambda = 0.0;  // no autoencoder loss terms
    auto trained = train_model(*in.train, *in.val, in.pearson, in.dims, vs.v, vcfg);
    auto eval = evaluate_model(trained.model, *in.test, vcfg.weights());
    AblationRow row;
    row.id = variant_id(vs.v);
    row.description = vs.description;
    row.metrics = eval.metrics;
    row.param_count = trained.model.trainable_count(true);
    row.split_hash = in.split_hash;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<EdgeDelta> top_k_edge_deltas(const std::vector<double>& before,
                                         const std::vector<double>& after, int n_nodes, int k) {
  const size_t expect = static_cast<size_t>(n_nodes) * n_nodes;
  if (before.size() != expect || after.size() != expect)
    throw std::invalid_argument("adjacency matrices do not match the node count");
  const int max_pairs = n_nodes * (n_nodes - 1) / 2;
  if (k < 0 || k > max_pairs)
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the " +
                                std::to_string(max_pairs) + " node pairs");
  std::vector<EdgeDelta> all;
  all.reserve(static_cast<size_t>(max_pairs));
  auto sym = [n_nodes](const std::vector<double>& a, int i, int j) {
    return 0.5 * (a[static_cast<size_t>(i) * n_nodes + j] + a[static_cast<size_t>(j) * n_nodes + i]);
  };
  for (int i = 0; i < n_nodes; ++i)
    for (int j = i + 1; j < n_nodes; ++j)
      all.push_back({i, j, sym(after, i, j) - sym(before, i, j)});
  std::sort(all.begin(), all.end(), [](const EdgeDelta& a, const EdgeDelta& b) {
    const double ma = std::abs(a.delta), mb = std::abs(b.delta);
    if (ma != mb) return ma > mb;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  all.resize(static_cast<size_t>(k));
  return all;
}

}  // namespace mieeg
