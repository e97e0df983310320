// Adam optimization, the joint training loop with early stopping, evaluation,
// the ablation harness and connectivity-change export.
#pragma once

#include <functional>

#include "mieeg/data.hpp"
#include "mieeg/metrics.hpp"
#include "mieeg/model.hpp"

namespace mieeg {

struct TrainConfig {
  double lr_ae = 1e-3;  // autoencoder group learning rate
  int batch_ae = 32;    // autoencoder batch size (documented; the joint loop binds to batch_st)
  double lr_st = 2e-4;  // graph group + adjacency learning rate
  int batch_st = 16;    // joint mini-batch size
  double lambda = 0.3;
  double gamma = 1.0;
  int max_epochs = 100;
  int patience = 10;  // early-stopping patience on validation loss
  double dropout = 0.3;
  uint64_t seed = 42;
  GraphInput stgnn_input = GraphInput::Features;

  void validate() const;
  LossWeights weights() const { return LossWeights{lambda, gamma}; }
};

// Bias-corrected first/second-moment step; beta1 = 0.9, beta2 = 0.999,
// eps = 1e-8. State grows lazily to match the group.
struct AdamState {
  std::vector<std::vector<float>> m, v;
  int64_t t = 0;
};
void adam_step(std::vector<NamedParam<float>>& group, AdamState& state, double lr);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};

struct TrainResult {
  Model<float> model;  // best-validation snapshot
  std::vector<EpochLog> log;
  std::vector<double> adj_before;  // normalized adjacency at initialization
  std::vector<double> adj_after;   // normalized adjacency of the returned model
  int best_epoch = 0;
  double best_val_loss = 0;
};

using EpochCallback = std::function<void(const EpochLog&, Model<float>&)>;

// Seeded-shuffled mini-batches, two optimizer groups at their own rates,
// per-epoch validation, early stopping with best-snapshot restore.
TrainResult train_model(const FeatureTensor& train, const FeatureTensor& val,
                        const std::vector<double>& pearson, const ModelDims& dims,
                        ModelVariant variant, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = nullptr);

struct EvalResult {
  Metrics metrics;
  std::vector<int> predictions;
  std::vector<double> scores;  // [n x K] softmax probabilities of the decision head
  double mean_loss = 0;
};

// Predictions are the argmax of the graph-branch head (or its replacement).
EvalResult evaluate_model(Model<float>& m, const FeatureTensor& f, const LossWeights& w);

// Mean single-window latency of the prediction path, in milliseconds.
double mean_inference_ms(Model<float>& m, const FeatureTensor& f, int repeats);

// The normalized adjacency as plain values (no tape).
std::vector<double> normalized_adjacency_values(const Model<float>& m);

struct AblationInputs {
  const FeatureTensor* train;
  const FeatureTensor* val;
  const FeatureTensor* test;
  std::vector<double> pearson;
  ModelDims dims;
  uint64_t split_hash = 0;
};

struct AblationRow {
  std::string id;
  std::string description;
  Metrics metrics;
  int64_t param_count = 0;  // trainable, including the adjacency when present
  uint64_t split_hash = 0;
};

// Trains and evaluates the four variants with identical seeds and splits.
std::vector<AblationRow> run_ablation(const AblationInputs& in, const TrainConfig& cfg);

struct EdgeDelta {
  int i = 0, j = 0;  // upper-triangle pair, i < j
  double delta = 0;
};

// Deltas of symmetrized normalized adjacencies, largest |delta| first, ties
// broken by (i, j) lexicographic order.
std::vector<EdgeDelta> top_k_edge_deltas(const std::vector<double>& before,
                                         const std::vector<double>& after, int n_nodes, int k);

}  // namespace mieeg
