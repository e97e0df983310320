#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mieeg/training.hpp"

using namespace mieeg;

namespace {

SyntheticSpec quick_spec() {
  SyntheticSpec s = SyntheticSpec::defaults();
  s.n_channels = 8;
  s.n_samples = 250;
  s.trials_per_class = 10;
  s.erd_channels = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  return s;
}

PreparedData quick_data() {
  auto e = generate_synthetic(quick_spec());
  return prepare_pipeline(e, WindowConfig{125, 62}, 5);
}

ModelDims dims_for(const PreparedData& d) {
  ModelDims dims;
  dims.n_nodes = d.n_channels;
  dims.n_classes = d.n_classes;
  return dims;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.batch_st = 8;
  cfg.max_epochs = 6;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

TEST_CASE("adam: zero gradients leave parameters untouched") {
  auto p = tensor_of<float>({3}, {1.0f, -2.0f, 0.5f}, true);
  p->ensure_grad();
  std::vector<NamedParam<float>> group{{"p", p}};
  AdamState st;
  adam_step(group, st, 1e-3);
  CHECK(p->data == std::vector<float>{1.0f, -2.0f, 0.5f});
  CHECK(st.t == 1);
}

TEST_CASE("adam: first step moves by about lr in the gradient's direction") {
  auto p = tensor_of<float>({4}, {0.0f, 0.0f, 0.0f, 0.0f}, true);
  p->ensure_grad();
  p->grad = {0.3f, -7.0f, 120.0f, -1e-3f};
  std::vector<NamedParam<float>> group{{"p", p}};
  AdamState st;
  const double lr = 1e-2;
  adam_step(group, st, lr);
  for (int i = 0; i < 4; ++i) {
    const double expect = -lr * (p->grad[static_cast<size_t>(i)] > 0 ? 1.0 : -1.0);
    CHECK(p->data[static_cast<size_t>(i)] == doctest::Approx(expect).epsilon(1e-3));
  }
}

TEST_CASE("adam: three steps on a scalar quadratic match the hand-unrolled recursion") {
  auto p = tensor_of<float>({1}, {1.0f}, true);
  std::vector<NamedParam<float>> group{{"p", p}};
  AdamState st;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  double hp = 1.0, hm = 0.0, hv = 0.0;  // hand-tracked param and moments
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * hp;  // d/dp of p^2 at the current hand-tracked value
    p->ensure_grad();
    p->grad[0] = static_cast<float>(2.0 * p->data[0]);
    adam_step(group, st, lr);

    hm = b1 * hm + (1 - b1) * g;
    hv = b2 * hv + (1 - b2) * g * g;
    const double mhat = hm / (1 - std::pow(b1, t));
    const double vhat = hv / (1 - std::pow(b2, t));
    hp -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(p->data[0] == doctest::Approx(hp).epsilon(1e-5));
  }
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

TEST_CASE("metrics: perfect agreement and constant predictions") {
  std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  auto perfect = compute_metrics(labels, labels, {}, 4);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.kappa == 1.0);
  CHECK(perfect.macro_f1 == 1.0);

  std::vector<int> constant(8, 0);
  auto chance = compute_metrics(labels, constant, {}, 4);
  CHECK(chance.accuracy == doctest::Approx(0.25));
  CHECK(chance.kappa == doctest::Approx(0.0));

  // Confusion rows sum to per-class support.
  for (int k = 0; k < 4; ++k) {
    int row = 0, support = 0;
    for (int j = 0; j < 4; ++j) row += chance.confusion[static_cast<size_t>(k)][static_cast<size_t>(j)];
    for (int l : labels) support += l == k ? 1 : 0;
    CHECK(row == support);
  }
}

TEST_CASE("AUC on the scripted six-sample case equals 8/9, confirmed by pair counting") {
  std::vector<int> labels{1, 1, 0, 1, 0, 0};
  std::vector<double> s1{0.9, 0.8, 0.7, 0.6, 0.4, 0.2};
  std::vector<double> scores(12);
  for (int i = 0; i < 6; ++i) {
    scores[static_cast<size_t>(i) * 2 + 1] = s1[static_cast<size_t>(i)];
    scores[static_cast<size_t>(i) * 2 + 0] = 1.0 - s1[static_cast<size_t>(i)];
  }
  const double auc = one_vs_rest_auc(labels, scores, 6, 2, 1);
  CHECK(auc == doctest::Approx(8.0 / 9.0).epsilon(1e-12));

  // Oracle: enumerate every positive-negative pair.
  double wins = 0;
  int pairs = 0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (labels[static_cast<size_t>(i)] != 1 || labels[static_cast<size_t>(j)] != 0) continue;
      ++pairs;
      if (s1[static_cast<size_t>(i)] > s1[static_cast<size_t>(j)]) wins += 1.0;
      else if (s1[static_cast<size_t>(i)] == s1[static_cast<size_t>(j)]) wins += 0.5;
    }
  CHECK(auc == doctest::Approx(wins / pairs));

  auto m = compute_metrics(labels, {1, 1, 1, 1, 0, 0}, scores, 2);
  CHECK(m.macro_auc == doctest::Approx(8.0 / 9.0));
}

TEST_CASE("metrics are invariant under class relabeling") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> cls(0, 3);
  std::uniform_real_distribution<double> u(0, 1);
  const int n = 60;
  std::vector<int> labels(n), preds(n);
  std::vector<double> scores(static_cast<size_t>(n) * 4);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<size_t>(i)] = cls(rng);
    double total = 0;
    for (int k = 0; k < 4; ++k) {
      scores[static_cast<size_t>(i) * 4 + k] = u(rng);
      total += scores[static_cast<size_t>(i) * 4 + k];
    }
    int arg = 0;
    for (int k = 0; k < 4; ++k) {
      scores[static_cast<size_t>(i) * 4 + k] /= total;
      if (scores[static_cast<size_t>(i) * 4 + k] > scores[static_cast<size_t>(i) * 4 + arg]) arg = k;
    }
    preds[static_cast<size_t>(i)] = arg;
  }
  auto base = compute_metrics(labels, preds, scores, 4);

  const int perm[4] = {2, 0, 3, 1};
  std::vector<int> labels_p(n), preds_p(n);
  std::vector<double> scores_p(static_cast<size_t>(n) * 4);
  for (int i = 0; i < n; ++i) {
    labels_p[static_cast<size_t>(i)] = perm[labels[static_cast<size_t>(i)]];
    preds_p[static_cast<size_t>(i)] = perm[preds[static_cast<size_t>(i)]];
    for (int k = 0; k < 4; ++k)
      scores_p[static_cast<size_t>(i) * 4 + perm[k]] = scores[static_cast<size_t>(i) * 4 + k];
  }
  auto remapped = compute_metrics(labels_p, preds_p, scores_p, 4);
  CHECK(base.accuracy == doctest::Approx(remapped.accuracy));
  CHECK(base.kappa == doctest::Approx(remapped.kappa));
  CHECK(base.macro_f1 == doctest::Approx(remapped.macro_f1));
  CHECK(base.macro_auc == doctest::Approx(remapped.macro_auc));
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

TEST_CASE("training is bitwise deterministic for equal seeds and configs") {
  auto data = quick_data();
  auto dims = dims_for(data);
  auto cfg = quick_config();
  cfg.max_epochs = 3;
  auto r1 = train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg);
  auto r2 = train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg);
  REQUIRE(r1.log.size() == r2.log.size());
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].train_loss == r2.log[i].train_loss);
    CHECK(r1.log[i].val_loss == r2.log[i].val_loss);
    CHECK(r1.log[i].val_accuracy == r2.log[i].val_accuracy);
  }
  CHECK(r1.adj_after == r2.adj_after);

  cfg.seed = 12;
  auto r3 = train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg);
  CHECK(r1.log[0].train_loss != r3.log[0].train_loss);
}

TEST_CASE("early stopping: frozen parameters stop after exactly patience+1 epochs") {
  auto data = quick_data();
  auto dims = dims_for(data);
  TrainConfig cfg = quick_config();
  // Rates small enough that float parameters cannot move; the batch-norm-free
  // variant keeps evaluation bitwise constant across epochs.
  cfg.lr_ae = 1e-30;
  cfg.lr_st = 1e-30;
  cfg.patience = 1;
  cfg.max_epochs = 10;
  auto r = train_model(data.train, data.val, data.pearson, dims, ModelVariant::MlpSpatial, cfg);
  CHECK(r.log.size() == 2);
  CHECK(r.best_epoch == 1);
}

TEST_CASE("validation loss improves within five epochs on separable data") {
  auto data = quick_data();
  auto dims = dims_for(data);
  TrainConfig cfg = quick_config();
  cfg.max_epochs = 5;
  cfg.patience = 10;
  auto r = train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg);
  REQUIRE(r.log.size() == 5);
  CHECK(r.log[4].val_loss < r.log[0].val_loss);
}

TEST_CASE("the returned model reproduces the best validation loss") {
  auto data = quick_data();
  auto dims = dims_for(data);
  auto cfg = quick_config();
  auto r = train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : r.log) best = std::min(best, l.val_loss);
  CHECK(r.best_val_loss == best);
  auto eval = evaluate_model(r.model, data.val, cfg.weights());
  CHECK(eval.mean_loss == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("adjacency invariants hold at every epoch and after restore") {
  auto data = quick_data();
  auto dims = dims_for(data);
  auto cfg = quick_config();
  cfg.max_epochs = 4;
  int epochs_seen = 0;
  auto r = train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg,
                       [&](const EpochLog&, Model<float>& m) {
                         ++epochs_seen;
                         auto a = normalized_adjacency_values(m);
                         const int N = m.dims.n_nodes;
                         for (int i = 0; i < N; ++i) {
                           CHECK(a[static_cast<size_t>(i) * N + i] == 0.0);
                           double row = 0;
                           for (int j = 0; j < N; ++j) row += a[static_cast<size_t>(i) * N + j];
                           CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
                         }
                       });
  CHECK(epochs_seen == 4);
  CHECK(r.adj_before.size() == r.adj_after.size());
  // Training at a positive rate moves the adjacency away from its start.
  double moved = 0;
  for (size_t i = 0; i < r.adj_before.size(); ++i) moved += std::abs(r.adj_after[i] - r.adj_before[i]);
  CHECK(moved > 0.0);
}

TEST_CASE("train rejects empty partitions and oversized batches") {
  auto data = quick_data();
  auto dims = dims_for(data);
  auto cfg = quick_config();
  FeatureTensor empty;
  empty.n_channels = data.n_channels;
  CHECK_THROWS_AS(train_model(empty, data.val, data.pearson, dims, ModelVariant::Full, cfg),
                  std::invalid_argument);
  cfg.batch_st = data.train.n_windows + 1;
  CHECK_THROWS_AS(train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// ablation and edge deltas
// ---------------------------------------------------------------------------

TEST_CASE("ablation harness: four rows, shared split, equal A/D parameter counts") {
  auto data = quick_data();
  AblationInputs in;
  in.train = &data.train;
  in.val = &data.val;
  in.test = &data.test;
  in.pearson = data.pearson;
  in.dims = dims_for(data);
  in.split_hash = data.split_hash;
  TrainConfig cfg = quick_config();
  cfg.max_epochs = 2;
  auto rows = run_ablation(in, cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].id == "A");
  CHECK(rows[1].id == "B");
  CHECK(rows[2].id == "C");
  CHECK(rows[3].id == "D");
  CHECK(rows[0].param_count == rows[3].param_count);
  for (const auto& r : rows) CHECK(r.split_hash == rows[0].split_hash);
}

TEST_CASE("edge deltas: null change, single perturbation and top-k against a full sort") {
  const int C = 3;
  std::vector<double> before{0, 0.5, 0.5, 0.5, 0, 0.5, 0.5, 0.5, 0};
  auto null_deltas = top_k_edge_deltas(before, before, C, 3);
  REQUIRE(null_deltas.size() == 3);
  CHECK(null_deltas[0].i == 0);
  CHECK(null_deltas[0].j == 1);  // lexicographic order on ties
  CHECK(null_deltas[1].i == 0);
  CHECK(null_deltas[1].j == 2);
  CHECK(null_deltas[2].i == 1);
  CHECK(null_deltas[2].j == 2);
  for (const auto& d : null_deltas) CHECK(d.delta == 0.0);

  auto after = before;
  after[0 * 3 + 2] += 0.2;
  after[2 * 3 + 0] += 0.2;
  auto top = top_k_edge_deltas(before, after, C, 1);
  CHECK(top[0].i == 0);
  CHECK(top[0].j == 2);
  CHECK(top[0].delta == doctest::Approx(0.2));

  // Seeded matrices: the returned list must dominate every excluded pair and
  // be sorted by |delta|.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const int N = 7;
  std::vector<double> a(static_cast<size_t>(N) * N), b(static_cast<size_t>(N) * N);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng);
  const int k = 5;
  auto got = top_k_edge_deltas(a, b, N, k);
  REQUIRE(got.size() == static_cast<size_t>(k));
  for (size_t i = 1; i < got.size(); ++i) CHECK(std::abs(got[i - 1].delta) >= std::abs(got[i].delta));
  std::vector<std::pair<int, int>> chosen;
  for (const auto& d : got) chosen.push_back({d.i, d.j});
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      if (std::find(chosen.begin(), chosen.end(), std::make_pair(i, j)) != chosen.end()) continue;
      const double delta = 0.5 * (b[static_cast<size_t>(i) * N + j] + b[static_cast<size_t>(j) * N + i]) -
                           0.5 * (a[static_cast<size_t>(i) * N + j] + a[static_cast<size_t>(j) * N + i]);
      CHECK(std::abs(delta) <= std::abs(got.back().delta) + 1e-15);
    }

  CHECK_THROWS_AS(top_k_edge_deltas(a, b, N, N * (N - 1) / 2 + 1), std::invalid_argument);
}

TEST_CASE("latency measurement returns a positive sub-second figure") {
  auto data = quick_data();
  auto dims = dims_for(data);
  auto cfg = quick_config();
  cfg.max_epochs = 1;
  auto r = train_model(data.train, data.val, data.pearson, dims, ModelVariant::Full, cfg);
  const double ms = mean_inference_ms(r.model, data.test, 20);
  CHECK(ms > 0.0);
  CHECK(ms < 1000.0);
}
