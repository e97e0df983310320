#include "mieeg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace mieeg {

double one_vs_rest_auc(const std::vector<int>& labels, const std::vector<double>& scores,
                       int n_samples, int n_classes, int klass) {
  std::vector<int> order(static_cast<size_t>(n_samples));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<size_t>(a) * n_classes + klass] <
           scores[static_cast<size_t>(b) * n_classes + klass];
  });

  // Midranks over tied scores.
  std::vector<double> rank(static_cast<size_t>(n_samples), 0.0);
  int i = 0;
  while (i < n_samples) {
    int j = i;
    const double s = scores[static_cast<size_t>(order[static_cast<size_t>(i)]) * n_classes + klass];
    while (j + 1 < n_samples &&
           scores[static_cast<size_t>(order[static_cast<size_t>(j + 1)]) * n_classes + klass] == s)
      ++j;
    const double mid = (static_cast<double>(i) + j) / 2.0 + 1.0;  // 1-based
    for (int k = i; k <= j; ++k) rank[static_cast<size_t>(order[static_cast<size_t>(k)])] = mid;
    i = j + 1;
  }

  int64_t n_pos = 0;
  double rank_sum = 0;
  for (int s = 0; s < n_samples; ++s)
    if (labels[static_cast<size_t>(s)] == klass) {
      ++n_pos;
      rank_sum += rank[static_cast<size_t>(s)];
    }
  const int64_t n_neg = n_samples - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nan("");
  return (rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Metrics compute_metrics(const std::vector<int>& labels, const std::vector<int>& predictions,
                        const std::vector<double>& scores, int n_classes) {
  const int n = static_cast<int>(labels.size());
  if (predictions.size() != labels.size())
    throw std::invalid_argument("metrics: prediction count does not match label count");
  if (n == 0) throw std::invalid_argument("metrics: empty evaluation set");

  Metrics m;
  m.confusion.assign(static_cast<size_t>(n_classes), std::vector<int>(static_cast<size_t>(n_classes), 0));
  for (int s = 0; s < n; ++s) {
    const int a = labels[static_cast<size_t>(s)], p = predictions[static_cast<size_t>(s)];
    if (a < 0 || a >= n_classes || p < 0 || p >= n_classes)
      throw std::invalid_argument("metrics: class index out of range");
    ++m.confusion[static_cast<size_t>(a)][static_cast<size_t>(p)];
  }

  int64_t trace = 0;
  for (int k = 0; k < n_classes; ++k) trace += m.confusion[static_cast<size_t>(k)][static_cast<size_t>(k)];
  m.accuracy = static_cast<double>(trace) / n;

  // kappa = (p_o - p_e) / (1 - p_e), expected agreement from the marginals.
  double p_e = 0;
  for (int k = 0; k < n_classes; ++k) {
    int64_t row = 0, col = 0;
    for (int j = 0; j < n_classes; ++j) {
      row += m.confusion[static_cast<size_t>(k)][static_cast<size_t>(j)];
      col += m.confusion[static_cast<size_t>(j)][static_cast<size_t>(k)];
    }
    p_e += static_cast<double>(row) * col / (static_cast<double>(n) * n);
  }
  if (1.0 - p_e < 1e-12)
    m.kappa = m.accuracy >= 1.0 - 1e-12 ? 1.0 : 0.0;
  else
    m.kappa = (m.accuracy - p_e) / (1.0 - p_e);

  double f1_sum = 0;
  for (int k = 0; k < n_classes; ++k) {
    int64_t tp = m.confusion[static_cast<size_t>(k)][static_cast<size_t>(k)], fp = 0, fn = 0;
    for (int j = 0; j < n_classes; ++j) {
      if (j == k) continue;
      fp += m.confusion[static_cast<size_t>(j)][static_cast<size_t>(k)];
      fn += m.confusion[static_cast<size_t>(k)][static_cast<size_t>(j)];
    }
    const double denom = 2.0 * tp + fp + fn;
    f1_sum += denom > 0 ? 2.0 * tp / denom : 0.0;  // absent and never-predicted classes score 0
  }
  m.macro_f1 = f1_sum / n_classes;

  if (!scores.empty()) {
    if (scores.size() != static_cast<size_t>(n) * n_classes)
      throw std::invalid_argument("metrics: score matrix does not match n x classes");
    double auc_sum = 0;
    int auc_count = 0;
    for (int k = 0; k < n_classes; ++k) {
      const double auc = one_vs_rest_auc(labels, scores, n, n_classes, k);
      if (!std::isnan(auc)) {
        auc_sum += auc;
        ++auc_count;
      }
    }
    m.macro_auc = auc_count > 0 ? auc_sum / auc_count : 0.0;
  }
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["accuracy"] = m.accuracy;
  j["kappa"] = m.kappa;
  j["macro_f1"] = m.macro_f1;
  j["macro_auc"] = m.macro_auc;
  j["confusion"] = m.confusion;
  return j.dump(2) + "\n";
}

}  // namespace mieeg
