// Test-side linear discriminant classifier. Deliberately independent of the
// tensor/model code: plain arrays, pooled covariance with a small ridge,
// Gaussian elimination.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mieeg/data.hpp"

namespace mieeg::testsupport {

class LinearDiscriminant {
 public:
  void fit(const FeatureTensor& f, int n_classes) {
    const int n = f.n_windows;
    const int d = f.n_channels * f.n_features;
    if (n < 2) throw std::invalid_argument("lda: need at least two samples");
    n_classes_ = n_classes;
    dim_ = d;

    means_.assign(static_cast<size_t>(n_classes) * d, 0.0);
    priors_.assign(static_cast<size_t>(n_classes), 0.0);
    std::vector<int> counts(static_cast<size_t>(n_classes), 0);
    for (int i = 0; i < n; ++i) {
      const int y = f.labels[static_cast<size_t>(i)];
      ++counts[static_cast<size_t>(y)];
      const float* row = &f.x[static_cast<size_t>(i) * d];
      for (int j = 0; j < d; ++j) means_[static_cast<size_t>(y) * d + j] += row[j];
    }
    for (int k = 0; k < n_classes; ++k) {
      if (counts[static_cast<size_t>(k)] == 0) throw std::invalid_argument("lda: class without samples");
      for (int j = 0; j < d; ++j) means_[static_cast<size_t>(k) * d + j] /= counts[static_cast<size_t>(k)];
      priors_[static_cast<size_t>(k)] = static_cast<double>(counts[static_cast<size_t>(k)]) / n;
    }

    // Pooled within-class covariance.
    std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
    std::vector<double> centered(static_cast<size_t>(d));
    for (int i = 0; i < n; ++i) {
      const int y = f.labels[static_cast<size_t>(i)];
      const float* row = &f.x[static_cast<size_t>(i) * d];
      for (int j = 0; j < d; ++j) centered[static_cast<size_t>(j)] = row[j] - means_[static_cast<size_t>(y) * d + j];
      for (int a = 0; a < d; ++a) {
        const double ca = centered[static_cast<size_t>(a)];
        if (ca == 0.0) continue;
        double* crow = &cov[static_cast<size_t>(a) * d];
        for (int b = a; b < d; ++b) crow[b] += ca * centered[static_cast<size_t>(b)];
      }
    }
    double trace = 0;
    for (int a = 0; a < d; ++a) trace += cov[static_cast<size_t>(a) * d + a];
    const double ridge = 1e-6 * (trace / d) + 1e-9;
    for (int a = 0; a < d; ++a) {
      for (int b = a + 1; b < d; ++b) cov[static_cast<size_t>(b) * d + a] = cov[static_cast<size_t>(a) * d + b];
      cov[static_cast<size_t>(a) * d + a] += ridge;
    }
    for (auto& v : cov) v /= n;

    // Solve cov * w_k = mean_k for every class at once.
    std::vector<double> rhs(static_cast<size_t>(d) * n_classes);
    for (int k = 0; k < n_classes; ++k)
      for (int j = 0; j < d; ++j) rhs[static_cast<size_t>(j) * n_classes + k] = means_[static_cast<size_t>(k) * d + j];
    gauss_solve(cov, rhs, d, n_classes);
    weights_ = std::move(rhs);  // [d x K]

    bias_.assign(static_cast<size_t>(n_classes), 0.0);
    for (int k = 0; k < n_classes; ++k) {
      double quad = 0;
      for (int j = 0; j < d; ++j)
        quad += means_[static_cast<size_t>(k) * d + j] * weights_[static_cast<size_t>(j) * n_classes + k];
      bias_[static_cast<size_t>(k)] = -0.5 * quad + std::log(priors_[static_cast<size_t>(k)]);
    }
  }

  int predict(const float* row) const {
    int best = 0;
    double best_score = -1e300;
    for (int k = 0; k < n_classes_; ++k) {
      double s = bias_[static_cast<size_t>(k)];
      for (int j = 0; j < dim_; ++j) s += row[j] * weights_[static_cast<size_t>(j) * n_classes_ + k];
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    return best;
  }

  double accuracy(const FeatureTensor& f) const {
    const int d = f.n_channels * f.n_features;
    if (d != dim_) throw std::invalid_argument("lda: dimension mismatch");
    int hits = 0;
    for (int i = 0; i < f.n_windows; ++i)
      if (predict(&f.x[static_cast<size_t>(i) * d]) == f.labels[static_cast<size_t>(i)]) ++hits;
    return static_cast<double>(hits) / f.n_windows;
  }

 private:
  // In-place Gaussian elimination with partial pivoting; rhs is [d x m].
  static void gauss_solve(std::vector<double>& a, std::vector<double>& rhs, int d, int m) {
    for (int col = 0; col < d; ++col) {
      int pivot = col;
      for (int r = col + 1; r < d; ++r)
        if (std::abs(a[static_cast<size_t>(r) * d + col]) > std::abs(a[static_cast<size_t>(pivot) * d + col]))
          pivot = r;
      if (std::abs(a[static_cast<size_t>(pivot) * d + col]) < 1e-300)
        throw std::runtime_error("lda: singular covariance");
      if (pivot != col) {
        for (int j = 0; j < d; ++j) std::swap(a[static_cast<size_t>(col) * d + j], a[static_cast<size_t>(pivot) * d + j]);
        for (int j = 0; j < m; ++j)
          std::swap(rhs[static_cast<size_t>(col) * m + j], rhs[static_cast<size_t>(pivot) * m + j]);
      }
      const double diag = a[static_cast<size_t>(col) * d + col];
      for (int r = col + 1; r < d; ++r) {
        const double factor = a[static_cast<size_t>(r) * d + col] / diag;
        if (factor == 0.0) continue;
        for (int j = col; j < d; ++j) a[static_cast<size_t>(r) * d + j] -= factor * a[static_cast<size_t>(col) * d + j];
        for (int j = 0; j < m; ++j) rhs[static_cast<size_t>(r) * m + j] -= factor * rhs[static_cast<size_t>(col) * m + j];
      }
    }
    for (int col = d - 1; col >= 0; --col) {
      const double diag = a[static_cast<size_t>(col) * d + col];
      for (int j = 0; j < m; ++j) {
        double acc = rhs[static_cast<size_t>(col) * m + j];
        for (int k = col + 1; k < d; ++k) acc -= a[static_cast<size_t>(col) * d + k] * rhs[static_cast<size_t>(k) * m + j];
        rhs[static_cast<size_t>(col) * m + j] = acc / diag;
      }
    }
  }

  int n_classes_ = 0;
  int dim_ = 0;
  std::vector<double> means_, priors_, weights_, bias_;
};

}  // namespace mieeg::testsupport
