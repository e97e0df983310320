// Central-difference gradient verification for tape-recorded graphs.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mieeg/ops.hpp"

namespace mieeg {

// Central-difference step balancing truncation against roundoff for the
// working precision. Single precision needs a coarse step: the difference of
// two float-rounded losses loses ~7 digits, so small-gradient entries drown
// at fine steps.
template <typename T>
constexpr T default_fd_step() {
  if constexpr (sizeof(T) == sizeof(float))
    return T(2e-2);
  else
    return T(1e-5);
}

// A check is a graph builder over a fixed set of leaf parameters. The builder
// must be deterministic: every invocation with the same parameter values has
// to produce the same loss (stochastic layers disabled or frozen).
template <typename T>
struct GradCheckSpec {
  std::function<TensorPtr<T>(Tape<T>&)> build_loss;
  std::vector<TensorPtr<T>> params;
  T step = default_fd_step<T>();
  // Cap on perturbed entries per parameter tensor; <= 0 checks all entries.
  // Entries are sampled on an even stride so every region is covered.
  int max_entries_per_param = 0;
};

template <typename T>
struct GradCheckReport {
  T max_rel_err = T(0);
  int64_t entries_checked = 0;
};

// For each checked entry p: numeric = (f(p+h) - f(p-h)) / (2h) and
// rel = |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Returns the maximum relative error over all checked entries.
template <typename T>
GradCheckReport<T> finite_diff_gradcheck(const GradCheckSpec<T>& spec) {
  for (const auto& p : spec.params)
    if (!p->requires_grad)
      throw std::invalid_argument("finite_diff_gradcheck: parameter without requires_grad");
  if (!(spec.step > T(0))) throw std::invalid_argument("finite_diff_gradcheck: step must be positive");

  auto eval_value = [&]() -> T {
    Tape<T> tape;
    auto loss = spec.build_loss(tape);
    if (loss->numel() != 1)
      throw std::invalid_argument("finite_diff_gradcheck: loss is not scalar, shape " + shape_str(loss->shape));
    return loss->data[0];
  };

  // Determinism guard: two evaluations of the untouched graph must agree
  // bitwise, otherwise central differences are meaningless.
  {
    const T v0 = eval_value();
    const T v1 = eval_value();
    if (v0 != v1)
      throw std::invalid_argument("finite_diff_gradcheck: loss builder is not deterministic");
  }

  for (const auto& p : spec.params) p->zero_grad();
  {
    Tape<T> tape;
    auto loss = spec.build_loss(tape);
    tape.backward(loss);
  }

  GradCheckReport<T> report;
  const T h = spec.step;
  for (const auto& p : spec.params) {
    p->ensure_grad();
    const int64_t n = p->numel();
    int64_t stride = 1;
    if (spec.max_entries_per_param > 0 && n > spec.max_entries_per_param)
      stride = (n + spec.max_entries_per_param - 1) / spec.max_entries_per_param;
    for (int64_t i = 0; i < n; i += stride) {
      const size_t idx = static_cast<size_t>(i);
      const T saved = p->data[idx];
      p->data[idx] = saved + h;
      const T fp = eval_value();
      p->data[idx] = saved - h;
      const T fm = eval_value();
      p->data[idx] = saved;
      const T numeric = (fp - fm) / (T(2) * h);
      const T analytic = p->grad[idx];
      const T denom = std::max(T(1e-8), std::abs(analytic) + std::abs(numeric));
      const T rel = std::abs(analytic - numeric) / denom;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.entries_checked;
    }
  }
  return report;
}

// One registry row: a named op exercised on a small seeded instance.
template <typename T>
struct OpCheck {
  std::string name;
  GradCheckSpec<T> spec;
};

// Every registered differentiable operation, once each, on small seeded
// inputs. Used by the gradcheck command and by unit tests at both precisions.
template <typename T>
std::vector<OpCheck<T>> op_gradcheck_registry(uint64_t seed);

}  // namespace mieeg
