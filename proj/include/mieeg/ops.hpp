// Differentiable operations recorded on a Tape. Forward computes eagerly;
// each op registers a closure that accumulates gradients into its inputs.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mieeg/tensor.hpp"

namespace mieeg {

enum class Mode {
  Train,        // batch statistics + running-stat update, dropout active
  TrainFrozen,  // batch statistics, no running-stat update, dropout off (gradcheck)
  Eval          // running statistics, dropout off
};

namespace detail {

template <typename T>
inline void check_same_shape(const char* op, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape != b->shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a->shape) +
                                " vs " + shape_str(b->shape));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> add(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape("add", a, b);
  auto out = make_tensor<T>(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
  return tape.record("add", {a, b}, out, [a, b, out]() {
    if (wants_grad(a)) {
      a->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
    }
    if (wants_grad(b)) {
      b->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
    }
  });
}

template <typename T>
TensorPtr<T> mul(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  detail::check_same_shape("mul", a, b);
  auto out = make_tensor<T>(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
  return tape.record("mul", {a, b}, out, [a, b, out]() {
    if (wants_grad(a)) {
      a->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
    }
    if (wants_grad(b)) {
      b->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
    }
  });
}

template <typename T>
TensorPtr<T> scale(Tape<T>& tape, const TensorPtr<T>& x, T c) {
  auto out = make_tensor<T>(x->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = c * x->data[i];
  return tape.record("scale", {x}, out, [x, out, c]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += c * out->grad[i];
  });
}

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, const TensorPtr<T>& x) {
  auto out = make_tensor<T>(x->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
  return tape.record("relu", {x}, out, [x, out]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (size_t i = 0; i < out->grad.size(); ++i)
      if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
  });
}

template <typename T>
TensorPtr<T> sigmoid(Tape<T>& tape, const TensorPtr<T>& x) {
  auto out = make_tensor<T>(x->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = T(1) / (T(1) + std::exp(-x->data[i]));
  return tape.record("sigmoid", {x}, out, [x, out]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (size_t i = 0; i < out->grad.size(); ++i) {
      T y = out->data[i];
      x->grad[i] += out->grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
TensorPtr<T> tanh(Tape<T>& tape, const TensorPtr<T>& x) {
  auto out = make_tensor<T>(x->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = std::tanh(x->data[i]);
  return tape.record("tanh", {x}, out, [x, out]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (size_t i = 0; i < out->grad.size(); ++i) {
      T y = out->data[i];
      x->grad[i] += out->grad[i] * (T(1) - y * y);
    }
  });
}

template <typename T>
TensorPtr<T> sum_all(Tape<T>& tape, const TensorPtr<T>& x) {
  auto out = make_tensor<T>({1});
  T s = 0;
  for (T v : x->data) s += v;
  out->data[0] = s;
  return tape.record("sum_all", {x}, out, [x, out]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[0];
  });
}

// ---------------------------------------------------------------------------
// shape plumbing
// ---------------------------------------------------------------------------

template <typename T>
TensorPtr<T> reshape(Tape<T>& tape, const TensorPtr<T>& x, std::vector<int> new_shape) {
  auto out = make_tensor<T>(std::move(new_shape));
  if (out->numel() != x->numel())
    throw std::invalid_argument("reshape: cannot map " + shape_str(x->shape) + " onto " +
                                shape_str(out->shape));
  out->data = x->data;
  return tape.record("reshape", {x}, out, [x, out]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
  });
}

// Column range [c0, c1) of a [B, C] tensor.
template <typename T>
TensorPtr<T> slice_cols(Tape<T>& tape, const TensorPtr<T>& x, int c0, int c1) {
  if (x->shape.size() != 2) throw std::invalid_argument("slice_cols: expected rank-2, got " + shape_str(x->shape));
  const int B = x->dim(0), C = x->dim(1);
  if (c0 < 0 || c1 > C || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," + std::to_string(c1) +
                                ") for " + shape_str(x->shape));
  const int W = c1 - c0;
  auto out = make_tensor<T>({B, W});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < W; ++c) out->data[b * W + c] = x->data[b * C + c0 + c];
  return tape.record("slice_cols", {x}, out, [x, out, c0, B, C, W]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < W; ++c) x->grad[b * C + c0 + c] += out->grad[b * W + c];
  });
}

// Concatenate [B, Ci, N] tensors along the channel axis.
template <typename T>
TensorPtr<T> concat_channels(Tape<T>& tape, const std::vector<TensorPtr<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int B = xs[0]->dim(0), N = xs[0]->dim(2);
  int Ctot = 0;
  for (const auto& x : xs) {
    if (x->shape.size() != 3 || x->dim(0) != B || x->dim(2) != N)
      throw std::invalid_argument("concat_channels: incompatible input " + shape_str(x->shape));
    Ctot += x->dim(1);
  }
  auto out = make_tensor<T>({B, Ctot, N});
  int coff = 0;
  for (const auto& x : xs) {
    const int C = x->dim(1);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        std::copy_n(&x->data[(b * C + c) * N], N, &out->data[(b * Ctot + coff + c) * N]);
    coff += C;
  }
  return tape.record("concat_channels", xs, out, [xs, out, B, N, Ctot]() {
    int off = 0;
    for (const auto& x : xs) {
      const int C = x->dim(1);
      if (wants_grad(x)) {
        x->ensure_grad();
        for (int b = 0; b < B; ++b)
          for (int c = 0; c < C; ++c)
            for (int n = 0; n < N; ++n)
              x->grad[(b * C + c) * N + n] += out->grad[(b * Ctot + off + c) * N + n];
      }
      off += C;
    }
  });
}

// Stack S tensors of shape [B, F] into [B, S, F], in argument order.
template <typename T>
TensorPtr<T> stack_rows(Tape<T>& tape, const std::vector<TensorPtr<T>>& steps) {
  if (steps.empty()) throw std::invalid_argument("stack_rows: no inputs");
  const int B = steps[0]->dim(0), F = steps[0]->dim(1);
  const int S = static_cast<int>(steps.size());
  for (const auto& s : steps)
    if (s->shape.size() != 2 || s->dim(0) != B || s->dim(1) != F)
      throw std::invalid_argument("stack_rows: incompatible input " + shape_str(s->shape));
  auto out = make_tensor<T>({B, S, F});
  for (int i = 0; i < S; ++i)
    for (int b = 0; b < B; ++b)
      std::copy_n(&steps[static_cast<size_t>(i)]->data[b * F], F, &out->data[(b * S + i) * F]);
  return tape.record("stack_rows", steps, out, [steps, out, B, F, S]() {
    for (int i = 0; i < S; ++i) {
      const auto& s = steps[static_cast<size_t>(i)];
      if (!wants_grad(s)) continue;
      s->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) s->grad[b * F + f] += out->grad[(b * S + i) * F + f];
    }
  });
}

// Concatenate two [B, N, Fi] tensors along the last axis.
template <typename T>
TensorPtr<T> concat_last(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape.size() != 3 || b->shape.size() != 3 || a->dim(0) != b->dim(0) || a->dim(1) != b->dim(1))
    throw std::invalid_argument("concat_last: incompatible " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  const int B = a->dim(0), N = a->dim(1), Fa = a->dim(2), Fb = b->dim(2);
  auto out = make_tensor<T>({B, N, Fa + Fb});
  for (int bn = 0; bn < B * N; ++bn) {
    std::copy_n(&a->data[bn * Fa], Fa, &out->data[bn * (Fa + Fb)]);
    std::copy_n(&b->data[bn * Fb], Fb, &out->data[bn * (Fa + Fb) + Fa]);
  }
  return tape.record("concat_last", {a, b}, out, [a, b, out, B, N, Fa, Fb]() {
    if (wants_grad(a)) {
      a->ensure_grad();
      for (int bn = 0; bn < B * N; ++bn)
        for (int f = 0; f < Fa; ++f) a->grad[bn * Fa + f] += out->grad[bn * (Fa + Fb) + f];
    }
    if (wants_grad(b)) {
      b->ensure_grad();
      for (int bn = 0; bn < B * N; ++bn)
        for (int f = 0; f < Fb; ++f) b->grad[bn * Fb + f] += out->grad[bn * (Fa + Fb) + Fa + f];
    }
  });
}

// Swap the channel and position axes: [B, C, N] -> [B, N, C].
template <typename T>
TensorPtr<T> transpose_cn(Tape<T>& tape, const TensorPtr<T>& x) {
  if (x->shape.size() != 3) throw std::invalid_argument("transpose_cn: expected rank-3, got " + shape_str(x->shape));
  const int B = x->dim(0), C = x->dim(1), N = x->dim(2);
  auto out = make_tensor<T>({B, N, C});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int n = 0; n < N; ++n) out->data[(b * N + n) * C + c] = x->data[(b * C + c) * N + n];
  return tape.record("transpose_cn", {x}, out, [x, out, B, C, N]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int n = 0; n < N; ++n) x->grad[(b * C + c) * N + n] += out->grad[(b * N + n) * C + c];
  });
}

// Row n of the middle axis: [B, N, F] -> [B, F].
template <typename T>
TensorPtr<T> select_step(Tape<T>& tape, const TensorPtr<T>& x, int n) {
  if (x->shape.size() != 3) throw std::invalid_argument("select_step: expected rank-3, got " + shape_str(x->shape));
  const int B = x->dim(0), N = x->dim(1), F = x->dim(2);
  if (n < 0 || n >= N) throw std::invalid_argument("select_step: index " + std::to_string(n) + " out of range");
  auto out = make_tensor<T>({B, F});
  for (int b = 0; b < B; ++b) std::copy_n(&x->data[(b * N + n) * F], F, &out->data[b * F]);
  return tape.record("select_step", {x}, out, [x, out, n, B, N, F]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f) x->grad[(b * N + n) * F + f] += out->grad[b * F + f];
  });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

// y = x W (+ b). x: [B, I], W: [I, O], b: [O] or null.
template <typename T>
TensorPtr<T> linear(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& W, const TensorPtr<T>& b) {
  if (x->shape.size() != 2 || W->shape.size() != 2 || x->dim(1) != W->dim(0))
    throw std::invalid_argument("linear: shape mismatch x=" + shape_str(x->shape) + " W=" + shape_str(W->shape));
  const int B = x->dim(0), I = x->dim(1), O = W->dim(1);
  if (b && (b->shape.size() != 1 || b->dim(0) != O))
    throw std::invalid_argument("linear: bias shape " + shape_str(b->shape) + " does not match O=" + std::to_string(O));
  auto out = make_tensor<T>({B, O});
  for (int r = 0; r < B; ++r) {
    T* orow = &out->data[r * O];
    if (b) std::copy_n(b->data.data(), O, orow);
    const T* xrow = &x->data[r * I];
    for (int k = 0; k < I; ++k) {
      const T xv = xrow[k];
      const T* wrow = &W->data[k * O];
      for (int c = 0; c < O; ++c) orow[c] += xv * wrow[c];
    }
  }
  std::vector<TensorPtr<T>> ins = b ? std::vector<TensorPtr<T>>{x, W, b} : std::vector<TensorPtr<T>>{x, W};
  return tape.record("linear", std::move(ins), out, [x, W, b, out, B, I, O]() {
    if (wants_grad(x)) {
      x->ensure_grad();
      for (int r = 0; r < B; ++r) {
        const T* grow = &out->grad[r * O];
        T* xg = &x->grad[r * I];
        for (int k = 0; k < I; ++k) {
          const T* wrow = &W->data[k * O];
          T acc = 0;
          for (int c = 0; c < O; ++c) acc += grow[c] * wrow[c];
          xg[k] += acc;
        }
      }
    }
    if (wants_grad(W)) {
      W->ensure_grad();
      for (int r = 0; r < B; ++r) {
        const T* grow = &out->grad[r * O];
        const T* xrow = &x->data[r * I];
        for (int k = 0; k < I; ++k) {
          const T xv = xrow[k];
          T* wg = &W->grad[k * O];
          for (int c = 0; c < O; ++c) wg[c] += xv * grow[c];
        }
      }
    }
    if (b && wants_grad(b)) {
      b->ensure_grad();
      for (int r = 0; r < B; ++r)
        for (int c = 0; c < O; ++c) b->grad[c] += out->grad[r * O + c];
    }
  });
}

template <typename T>
TensorPtr<T> linear(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& W) {
  return linear(tape, x, W, TensorPtr<T>{});
}

// Graph mixing: out[b,i,:] = sum_j A[i,j] H[b,j,:]. A: [N, N], H: [B, N, D].
template <typename T>
TensorPtr<T> adj_mix(Tape<T>& tape, const TensorPtr<T>& A, const TensorPtr<T>& H) {
  if (A->shape.size() != 2 || A->dim(0) != A->dim(1))
    throw std::invalid_argument("adj_mix: adjacency must be square, got " + shape_str(A->shape));
  if (H->shape.size() != 3 || H->dim(1) != A->dim(0))
    throw std::invalid_argument("adj_mix: node count mismatch, A=" + shape_str(A->shape) +
                                " H=" + shape_str(H->shape));
  const int B = H->dim(0), N = H->dim(1), D = H->dim(2);
  auto out = make_tensor<T>({B, N, D});
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < N; ++i) {
      T* orow = &out->data[(b * N + i) * D];
      for (int j = 0; j < N; ++j) {
        const T a = A->data[i * N + j];
        if (a == T(0)) continue;
        const T* hrow = &H->data[(b * N + j) * D];
        for (int d = 0; d < D; ++d) orow[d] += a * hrow[d];
      }
    }
  return tape.record("adj_mix", {A, H}, out, [A, H, out, B, N, D]() {
    if (wants_grad(A)) {
      A->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < N; ++i) {
          const T* grow = &out->grad[(b * N + i) * D];
          for (int j = 0; j < N; ++j) {
            const T* hrow = &H->data[(b * N + j) * D];
            T acc = 0;
            for (int d = 0; d < D; ++d) acc += grow[d] * hrow[d];
            A->grad[i * N + j] += acc;
          }
        }
    }
    if (wants_grad(H)) {
      H->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < N; ++i) {
          const T* grow = &out->grad[(b * N + i) * D];
          for (int j = 0; j < N; ++j) {
            const T a = A->data[i * N + j];
            if (a == T(0)) continue;
            T* hg = &H->grad[(b * N + j) * D];
            for (int d = 0; d < D; ++d) hg[d] += a * grow[d];
          }
        }
    }
  });
}

// out[b,:] = sum_n alpha[b,n] H[b,n,:]. alpha: [B, N], H: [B, N, F].
template <typename T>
TensorPtr<T> node_weighted_sum(Tape<T>& tape, const TensorPtr<T>& alpha, const TensorPtr<T>& H) {
  if (alpha->shape.size() != 2 || H->shape.size() != 3 || alpha->dim(0) != H->dim(0) ||
      alpha->dim(1) != H->dim(1))
    throw std::invalid_argument("node_weighted_sum: alpha=" + shape_str(alpha->shape) +
                                " H=" + shape_str(H->shape));
  const int B = H->dim(0), N = H->dim(1), F = H->dim(2);
  auto out = make_tensor<T>({B, F});
  for (int b = 0; b < B; ++b)
    for (int n = 0; n < N; ++n) {
      const T a = alpha->data[b * N + n];
      const T* hrow = &H->data[(b * N + n) * F];
      T* orow = &out->data[b * F];
      for (int f = 0; f < F; ++f) orow[f] += a * hrow[f];
    }
  return tape.record("node_weighted_sum", {alpha, H}, out, [alpha, H, out, B, N, F]() {
    if (wants_grad(alpha)) {
      alpha->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < N; ++n) {
          const T* hrow = &H->data[(b * N + n) * F];
          const T* grow = &out->grad[b * F];
          T acc = 0;
          for (int f = 0; f < F; ++f) acc += grow[f] * hrow[f];
          alpha->grad[b * N + n] += acc;
        }
    }
    if (wants_grad(H)) {
      H->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < N; ++n) {
          const T a = alpha->data[b * N + n];
          T* hg = &H->grad[(b * N + n) * F];
          const T* grow = &out->grad[b * F];
          for (int f = 0; f < F; ++f) hg[f] += a * grow[f];
        }
    }
  });
}

// Mean over the trailing axis: [B, C, N] -> [B, C].
template <typename T>
TensorPtr<T> mean_over_last(Tape<T>& tape, const TensorPtr<T>& x) {
  if (x->shape.size() != 3) throw std::invalid_argument("mean_over_last: expected rank-3, got " + shape_str(x->shape));
  const int B = x->dim(0), C = x->dim(1), N = x->dim(2);
  auto out = make_tensor<T>({B, C});
  for (int bc = 0; bc < B * C; ++bc) {
    T s = 0;
    for (int n = 0; n < N; ++n) s += x->data[bc * N + n];
    out->data[bc] = s / T(N);
  }
  return tape.record("mean_over_last", {x}, out, [x, out, B, C, N]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    const T inv = T(1) / T(N);
    for (int bc = 0; bc < B * C; ++bc)
      for (int n = 0; n < N; ++n) x->grad[bc * N + n] += out->grad[bc] * inv;
  });
}

// ---------------------------------------------------------------------------
// convolution (cross-correlation semantics, no kernel flip)
// ---------------------------------------------------------------------------

// x: [B, Cin, N], kernel: [Cout, Cin, k], bias: [Cout]. Output length
// N' = N + 2*padding - k + 1, zero padding on both ends.
template <typename T>
TensorPtr<T> conv1d(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& kernel,
                    const TensorPtr<T>& bias, int padding) {
  if (x->shape.size() != 3 || kernel->shape.size() != 3)
    throw std::invalid_argument("conv1d: x=" + shape_str(x->shape) + " kernel=" + shape_str(kernel->shape));
  const int B = x->dim(0), Cin = x->dim(1), N = x->dim(2);
  const int Cout = kernel->dim(0), KCin = kernel->dim(1), K = kernel->dim(2);
  if (Cin != KCin)
    throw std::invalid_argument("conv1d: input channels " + shape_str(x->shape) +
                                " do not match kernel " + shape_str(kernel->shape));
  if (K < 1 || padding < 0 || N + 2 * padding < K)
    throw std::invalid_argument("conv1d: invalid geometry N=" + std::to_string(N) + " k=" +
                                std::to_string(K) + " padding=" + std::to_string(padding));
  if (bias->shape.size() != 1 || bias->dim(0) != Cout)
    throw std::invalid_argument("conv1d: bias shape " + shape_str(bias->shape));
  const int No = N + 2 * padding - K + 1;
  auto out = make_tensor<T>({B, Cout, No});
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < Cout; ++co) {
      T* orow = &out->data[(b * Cout + co) * No];
      for (int n = 0; n < No; ++n) orow[n] = bias->data[co];
      for (int ci = 0; ci < Cin; ++ci) {
        const T* xrow = &x->data[(b * Cin + ci) * N];
        const T* krow = &kernel->data[(co * Cin + ci) * K];
        for (int n = 0; n < No; ++n) {
          T acc = 0;
          for (int t = 0; t < K; ++t) {
            const int src = n + t - padding;
            if (src >= 0 && src < N) acc += xrow[src] * krow[t];
          }
          orow[n] += acc;
        }
      }
    }
  return tape.record("conv1d", {x, kernel, bias}, out,
                     [x, kernel, bias, out, B, Cin, N, Cout, K, No, padding]() {
    if (wants_grad(x)) {
      x->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int co = 0; co < Cout; ++co) {
          const T* grow = &out->grad[(b * Cout + co) * No];
          for (int ci = 0; ci < Cin; ++ci) {
            T* xg = &x->grad[(b * Cin + ci) * N];
            const T* krow = &kernel->data[(co * Cin + ci) * K];
            for (int n = 0; n < No; ++n)
              for (int t = 0; t < K; ++t) {
                const int src = n + t - padding;
                if (src >= 0 && src < N) xg[src] += grow[n] * krow[t];
              }
          }
        }
    }
    if (wants_grad(kernel)) {
      kernel->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int co = 0; co < Cout; ++co) {
          const T* grow = &out->grad[(b * Cout + co) * No];
          for (int ci = 0; ci < Cin; ++ci) {
            const T* xrow = &x->data[(b * Cin + ci) * N];
            T* kg = &kernel->grad[(co * Cin + ci) * K];
            for (int t = 0; t < K; ++t) {
              T acc = 0;
              for (int n = 0; n < No; ++n) {
                const int src = n + t - padding;
                if (src >= 0 && src < N) acc += xrow[src] * grow[n];
              }
              kg[t] += acc;
            }
          }
        }
    }
    if (wants_grad(bias)) {
      bias->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int co = 0; co < Cout; ++co)
          for (int n = 0; n < No; ++n) bias->grad[co] += out->grad[(b * Cout + co) * No + n];
    }
  });
}

// Linear adjoint of conv1d (padding 0). z: [B, Cin, N], kernel: [Cin, Cout, k],
// bias: [Cout]. out[b,co,m+t] += z[b,ci,m] * kernel[ci,co,t]; length N + k - 1.
template <typename T>
TensorPtr<T> conv_transpose1d(Tape<T>& tape, const TensorPtr<T>& z, const TensorPtr<T>& kernel,
                              const TensorPtr<T>& bias) {
  if (z->shape.size() != 3 || kernel->shape.size() != 3)
    throw std::invalid_argument("conv_transpose1d: z=" + shape_str(z->shape) +
                                " kernel=" + shape_str(kernel->shape));
  const int B = z->dim(0), Cin = z->dim(1), N = z->dim(2);
  const int KCin = kernel->dim(0), Cout = kernel->dim(1), K = kernel->dim(2);
  if (Cin != KCin)
    throw std::invalid_argument("conv_transpose1d: input channels " + shape_str(z->shape) +
                                " do not match kernel " + shape_str(kernel->shape));
  if (K < 1) throw std::invalid_argument("conv_transpose1d: kernel width must be >= 1");
  if (bias->shape.size() != 1 || bias->dim(0) != Cout)
    throw std::invalid_argument("conv_transpose1d: bias shape " + shape_str(bias->shape));
  const int No = N + K - 1;
  auto out = make_tensor<T>({B, Cout, No});
  for (int b = 0; b < B; ++b) {
    for (int co = 0; co < Cout; ++co) {
      T* orow = &out->data[(b * Cout + co) * No];
      for (int n = 0; n < No; ++n) orow[n] = bias->data[co];
    }
    for (int ci = 0; ci < Cin; ++ci) {
      const T* zrow = &z->data[(b * Cin + ci) * N];
      for (int co = 0; co < Cout; ++co) {
        T* orow = &out->data[(b * Cout + co) * No];
        const T* krow = &kernel->data[(ci * Cout + co) * K];
        for (int m = 0; m < N; ++m)
          for (int t = 0; t < K; ++t) orow[m + t] += zrow[m] * krow[t];
      }
    }
  }
  return tape.record("conv_transpose1d", {z, kernel, bias}, out,
                     [z, kernel, bias, out, B, Cin, N, Cout, K, No]() {
    if (wants_grad(z)) {
      z->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int ci = 0; ci < Cin; ++ci) {
          T* zg = &z->grad[(b * Cin + ci) * N];
          for (int co = 0; co < Cout; ++co) {
            const T* grow = &out->grad[(b * Cout + co) * No];
            const T* krow = &kernel->data[(ci * Cout + co) * K];
            for (int m = 0; m < N; ++m) {
              T acc = 0;
              for (int t = 0; t < K; ++t) acc += grow[m + t] * krow[t];
              zg[m] += acc;
            }
          }
        }
    }
    if (wants_grad(kernel)) {
      kernel->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int ci = 0; ci < Cin; ++ci) {
          const T* zrow = &z->data[(b * Cin + ci) * N];
          for (int co = 0; co < Cout; ++co) {
            const T* grow = &out->grad[(b * Cout + co) * No];
            T* kg = &kernel->grad[(ci * Cout + co) * K];
            for (int t = 0; t < K; ++t) {
              T acc = 0;
              for (int m = 0; m < N; ++m) acc += zrow[m] * grow[m + t];
              kg[t] += acc;
            }
          }
        }
    }
    if (wants_grad(bias)) {
      bias->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int co = 0; co < Cout; ++co)
          for (int n = 0; n < No; ++n) bias->grad[co] += out->grad[(b * Cout + co) * No + n];
    }
  });
}

// ---------------------------------------------------------------------------
// softmax / normalization
// ---------------------------------------------------------------------------

// Row-wise softmax over the entries where mask == 1; masked entries are
// excluded from the support (-inf pre-activation) and come out exactly 0.
// Max-subtraction keeps the exponentials bounded. The mask is a constant.
template <typename T>
TensorPtr<T> rowwise_softmax(Tape<T>& tape, const TensorPtr<T>& m, const Tensor<T>& support_mask) {
  if (m->shape.size() != 2) throw std::invalid_argument("rowwise_softmax: expected rank-2, got " + shape_str(m->shape));
  if (support_mask.shape != m->shape)
    throw std::invalid_argument("rowwise_softmax: mask shape " + shape_str(support_mask.shape) +
                                " does not match " + shape_str(m->shape));
  const int R = m->dim(0), C = m->dim(1);
  auto out = make_tensor<T>({R, C});
  auto mask = std::make_shared<std::vector<T>>(support_mask.data);
  for (int r = 0; r < R; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (int c = 0; c < C; ++c)
      if ((*mask)[r * C + c] != T(0)) {
        any = true;
        mx = std::max(mx, m->data[r * C + c]);
      }
    if (!any)
      throw std::invalid_argument("rowwise_softmax: row " + std::to_string(r) + " has empty support");
    T denom = 0;
    for (int c = 0; c < C; ++c) {
      if ((*mask)[r * C + c] != T(0)) {
        const T e = std::exp(m->data[r * C + c] - mx);
        out->data[r * C + c] = e;
        denom += e;
      }
    }
    for (int c = 0; c < C; ++c)
      if ((*mask)[r * C + c] != T(0)) out->data[r * C + c] /= denom;
  }
  return tape.record("rowwise_softmax", {m}, out, [m, out, mask, R, C]() {
    if (!wants_grad(m)) return;
    m->ensure_grad();
    for (int r = 0; r < R; ++r) {
      T dot = 0;
      for (int c = 0; c < C; ++c) dot += out->grad[r * C + c] * out->data[r * C + c];
      for (int c = 0; c < C; ++c) {
        if ((*mask)[r * C + c] == T(0)) continue;
        const T y = out->data[r * C + c];
        m->grad[r * C + c] += y * (out->grad[r * C + c] - dot);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// batch normalization over the feature axis of [B, F]
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;  // init 0
  std::vector<T> running_var;   // init 1

  void init(int features) {
    running_mean.assign(static_cast<size_t>(features), T(0));
    running_var.assign(static_cast<size_t>(features), T(1));
  }
};

// Train modes normalize by biased batch statistics; Train additionally blends
// them into the running statistics with the given momentum. Eval normalizes
// by the running statistics.
template <typename T>
TensorPtr<T> batchnorm1d(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& gamma,
                         const TensorPtr<T>& beta, BatchNormState<T>& state, Mode mode,
                         T eps = T(1e-5), T momentum = T(0.1)) {
  if (x->shape.size() != 2) throw std::invalid_argument("batchnorm1d: expected rank-2, got " + shape_str(x->shape));
  const int B = x->dim(0), F = x->dim(1);
  if (gamma->numel() != F || beta->numel() != F)
    throw std::invalid_argument("batchnorm1d: affine parameters do not match F=" + std::to_string(F));
  if (state.running_mean.size() != static_cast<size_t>(F)) state.init(F);
  const bool use_batch = (mode != Mode::Eval);
  if (use_batch && B < 2)
    throw std::invalid_argument("batchnorm1d: train mode needs a batch of at least 2, got " + std::to_string(B));

  auto mean = std::make_shared<std::vector<T>>(static_cast<size_t>(F), T(0));
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(F), T(0));
  auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(B) * F, T(0));

  if (use_batch) {
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f) (*mean)[f] += x->data[b * F + f];
    for (int f = 0; f < F; ++f) (*mean)[f] /= T(B);
    std::vector<T> var(static_cast<size_t>(F), T(0));
    for (int b = 0; b < B; ++b)
      for (int f = 0; f < F; ++f) {
        const T d = x->data[b * F + f] - (*mean)[f];
        var[f] += d * d;
      }
    for (int f = 0; f < F; ++f) {
      var[f] /= T(B);
      (*inv_std)[f] = T(1) / std::sqrt(var[f] + eps);
    }
    if (mode == Mode::Train) {
      for (int f = 0; f < F; ++f) {
        state.running_mean[f] = (T(1) - momentum) * state.running_mean[f] + momentum * (*mean)[f];
        state.running_var[f] = (T(1) - momentum) * state.running_var[f] + momentum * var[f];
      }
    }
  } else {
    for (int f = 0; f < F; ++f) {
      (*mean)[f] = state.running_mean[f];
      (*inv_std)[f] = T(1) / std::sqrt(state.running_var[f] + eps);
    }
  }

  auto out = make_tensor<T>({B, F});
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f) {
      const T xh = (x->data[b * F + f] - (*mean)[f]) * (*inv_std)[f];
      (*xhat)[b * F + f] = xh;
      out->data[b * F + f] = gamma->data[f] * xh + beta->data[f];
    }

  return tape.record("batchnorm1d", {x, gamma, beta}, out,
                     [x, gamma, beta, out, xhat, inv_std, use_batch, B, F]() {
    if (wants_grad(gamma)) {
      gamma->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) gamma->grad[f] += out->grad[b * F + f] * (*xhat)[b * F + f];
    }
    if (wants_grad(beta)) {
      beta->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int f = 0; f < F; ++f) beta->grad[f] += out->grad[b * F + f];
    }
    if (wants_grad(x)) {
      x->ensure_grad();
      if (use_batch) {
        // Differentiate through the batch statistics.
        for (int f = 0; f < F; ++f) {
          T sum_g = 0, sum_gx = 0;
          for (int b = 0; b < B; ++b) {
            const T g = out->grad[b * F + f];
            sum_g += g;
            sum_gx += g * (*xhat)[b * F + f];
          }
          const T mg = sum_g / T(B), mgx = sum_gx / T(B);
          const T scale = gamma->data[f] * (*inv_std)[f];
          for (int b = 0; b < B; ++b) {
            const T g = out->grad[b * F + f];
            x->grad[b * F + f] += scale * (g - mg - (*xhat)[b * F + f] * mgx);
          }
        }
      } else {
        for (int b = 0; b < B; ++b)
          for (int f = 0; f < F; ++f)
            x->grad[b * F + f] += out->grad[b * F + f] * gamma->data[f] * (*inv_std)[f];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// recurrence
// ---------------------------------------------------------------------------

template <typename T>
struct LstmWeights {
  TensorPtr<T> w_input;   // [I, 4H], gate order (input, forget, candidate, output)
  TensorPtr<T> w_hidden;  // [H, 4H]
  TensorPtr<T> bias;      // [4H]
};

template <typename T>
struct LstmState {
  TensorPtr<T> h;
  TensorPtr<T> c;
};

// One gated recurrence step, composed from primitive ops so the tape supplies
// the backward pass: i,f,o = sigmoid, g = tanh, c = f*c_prev + i*g, h = o*tanh(c).
template <typename T>
LstmState<T> lstm_cell(Tape<T>& tape, const TensorPtr<T>& x_t, const TensorPtr<T>& h_prev,
                       const TensorPtr<T>& c_prev, const LstmWeights<T>& w) {
  const int H4 = w.w_input->dim(1);
  if (H4 % 4 != 0) throw std::invalid_argument("lstm_cell: gate dimension must be a multiple of 4");
  const int H = H4 / 4;
  if (h_prev->shape.size() != 2 || h_prev->dim(1) != H || c_prev->shape != h_prev->shape)
    throw std::invalid_argument("lstm_cell: state shapes h=" + shape_str(h_prev->shape) +
                                " c=" + shape_str(c_prev->shape) + " do not match H=" + std::to_string(H));
  auto pre = add(tape, linear(tape, x_t, w.w_input, w.bias), linear(tape, h_prev, w.w_hidden));
  auto gate_i = sigmoid(tape, slice_cols(tape, pre, 0, H));
  auto gate_f = sigmoid(tape, slice_cols(tape, pre, H, 2 * H));
  auto gate_g = tanh(tape, slice_cols(tape, pre, 2 * H, 3 * H));
  auto gate_o = sigmoid(tape, slice_cols(tape, pre, 3 * H, 4 * H));
  auto c = add(tape, mul(tape, gate_f, c_prev), mul(tape, gate_i, gate_g));
  auto h = mul(tape, gate_o, tanh(tape, c));
  return {h, c};
}

// ---------------------------------------------------------------------------
// dropout / losses
// ---------------------------------------------------------------------------

// Inverted dropout: kept entries are scaled by 1/(1-p) in Train mode;
// identity otherwise. The keep mask is drawn once at forward time.
template <typename T>
TensorPtr<T> dropout(Tape<T>& tape, const TensorPtr<T>& x, T p, Mode mode, std::mt19937_64& rng) {
  if (p < T(0) || p >= T(1)) throw std::invalid_argument("dropout: rate must lie in [0,1)");
  if (mode != Mode::Train || p == T(0)) return x;
  auto keep = std::make_shared<std::vector<uint8_t>>(x->data.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const T scale_v = T(1) / (T(1) - p);
  auto out = make_tensor<T>(x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) {
    (*keep)[i] = u(rng) >= static_cast<double>(p) ? 1 : 0;
    out->data[i] = (*keep)[i] ? x->data[i] * scale_v : T(0);
  }
  return tape.record("dropout", {x}, out, [x, out, keep, scale_v]() {
    if (!wants_grad(x)) return;
    x->ensure_grad();
    for (size_t i = 0; i < out->grad.size(); ++i)
      if ((*keep)[i]) x->grad[i] += out->grad[i] * scale_v;
  });
}

// Mean cross-entropy of softmaxed logits against integer labels.
template <typename T>
TensorPtr<T> cross_entropy(Tape<T>& tape, const TensorPtr<T>& logits, const std::vector<int>& labels) {
  if (logits->shape.size() != 2) throw std::invalid_argument("cross_entropy: expected rank-2 logits");
  const int B = logits->dim(0), K = logits->dim(1);
  if (static_cast<int>(labels.size()) != B)
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                                std::to_string(B));
  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(B) * K);
  T loss = 0;
  for (int b = 0; b < B; ++b) {
    const int y = labels[static_cast<size_t>(b)];
    if (y < 0 || y >= K)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " outside 0.." + std::to_string(K - 1));
    const T* row = &logits->data[b * K];
    T mx = row[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    T denom = 0;
    for (int k = 0; k < K; ++k) denom += std::exp(row[k] - mx);
    const T logz = std::log(denom) + mx;
    for (int k = 0; k < K; ++k) (*probs)[b * K + k] = std::exp(row[k] - logz);
    loss -= row[y] - logz;
  }
  auto out = scalar_tensor<T>(loss / T(B));
  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  return tape.record("cross_entropy", {logits}, out, [logits, out, probs, labels_copy, B, K]() {
    if (!wants_grad(logits)) return;
    logits->ensure_grad();
    const T g = out->grad[0] / T(B);
    for (int b = 0; b < B; ++b) {
      const int y = (*labels_copy)[static_cast<size_t>(b)];
      for (int k = 0; k < K; ++k)
        logits->grad[b * K + k] += g * ((*probs)[b * K + k] - (k == y ? T(1) : T(0)));
    }
  });
}

// Mean squared error over all entries.
template <typename T>
TensorPtr<T> mse_loss(Tape<T>& tape, const TensorPtr<T>& pred, const TensorPtr<T>& target) {
  detail::check_same_shape("mse_loss", pred, target);
  const int64_t n = pred->numel();
  T acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    const T d = pred->data[static_cast<size_t>(i)] - target->data[static_cast<size_t>(i)];
    acc += d * d;
  }
  auto out = scalar_tensor<T>(acc / T(n));
  return tape.record("mse_loss", {pred, target}, out, [pred, target, out, n]() {
    const T g = out->grad[0] * T(2) / T(n);
    if (wants_grad(pred)) {
      pred->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        pred->grad[static_cast<size_t>(i)] +=
            g * (pred->data[static_cast<size_t>(i)] - target->data[static_cast<size_t>(i)]);
    }
    if (wants_grad(target)) {
      target->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        target->grad[static_cast<size_t>(i)] -=
            g * (pred->data[static_cast<size_t>(i)] - target->data[static_cast<size_t>(i)]);
    }
  });
}

}  // namespace mieeg
