// Per-operation gradient checks on small seeded instances.
#pragma once

#include "mieeg/gradcheck.hpp"
#include "mieeg/rng.hpp"

namespace mieeg {

namespace detail {

// Reduce an op output to a scalar through a fixed random readout so that
// index-permutation mistakes cannot cancel out in a plain sum.
template <typename T>
TensorPtr<T> readout(Tape<T>& tape, const TensorPtr<T>& out, const TensorPtr<T>& weights) {
  return sum_all(tape, mul(tape, out, weights));
}

template <typename T>
TensorPtr<T> seeded_param(std::vector<int> shape, std::mt19937_64& rng, T lo = T(-1), T hi = T(1)) {
  auto t = make_tensor<T>(std::move(shape), true);
  fill_uniform(*t, rng, lo, hi);
  return t;
}

template <typename T>
TensorPtr<T> seeded_const(std::vector<int> shape, std::mt19937_64& rng, T lo = T(-1), T hi = T(1)) {
  auto t = make_tensor<T>(std::move(shape), false);
  fill_uniform(*t, rng, lo, hi);
  return t;
}

}  // namespace detail

template <typename T>
std::vector<OpCheck<T>> op_gradcheck_registry(uint64_t seed) {
  using detail::readout;
  using detail::seeded_const;
  using detail::seeded_param;

  std::mt19937_64 rng(seed);
  std::vector<OpCheck<T>> checks;
  auto push = [&checks](std::string name, std::function<TensorPtr<T>(Tape<T>&)> build,
                        std::vector<TensorPtr<T>> params) {
    GradCheckSpec<T> spec;
    spec.build_loss = std::move(build);
    spec.params = std::move(params);
    checks.push_back(OpCheck<T>{std::move(name), std::move(spec)});
  };

  {
    auto a = seeded_param<T>({2, 3}, rng), b = seeded_param<T>({2, 3}, rng);
    auto w = seeded_const<T>({2, 3}, rng);
    push("add", [=](Tape<T>& t) { return readout(t, add(t, a, b), w); }, {a, b});
  }
  {
    auto a = seeded_param<T>({2, 3}, rng), b = seeded_param<T>({2, 3}, rng);
    auto w = seeded_const<T>({2, 3}, rng);
    push("mul", [=](Tape<T>& t) { return readout(t, mul(t, a, b), w); }, {a, b});
  }
  {
    auto a = seeded_param<T>({3, 2}, rng);
    auto w = seeded_const<T>({3, 2}, rng);
    push("scale", [=](Tape<T>& t) { return readout(t, scale(t, a, T(-1.7)), w); }, {a});
  }
  {
    // Keep entries away from the ReLU kink, where the two-sided difference is invalid.
    auto a = make_tensor<T>({2, 5}, true);
    fill_uniform(*a, rng, T(-1), T(1));
    for (auto& v : a->data)
      if (std::abs(v) < T(0.05)) v += (v >= 0 ? T(0.1) : T(-0.1));
    auto w = seeded_const<T>({2, 5}, rng);
    push("relu", [=](Tape<T>& t) { return readout(t, relu(t, a), w); }, {a});
  }
  {
    auto a = seeded_param<T>({2, 4}, rng);
    auto w = seeded_const<T>({2, 4}, rng);
    push("sigmoid", [=](Tape<T>& t) { return readout(t, sigmoid(t, a), w); }, {a});
  }
  {
    auto a = seeded_param<T>({2, 4}, rng);
    auto w = seeded_const<T>({2, 4}, rng);
    push("tanh", [=](Tape<T>& t) { return readout(t, tanh(t, a), w); }, {a});
  }
  {
    auto a = seeded_param<T>({3, 4}, rng);
    push("sum_all", [=](Tape<T>& t) { return sum_all(t, a); }, {a});
  }
  {
    auto a = seeded_param<T>({2, 6}, rng);
    auto w = seeded_const<T>({3, 4}, rng);
    push("reshape", [=](Tape<T>& t) { return readout(t, reshape(t, a, {3, 4}), w); }, {a});
  }
  {
    auto a = seeded_param<T>({3, 8}, rng);
    auto w = seeded_const<T>({3, 4}, rng);
    push("slice_cols", [=](Tape<T>& t) { return readout(t, slice_cols(t, a, 2, 6), w); }, {a});
  }
  {
    auto a = seeded_param<T>({2, 2, 5}, rng), b = seeded_param<T>({2, 3, 5}, rng);
    auto w = seeded_const<T>({2, 5, 5}, rng);
    push("concat_channels",
         [=](Tape<T>& t) { return readout(t, concat_channels(t, {a, b}), w); }, {a, b});
  }
  {
    auto s0 = seeded_param<T>({2, 3}, rng), s1 = seeded_param<T>({2, 3}, rng),
         s2 = seeded_param<T>({2, 3}, rng);
    auto w = seeded_const<T>({2, 3, 3}, rng);
    push("stack_rows",
         [=](Tape<T>& t) { return readout(t, stack_rows(t, {s0, s1, s2}), w); }, {s0, s1, s2});
  }
  {
    auto a = seeded_param<T>({2, 3, 2}, rng), b = seeded_param<T>({2, 3, 4}, rng);
    auto w = seeded_const<T>({2, 3, 6}, rng);
    push("concat_last", [=](Tape<T>& t) { return readout(t, concat_last(t, a, b), w); }, {a, b});
  }
  {
    auto a = seeded_param<T>({2, 4, 3}, rng);
    auto w = seeded_const<T>({2, 3}, rng);
    push("select_step", [=](Tape<T>& t) { return readout(t, select_step(t, a, 2), w); }, {a});
  }
  {
    auto a = seeded_param<T>({2, 3, 4}, rng);
    auto w = seeded_const<T>({2, 4, 3}, rng);
    push("transpose_cn", [=](Tape<T>& t) { return readout(t, transpose_cn(t, a), w); }, {a});
  }
  {
    auto x = seeded_param<T>({3, 4}, rng);
    auto W = seeded_param<T>({4, 5}, rng);
    auto b = seeded_param<T>({5}, rng);
    auto w = seeded_const<T>({3, 5}, rng);
    push("linear", [=](Tape<T>& t) { return readout(t, linear(t, x, W, b), w); }, {x, W, b});
  }
  {
    auto A = seeded_param<T>({4, 4}, rng);
    auto H = seeded_param<T>({2, 4, 3}, rng);
    auto w = seeded_const<T>({2, 4, 3}, rng);
    push("adj_mix", [=](Tape<T>& t) { return readout(t, adj_mix(t, A, H), w); }, {A, H});
  }
  {
    auto alpha = seeded_param<T>({2, 4}, rng);
    auto H = seeded_param<T>({2, 4, 3}, rng);
    auto w = seeded_const<T>({2, 3}, rng);
    push("node_weighted_sum",
         [=](Tape<T>& t) { return readout(t, node_weighted_sum(t, alpha, H), w); }, {alpha, H});
  }
  {
    auto a = seeded_param<T>({2, 3, 5}, rng);
    auto w = seeded_const<T>({2, 3}, rng);
    push("mean_over_last", [=](Tape<T>& t) { return readout(t, mean_over_last(t, a), w); }, {a});
  }
  {
    // Positive draws keep every gradient entry bounded away from zero, which
    // the single-precision check needs (relative error of a vanishing
    // gradient is all roundoff).
    auto x = seeded_param<T>({2, 3, 7}, rng, T(0.2), T(1.0));
    auto k = seeded_param<T>({4, 3, 3}, rng, T(0.2), T(1.0));
    auto b = seeded_param<T>({4}, rng, T(0.2), T(1.0));
    auto w = seeded_const<T>({2, 4, 7}, rng, T(0.5), T(1.5));
    push("conv1d", [=](Tape<T>& t) { return readout(t, conv1d(t, x, k, b, 1), w); }, {x, k, b});
  }
  {
    auto z = seeded_param<T>({2, 3, 5}, rng, T(0.2), T(1.0));
    auto k = seeded_param<T>({3, 4, 3}, rng, T(0.2), T(1.0));
    auto b = seeded_param<T>({4}, rng, T(0.2), T(1.0));
    auto w = seeded_const<T>({2, 4, 7}, rng, T(0.5), T(1.5));
    push("conv_transpose1d",
         [=](Tape<T>& t) { return readout(t, conv_transpose1d(t, z, k, b), w); }, {z, k, b});
  }
  {
    auto m = seeded_param<T>({3, 4}, rng);
    auto mask = tensor_of<T>({3, 4}, {T(0), T(1), T(1), T(1),  //
                                        T(1), T(0), T(1), T(1),  //
                                        T(1), T(1), T(0), T(1)});
    auto w = seeded_const<T>({3, 4}, rng);
    push("rowwise_softmax",
         [=](Tape<T>& t) { return readout(t, rowwise_softmax(t, m, *mask), w); }, {m});
  }
  {
    auto x = seeded_param<T>({4, 3}, rng);
    auto gamma = seeded_param<T>({3}, rng, T(0.5), T(1.5));
    auto beta = seeded_param<T>({3}, rng);
    auto w = seeded_const<T>({4, 3}, rng);
    auto state = std::make_shared<BatchNormState<T>>();
    push("batchnorm1d",
         [=](Tape<T>& t) {
           return readout(t, batchnorm1d(t, x, gamma, beta, *state, Mode::TrainFrozen), w);
         },
         {x, gamma, beta});
  }
  {
    const int B = 2, I = 3, H = 4;
    auto x = seeded_param<T>({B, I}, rng, T(0.1), T(0.9));
    auto h0 = seeded_param<T>({B, H}, rng, T(0.1), T(0.9));
    auto c0 = seeded_param<T>({B, H}, rng, T(0.1), T(0.9));
    auto wi = seeded_param<T>({I, 4 * H}, rng, T(0.1), T(0.9));
    auto wh = seeded_param<T>({H, 4 * H}, rng, T(0.1), T(0.9));
    auto b = seeded_param<T>({4 * H}, rng, T(0.1), T(0.9));
    auto wread_h = seeded_const<T>({B, H}, rng, T(0.5), T(1.5));
    auto wread_c = seeded_const<T>({B, H}, rng, T(0.5), T(1.5));
    push("lstm_cell",
         [=](Tape<T>& t) {
           auto st = lstm_cell(t, x, h0, c0, LstmWeights<T>{wi, wh, b});
           return add(t, readout(t, st.h, wread_h), readout(t, st.c, wread_c));
         },
         {x, h0, c0, wi, wh, b});
  }
  {
    // The keep mask is redrawn from a fixed seed on every evaluation, which
    // makes the builder deterministic as finite differencing requires.
    auto x = seeded_param<T>({3, 5}, rng);
    auto w = seeded_const<T>({3, 5}, rng);
    push("dropout",
         [=](Tape<T>& t) {
           std::mt19937_64 mask_rng(1234);
           return readout(t, dropout(t, x, T(0.3), Mode::Train, mask_rng), w);
         },
         {x});
  }
  {
    auto logits = seeded_param<T>({3, 4}, rng);
    std::vector<int> labels{0, 2, 3};
    push("cross_entropy", [=](Tape<T>& t) { return cross_entropy(t, logits, labels); }, {logits});
  }
  {
    auto pred = seeded_param<T>({2, 3}, rng);
    auto target = seeded_param<T>({2, 3}, rng);
    push("mse_loss", [=](Tape<T>& t) { return mse_loss(t, pred, target); }, {pred, target});
  }
  return checks;
}

}  // namespace mieeg
