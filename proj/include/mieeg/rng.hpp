// Seeded parameter fillers. All draws go through one mt19937_64 stream so a
// fixed seed reproduces every array bit for bit within a build.
#pragma once

#include <cmath>
#include <random>

#include "mieeg/tensor.hpp"

namespace mieeg {

template <typename T>
void fill_uniform(Tensor<T>& t, std::mt19937_64& rng, T lo, T hi) {
  std::uniform_real_distribution<T> d(lo, hi);
  for (auto& v : t.data) v = d(rng);
}

template <typename T>
void fill_normal(Tensor<T>& t, std::mt19937_64& rng, T mean, T stddev) {
  std::normal_distribution<T> d(mean, stddev);
  for (auto& v : t.data) v = d(rng);
}

// Zero-mean normal with variance 2/fan_in (convolution kernels).
template <typename T>
void fill_kaiming_normal(Tensor<T>& t, std::mt19937_64& rng, int fan_in) {
  fill_normal(t, rng, T(0), std::sqrt(T(2) / T(fan_in)));
}

// Uniform on +-sqrt(6/(fan_in+fan_out)) (graph, recurrent, linear, attention).
template <typename T>
void fill_xavier_uniform(Tensor<T>& t, std::mt19937_64& rng, int fan_in, int fan_out) {
  const T bound = std::sqrt(T(6) / T(fan_in + fan_out));
  fill_uniform(t, rng, -bound, bound);
}

}  // namespace mieeg
