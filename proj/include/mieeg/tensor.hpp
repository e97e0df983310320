// Reverse-mode autodiff core: flat row-major tensors plus an operation tape.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mieeg {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;           // row-major, size == product(shape)
  bool requires_grad = false;    // trainable leaf
  bool needs_grad = false;       // participates in backward (derived)
  std::vector<T> grad;           // empty until backward touches this tensor

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<T>>();
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive, got shape " + shape_str(shape));
    n *= d;
  }
  t->shape = std::move(shape);
  t->data.assign(static_cast<size_t>(n), T(0));
  t->requires_grad = requires_grad;
  t->needs_grad = requires_grad;
  return t;
}

template <typename T>
TensorPtr<T> tensor_of(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
  auto t = make_tensor<T>(std::move(shape), requires_grad);
  if (static_cast<int64_t>(values.size()) != t->numel())
    throw std::invalid_argument("tensor data size " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(t->shape));
  t->data = std::move(values);
  return t;
}

template <typename T>
TensorPtr<T> scalar_tensor(T v) {
  return tensor_of<T>({1}, {v});
}

// Whether backward must write a gradient into this tensor.
template <typename T>
inline bool wants_grad(const TensorPtr<T>& t) {
  return t->requires_grad || t->needs_grad;
}

// Ordered record of executed operations. Nodes are appended in execution
// order, so every node's inputs precede it; backward walks the record once
// in reverse. One tape per computation graph, single-threaded.
template <typename T>
class Tape {
 public:
  struct Node {
    const char* op;
    std::vector<TensorPtr<T>> inputs;
    TensorPtr<T> output;
    std::function<void()> backward;  // accumulates output->grad into input grads
  };

  TensorPtr<T> record(const char* op, std::vector<TensorPtr<T>> inputs, TensorPtr<T> output,
                      std::function<void()> backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || wants_grad(in);
    output->needs_grad = needs;
    nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(backward)});
    return nodes_.back().output;
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates chain-rule contributions in
  // reverse topological order. Tensors consumed by several nodes receive the
  // sum of their branch gradients.
  void backward(const TensorPtr<T>& loss) {
    if (loss->numel() != 1)
      throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(loss->shape));
    loss->ensure_grad();
    loss->grad[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!it->output->needs_grad && !it->output->requires_grad) continue;
      if (it->output->grad.empty()) continue;  // never reached from the loss
      it->backward();
    }
  }

  size_t size() const { return nodes_.size(); }
  const Node& node(size_t i) const { return nodes_.at(i); }

 private:
  std::vector<Node> nodes_;
};

// Helpers shared by op implementations.
template <typename T>
inline void accumulate_needs_grad(const TensorPtr<T>& t) {
  t->ensure_grad();
}

}  // namespace mieeg
