#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "discsent/tensor.hpp"

namespace discsent::num {

/// A trainable tensor with its gradient and AdaGrad accumulator.
template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor<T> init, bool trainable = true);

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> accumulator;
  bool trainable = true;

  /// When enabled, gradient writers mark rows in `touched_rows` and the update
  /// visits only those rows. Untouched rows have zero gradient, so the result
  /// equals the dense update.
  bool sparse_rows = false;
  std::vector<std::uint8_t> touched_rows;

  void enable_sparse_rows() {
    sparse_rows = true;
    touched_rows.assign(value.rows(), 0);
  }
  void zero_grad();
  void mark_row(std::size_t r) {
    if (sparse_rows) touched_rows[r] = 1;
  }
};

inline constexpr double kAdagradEps = 1e-8;

/// accumulator += grad²; value -= lr·grad / (√accumulator + eps); grad = 0.
/// Throws NumericsError naming the parameter if the gradient is not finite.
template <typename T>
void adagrad_update(Parameter<T>& p, double lr, double eps = kAdagradEps);

}  // namespace discsent::num
