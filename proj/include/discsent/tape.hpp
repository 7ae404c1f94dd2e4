#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "discsent/parameter.hpp"
#include "discsent/tensor.hpp"

namespace discsent::num {

/// Reverse-mode gradient tape. Each operation computes its value eagerly and
/// records a backward rule; backward() replays the rules in reverse order.
/// Parameter gradients accumulate directly into Parameter::grad. A tape is
/// single-use: build, optionally call backward once, discard.
///
/// All 2-D operations treat rank-1 values as one row.
template <typename T>
class Tape {
 public:
  struct Var {
    std::uint32_t id = UINT32_MAX;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value);
  /// Constant that refers to `value` without copying; `value` must outlive the tape.
  Var constant_ref(const Tensor<T>& value);
  /// Leaf bound to `p`; gradients flow only if p.trainable.
  Var param(Parameter<T>& p);
  /// Read-only leaf; never receives gradients.
  Var param(const Parameter<T>& p) { return constant_ref(p.value); }

  const Tensor<T>& value(Var v) const;
  /// Gradient of a non-parameter node after backward(); zero-sized if unreached.
  const Tensor<T>& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  /// a[m,n] + bias[n] broadcast over rows.
  Var add_bias(Var a, Var bias);
  Var one_minus(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);

  /// Rows of `table` by index; index -1 yields a zero row.
  Var gather_rows(Var table, std::vector<std::int64_t> index);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  /// Row sums over segments [offsets[i], offsets[i+1]).
  Var segment_sum(Var a, std::vector<std::size_t> offsets);
  /// Row r of the result is fresh[r] where keep_fresh[r], else prev[r].
  Var select_rows(Var fresh, Var prev, std::vector<std::uint8_t> keep_fresh);

  /// out[b,k] = a[b]ᵀ · M_k · c[b], with M_k the k-th [D,D] row block of m[K·D, D].
  Var bilinear(Var a, Var m, Var c);
  /// out[b,g] = p[b] · c[b·groups + g].
  Var group_dot(Var p, Var c, std::size_t groups);

  /// Mean softmax cross-entropy over rows of logits[B,K]; scalar result.
  Var softmax_xent(Var logits, std::vector<std::size_t> targets);
  /// Σ a ⊙ weights, scalar result.
  Var inner(Var a, Tensor<T> weights);

  /// Seeds d(loss)=1 and runs every recorded backward rule.
  void backward(Var loss);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    const Tensor<T>* external = nullptr;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  Var push(Tensor<T> value, bool requires_grad);
  Node& node(Var v) { return nodes_.at(v.id); }
  const Node& node(Var v) const { return nodes_.at(v.id); }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  /// Gradient buffer of v, allocated as zeros on first use.
  Tensor<T>& grad_ref(Var v);
  bool has_grad(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace discsent::num
