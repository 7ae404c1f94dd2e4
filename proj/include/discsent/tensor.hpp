#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace discsent::num {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& s);

/// Dense row-major array. Rank-1 tensors act as a single row in 2-D operations.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values);
  static Tensor vector(std::initializer_list<T> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const { return shape_.size() >= 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const { return std::span<const T>(data_).subspan(r * cols(), cols()); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  void fill(T v);
  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    if (shape_.empty()) return Tensor<U>();
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// C = A·B with ascending-k accumulation. Throws ShapeError on inner-dim mismatch.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

namespace kernel {

// Raw row-major kernels. All accumulate into `c` with ascending inner index.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);  // C += A·B
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);  // C += A·Bᵀ, B is [n,k]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);  // C += Aᵀ·B, A is [k,m]

}  // namespace kernel

template <typename T>
T sigmoid(T x);

/// Reduction type for losses: at least double.
template <typename T>
using Accumulator = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>;

/// Loss and logit gradient of softmax cross-entropy for one row.
template <typename T>
struct CrossEntropy {
  T loss;
  std::vector<T> dlogits;
};

/// loss = logsumexp(logits) - logits[target], with max subtraction.
/// Throws IndexError when target is out of range.
template <typename T>
CrossEntropy<T> softmax_cross_entropy(std::span<const T> logits, std::size_t target);

}  // namespace discsent::num
