#include "discsent/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "discsent/error.hpp"

namespace discsent::num {

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {
std::size_t volume(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(volume(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != volume(shape_)) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(data_.size()) + " values");
  }
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
  return Tensor({rows, cols}, std::vector<T>(values));
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::initializer_list<T> values) {
  return Tensor({values.size()}, std::vector<T>(values));
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

namespace kernel {

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* ap = a + p * m;
    const T* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = ap[i];
      if (av == T(0)) continue;
      T* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template void gemm_nn<float>(const float*, const float*, float*, std::size_t, std::size_t, std::size_t);
template void gemm_nn<double>(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
template void gemm_nt<float>(const float*, const float*, float*, std::size_t, std::size_t, std::size_t);
template void gemm_nt<double>(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
template void gemm_tn<float>(const float*, const float*, float*, std::size_t, std::size_t, std::size_t);
template void gemm_tn<double>(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
template void gemm_nn<long double>(const long double*, const long double*, long double*, std::size_t, std::size_t,
                                   std::size_t);
template void gemm_nt<long double>(const long double*, const long double*, long double*, std::size_t, std::size_t,
                                   std::size_t);
template void gemm_tn<long double>(const long double*, const long double*, long double*, std::size_t, std::size_t,
                                   std::size_t);

}  // namespace kernel

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows() || b.rank() != 2) {
    throw ShapeError("matmul shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor<T> c({a.rows(), b.cols()});
  kernel::gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
CrossEntropy<T> softmax_cross_entropy(std::span<const T> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw IndexError("target " + std::to_string(target) + " out of range for " + std::to_string(logits.size()) +
                     " classes");
  }
  using Acc = Accumulator<T>;
  const Acc max = *std::max_element(logits.begin(), logits.end());
  Acc sum = 0;
  for (T v : logits) sum += std::exp(static_cast<Acc>(v) - max);
  const Acc lse = max + std::log(sum);
  CrossEntropy<T> out{static_cast<T>(lse - static_cast<Acc>(logits[target])), std::vector<T>(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.dlogits[i] = static_cast<T>(std::exp(static_cast<Acc>(logits[i]) - lse) - (i == target ? Acc(1) : Acc(0)));
  }
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tensor<long double>;
template Tensor<long double> matmul(const Tensor<long double>&, const Tensor<long double>&);
template long double sigmoid(long double);
template CrossEntropy<long double> softmax_cross_entropy(std::span<const long double>, std::size_t);
template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);
template float sigmoid(float);
template double sigmoid(double);
template CrossEntropy<float> softmax_cross_entropy(std::span<const float>, std::size_t);
template CrossEntropy<double> softmax_cross_entropy(std::span<const double>, std::size_t);

}  // namespace discsent::num
