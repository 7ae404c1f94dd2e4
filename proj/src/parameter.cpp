#include "discsent/parameter.hpp"

#include <algorithm>
#include <cmath>

#include "discsent/error.hpp"

namespace discsent::num {

template <typename T>
Parameter<T>::Parameter(std::string name_, Tensor<T> init, bool trainable_)
    : name(std::move(name_)),
      value(std::move(init)),
      grad(value.shape()),
      accumulator(value.shape()),
      trainable(trainable_) {}

template <typename T>
void Parameter<T>::zero_grad() {
  if (sparse_rows) {
    const std::size_t cols = grad.cols();
    for (std::size_t r = 0; r < touched_rows.size(); ++r) {
      if (!touched_rows[r]) continue;
      std::fill_n(grad.data() + r * cols, cols, T(0));
      touched_rows[r] = 0;
    }
  } else {
    grad.fill(T(0));
  }
}

namespace {

template <typename T>
void update_range(Parameter<T>& p, std::size_t begin, std::size_t end, double lr, double eps) {
  T* v = p.value.data();
  T* g = p.grad.data();
  T* acc = p.accumulator.data();
  const T lr_t = static_cast<T>(lr);
  const T eps_t = static_cast<T>(eps);
  for (std::size_t i = begin; i < end; ++i) {
    const T gi = g[i];
    acc[i] += gi * gi;
    v[i] -= lr_t * gi / (std::sqrt(acc[i]) + eps_t);
    g[i] = T(0);
  }
}

}  // namespace

template <typename T>
void adagrad_update(Parameter<T>& p, double lr, double eps) {
  const auto fail = [&p] { throw NumericsError("non-finite gradient in parameter '" + p.name + "'"); };
  if (p.sparse_rows) {
    const std::size_t cols = p.value.cols();
    for (std::size_t r = 0; r < p.touched_rows.size(); ++r) {
      if (!p.touched_rows[r]) continue;
      for (T g : p.grad.row(r)) {
        if (!std::isfinite(g)) fail();
      }
    }
    for (std::size_t r = 0; r < p.touched_rows.size(); ++r) {
      if (!p.touched_rows[r]) continue;
      update_range(p, r * cols, (r + 1) * cols, lr, eps);
      p.touched_rows[r] = 0;
    }
  } else {
    if (!p.grad.all_finite()) fail();
    update_range(p, 0, p.value.size(), lr, eps);
  }
}

template struct Parameter<float>;
template struct Parameter<double>;
template struct Parameter<long double>;
template void adagrad_update(Parameter<float>&, double, double);
template void adagrad_update(Parameter<double>&, double, double);

}  // namespace discsent::num
