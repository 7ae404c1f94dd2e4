#include "discsent/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "discsent/error.hpp"

namespace discsent::num {

namespace {

template <typename T>
T evaluate(const std::function<typename Tape<T>::Var(Tape<T>&)>& loss) {
  Tape<T> tape;
  return tape.value(loss(tape))[0];
}

// `numeric(k, i, h)` returns the central difference for coordinate i of params[k].
template <typename Numeric>
GradCheckResult compare(const LossBuilder& loss, std::span<Parameter<double>* const> params, double h,
                        Numeric numeric) {
  for (auto* p : params) p->grad.fill(0.0);
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    if (!p->trainable) continue;
    const Tensor<double> analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double n = numeric(k, i, h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
      const double rel = std::abs(a - n) / denom;
      ++result.coordinates;
      if (rel > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = n;
      }
    }
    p->grad.fill(0.0);
    if (p->sparse_rows) std::fill(p->touched_rows.begin(), p->touched_rows.end(), 0);
  }
  return result;
}

}  // namespace

GradCheckResult gradient_check(const LossBuilder& loss, std::span<Parameter<double>* const> params, double h) {
  return compare(loss, params, h, [&](std::size_t k, std::size_t i, double step) {
    auto& v = params[k]->value;
    const double saved = v[i];
    v[i] = saved + step;
    const double plus = evaluate<double>(loss);
    v[i] = saved - step;
    const double minus = evaluate<double>(loss);
    v[i] = saved;
    return (plus - minus) / (2 * step);
  });
}

GradCheckResult gradient_check(const LossBuilder& loss, std::span<Parameter<double>* const> params,
                               const ReferenceBuilder& reference_loss,
                               std::span<Parameter<long double>* const> reference, double h) {
  if (reference.size() != params.size()) throw ShapeError("gradient_check: reference parameter count differs");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (reference[k]->value.shape() != params[k]->value.shape()) {
      throw ShapeError("gradient_check: reference shape differs for '" + params[k]->name + "'");
    }
    reference[k]->value = params[k]->value.cast<long double>();
  }
  return compare(loss, params, h, [&](std::size_t k, std::size_t i, double step) {
    auto& v = reference[k]->value;
    const long double saved = v[i];
    v[i] = saved + step;
    const long double plus = evaluate<long double>(reference_loss);
    v[i] = saved - step;
    const long double minus = evaluate<long double>(reference_loss);
    v[i] = saved;
    return static_cast<double>((plus - minus) / (2.0L * step));
  });
}

}  // namespace discsent::num
