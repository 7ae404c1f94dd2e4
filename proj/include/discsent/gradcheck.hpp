#pragma once

#include <functional>
#include <span>
#include <string>

#include "discsent/tape.hpp"

namespace discsent::num {

struct GradCheckResult {
  double max_relative_error = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t coordinates = 0;

  bool passed(double threshold = 1e-4) const { return max_relative_error < threshold; }
};

/// Builds a scalar loss on a fresh tape.
using LossBuilder = std::function<Tape<double>::Var(Tape<double>&)>;

/// Compares tape gradients of every coordinate of `params` against central
/// differences (f(θ+h) − f(θ−h)) / 2h. Relative error per coordinate is
/// |a − n| / max(|a|, |n|, 1e-8). Parameters are restored afterwards and their
/// gradients are left zeroed.
GradCheckResult gradient_check(const LossBuilder& loss, std::span<Parameter<double>* const> params, double h = 1e-5);

using ReferenceBuilder = std::function<Tape<long double>::Var(Tape<long double>&)>;

/// Same comparison with the finite differences taken in extended precision.
/// `reference` mirrors `params` (same order and shapes) and is what
/// `reference_loss` reads; its values are overwritten with the 64-bit values
/// before checking. Analytic gradients still come from the 64-bit tape.
GradCheckResult gradient_check(const LossBuilder& loss, std::span<Parameter<double>* const> params,
                               const ReferenceBuilder& reference_loss,
                               std::span<Parameter<long double>* const> reference, double h = 1e-5);

}  // namespace discsent::num
