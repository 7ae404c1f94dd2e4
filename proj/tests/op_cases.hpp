#pragma once

#include <array>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "discsent/gradcheck.hpp"
#include "discsent/rng.hpp"
#include "discsent/tape.hpp"

namespace discsent::test {

template <typename T>
num::Tensor<T> random_tensor(num::Shape shape, SplitMix64& rng, double scale = 1.0) {
  num::Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.next_uniform(-scale, scale));
  return t;
}

/// Random parameters and one scalar loss per tape operation; each loss is a
/// random projection of the op's output, or the op itself for softmax_xent.
class OpCases {
 public:
  using Tape = num::Tape<double>;
  using Var = Tape::Var;

  explicit OpCases(std::uint64_t seed) : seed_(seed), rng_(seed) {
    auto& a = make("a", {3, 4});
    auto& b = make("b", {4, 2});
    auto& c = make("c", {3, 4});
    auto& bias = make("bias", {4});
    auto& table = make("table", {5, 4});
    auto& m = make("m", {2 * 4, 4});
    auto& p = make("p", {2, 4});
    auto& g = make("g", {6, 4});
    auto& logits = make("logits", {3, 5}, 3.0);
    const auto pr = [this](Tape& t, Var v) { return project(t, v); };
    cases_ = {
        {"matmul", [=, &a, &b](Tape& t) { return pr(t, t.matmul(t.param(a), t.param(b))); }},
        {"add", [=, &a, &c](Tape& t) { return pr(t, t.add(t.param(a), t.param(c))); }},
        {"sub", [=, &a, &c](Tape& t) { return pr(t, t.sub(t.param(a), t.param(c))); }},
        {"mul", [=, &a, &c](Tape& t) { return pr(t, t.mul(t.param(a), t.param(c))); }},
        {"add_bias", [=, &a, &bias](Tape& t) { return pr(t, t.add_bias(t.param(a), t.param(bias))); }},
        {"one_minus", [=, &a](Tape& t) { return pr(t, t.one_minus(t.param(a))); }},
        {"sigmoid", [=, &a](Tape& t) { return pr(t, t.sigmoid(t.param(a))); }},
        {"tanh", [=, &a](Tape& t) { return pr(t, t.tanh(t.param(a))); }},
        {"gather_rows", [=, &table](Tape& t) { return pr(t, t.gather_rows(t.param(table), {4, -1, 0, 4, 2})); }},
        {"slice_rows", [=, &a](Tape& t) { return pr(t, t.slice_rows(t.param(a), 1, 2)); }},
        {"concat_cols",
         [=, &a, &c](Tape& t) {
           const std::array<Var, 3> parts = {t.param(a), t.param(c), t.param(a)};
           return pr(t, t.concat_cols(parts));
         }},
        {"segment_sum", [=, &g](Tape& t) { return pr(t, t.segment_sum(t.param(g), {0, 2, 2, 6})); }},
        {"select_rows", [=, &a, &c](Tape& t) { return pr(t, t.select_rows(t.param(a), t.param(c), {1, 0, 1})); }},
        {"bilinear",
         [=, &p, &m, &c](Tape& t) { return pr(t, t.bilinear(t.param(p), t.param(m), t.slice_rows(t.param(c), 0, 2))); }},
        {"group_dot", [=, &p, &g](Tape& t) { return pr(t, t.group_dot(t.param(p), t.slice_rows(t.param(g), 0, 6), 3)); }},
        {"softmax_xent", [&logits](Tape& t) { return t.softmax_xent(t.param(logits), {0, 4, 2}); }},
    };
  }
  OpCases(const OpCases&) = delete;
  OpCases& operator=(const OpCases&) = delete;

  const std::vector<std::pair<std::string, num::LossBuilder>>& cases() const { return cases_; }

  std::vector<num::Parameter<double>*> params() {
    std::vector<num::Parameter<double>*> out;
    for (auto& p : store_) out.push_back(&p);
    return out;
  }

 private:
  num::Parameter<double>& make(const std::string& name, num::Shape shape, double scale = 1.0) {
    store_.emplace_back(name, random_tensor<double>(std::move(shape), rng_, scale));
    return store_.back();
  }

  Var project(Tape& t, Var v) const {
    SplitMix64 rng(seed_);
    return t.inner(v, random_tensor<double>(t.value(v).shape(), rng));
  }

  std::uint64_t seed_;
  SplitMix64 rng_;
  std::deque<num::Parameter<double>> store_;
  std::vector<std::pair<std::string, num::LossBuilder>> cases_;
};

}  // namespace discsent::test
