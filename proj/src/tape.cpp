#include "discsent/tape.hpp"

#include <algorithm>
#include <cmath>

#include "discsent/error.hpp"

namespace discsent::num {

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.size() != b.size() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace

template <typename T>
auto Tape<T>::push(Tensor<T> value, bool requires_grad) -> Var {
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, requires_grad, {}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
auto Tape<T>::constant(Tensor<T> value) -> Var {
  return push(std::move(value), false);
}

template <typename T>
auto Tape<T>::param(Parameter<T>& p) -> Var {
  nodes_.push_back(Node{{}, {}, &p, nullptr, p.trainable, {}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
auto Tape<T>::constant_ref(const Tensor<T>& value) -> Var {
  nodes_.push_back(Node{{}, {}, nullptr, &value, false, {}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  const Node& n = node(v);
  if (n.param) return n.param->value;
  return n.external ? *n.external : n.value;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  return n.param ? n.param->grad : n.grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_ref(Var v) {
  Node& n = node(v);
  if (n.param) {
    if (n.param->sparse_rows) std::fill(n.param->touched_rows.begin(), n.param->touched_rows.end(), 1);
    return n.param->grad;
  }
  if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
bool Tape<T>::has_grad(Var v) const {
  const Node& n = node(v);
  return n.param != nullptr || (!n.value.empty() && n.grad.size() == n.value.size());
}

template <typename T>
auto Tape<T>::matmul(Var a, Var b) -> Var {
  const auto& av = value(a);
  const auto& bv = value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul shape mismatch: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<T> out({m, n});
  kernel::gemm_nn(av.data(), bv.data(), out.data(), m, k, n);
  Var o = push(std::move(out), requires_grad(a) || requires_grad(b));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, b, o, m, k, n] {
      const auto& g = grad(o);
      if (requires_grad(a)) kernel::gemm_nt(g.data(), value(b).data(), grad_ref(a).data(), m, n, k);
      if (requires_grad(b)) kernel::gemm_tn(value(a).data(), g.data(), grad_ref(b).data(), k, m, n);
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::add(Var a, Var b) -> Var {
  const auto& av = value(a);
  const auto& bv = value(b);
  require_same(av, bv, "add");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  Var o = push(std::move(out), requires_grad(a) || requires_grad(b));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, b, o] {
      const auto& g = grad(o);
      for (Var in : {a, b}) {
        if (!requires_grad(in)) continue;
        auto& d = grad_ref(in);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::sub(Var a, Var b) -> Var {
  const auto& av = value(a);
  const auto& bv = value(b);
  require_same(av, bv, "sub");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  Var o = push(std::move(out), requires_grad(a) || requires_grad(b));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, b, o] {
      const auto& g = grad(o);
      if (requires_grad(a)) {
        auto& d = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (requires_grad(b)) {
        auto& d = grad_ref(b);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::mul(Var a, Var b) -> Var {
  const auto& av = value(a);
  const auto& bv = value(b);
  require_same(av, bv, "mul");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Var o = push(std::move(out), requires_grad(a) || requires_grad(b));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, b, o] {
      const auto& g = grad(o);
      if (requires_grad(a)) {
        auto& d = grad_ref(a);
        const auto& bv = value(b);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
      }
      if (requires_grad(b)) {
        auto& d = grad_ref(b);
        const auto& av = value(a);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::add_bias(Var a, Var bias) -> Var {
  const auto& av = value(a);
  const auto& bv = value(bias);
  if (bv.size() != av.cols()) {
    throw ShapeError("add_bias: bias " + shape_string(bv.shape()) + " does not match " + shape_string(av.shape()));
  }
  Tensor<T> out = av;
  const std::size_t rows = av.rows(), cols = av.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  }
  Var o = push(std::move(out), requires_grad(a) || requires_grad(bias));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, bias, o, rows, cols] {
      const auto& g = grad(o);
      if (requires_grad(a)) {
        auto& d = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (requires_grad(bias)) {
        auto& d = grad_ref(bias);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) d[c] += g[r * cols + c];
        }
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::one_minus(Var a) -> Var {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v = T(1) - v;
  Var o = push(std::move(out), requires_grad(a));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, o] {
      const auto& g = grad(o);
      auto& d = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::sigmoid(Var a) -> Var {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v = num::sigmoid(v);
  Var o = push(std::move(out), requires_grad(a));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, o] {
      const auto& g = grad(o);
      const auto& y = value(o);
      auto& d = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (T(1) - y[i]);
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::tanh(Var a) -> Var {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v = std::tanh(v);
  Var o = push(std::move(out), requires_grad(a));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, o] {
      const auto& g = grad(o);
      const auto& y = value(o);
      auto& d = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (T(1) - y[i] * y[i]);
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::gather_rows(Var table, std::vector<std::int64_t> index) -> Var {
  const auto& tv = value(table);
  const std::size_t cols = tv.cols(), rows = tv.rows();
  Tensor<T> out({index.size(), cols});
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto r = index[i];
    if (r < 0) continue;
    if (static_cast<std::size_t>(r) >= rows) {
      throw IndexError("gather_rows: row " + std::to_string(r) + " out of " + std::to_string(rows));
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(r) * cols, cols, out.data() + i * cols);
  }
  Var o = push(std::move(out), requires_grad(table));
  if (node(o).requires_grad) {
    node(o).backward = [this, table, o, index = std::move(index), cols] {
      const auto& g = grad(o);
      Node& tn = node(table);
      Tensor<T>* d;
      if (tn.param) {
        d = &tn.param->grad;
      } else {
        d = &grad_ref(table);
      }
      for (std::size_t i = 0; i < index.size(); ++i) {
        const auto r = index[i];
        if (r < 0) continue;
        const auto row = static_cast<std::size_t>(r);
        if (tn.param) tn.param->mark_row(row);
        T* dst = d->data() + row * cols;
        const T* src = g.data() + i * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::slice_rows(Var a, std::size_t begin, std::size_t count) -> Var {
  const auto& av = value(a);
  if (begin + count > av.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") exceeds " + shape_string(av.shape()));
  }
  const std::size_t cols = av.cols();
  Tensor<T> out({count, cols});
  std::copy_n(av.data() + begin * cols, count * cols, out.data());
  Var o = push(std::move(out), requires_grad(a));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, o, begin, count, cols] {
      const auto& g = grad(o);
      auto& d = grad_ref(a);
      for (std::size_t i = 0; i < count * cols; ++i) d[begin * cols + i] += g[i];
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::concat_cols(std::span<const Var> parts) -> Var {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t total = 0;
  bool rg = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    total += value(p).cols();
    rg = rg || requires_grad(p);
  }
  Tensor<T> out({rows, total});
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& pv = value(p);
    const std::size_t pc = pv.cols();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(pv.data() + r * pc, pc, out.data() + r * total + offset);
    offset += pc;
  }
  Var o = push(std::move(out), rg);
  if (rg) {
    node(o).backward = [this, o, ps = std::vector<Var>(parts.begin(), parts.end()), rows, total] {
      const auto& g = grad(o);
      std::size_t offset = 0;
      for (Var p : ps) {
        const std::size_t pc = value(p).cols();
        if (requires_grad(p)) {
          auto& d = grad_ref(p);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < pc; ++c) d[r * pc + c] += g[r * total + offset + c];
          }
        }
        offset += pc;
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::segment_sum(Var a, std::vector<std::size_t> offsets) -> Var {
  const auto& av = value(a);
  if (offsets.size() < 2 || offsets.back() != av.rows() || !std::is_sorted(offsets.begin(), offsets.end())) {
    throw ShapeError("segment_sum: offsets do not partition " + shape_string(av.shape()));
  }
  const std::size_t segments = offsets.size() - 1, cols = av.cols();
  Tensor<T> out({segments, cols});
  for (std::size_t s = 0; s < segments; ++s) {
    T* dst = out.data() + s * cols;
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) {
      const T* src = av.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  }
  Var o = push(std::move(out), requires_grad(a));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, o, offsets = std::move(offsets), segments, cols] {
      const auto& g = grad(o);
      auto& d = grad_ref(a);
      for (std::size_t s = 0; s < segments; ++s) {
        for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) {
          for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[s * cols + c];
        }
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::select_rows(Var fresh, Var prev, std::vector<std::uint8_t> keep_fresh) -> Var {
  const auto& fv = value(fresh);
  const auto& pv = value(prev);
  require_same(fv, pv, "select_rows");
  if (keep_fresh.size() != fv.rows()) throw ShapeError("select_rows: mask length mismatch");
  const std::size_t cols = fv.cols();
  Tensor<T> out = pv;
  for (std::size_t r = 0; r < keep_fresh.size(); ++r) {
    if (keep_fresh[r]) std::copy_n(fv.data() + r * cols, cols, out.data() + r * cols);
  }
  Var o = push(std::move(out), requires_grad(fresh) || requires_grad(prev));
  if (node(o).requires_grad) {
    node(o).backward = [this, fresh, prev, o, keep = std::move(keep_fresh), cols] {
      const auto& g = grad(o);
      for (std::size_t r = 0; r < keep.size(); ++r) {
        const Var target = keep[r] ? fresh : prev;
        if (!requires_grad(target)) continue;
        auto& d = grad_ref(target);
        for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[r * cols + c];
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::bilinear(Var a, Var m, Var c) -> Var {
  const auto& av = value(a);
  const auto& mv = value(m);
  const auto& cv = value(c);
  const std::size_t batch = av.rows(), dim = av.cols();
  if (cv.rows() != batch || cv.cols() != dim || mv.cols() != dim || mv.rows() % dim != 0 || mv.rows() == 0) {
    throw ShapeError("bilinear: incompatible shapes " + shape_string(av.shape()) + ", " + shape_string(mv.shape()) +
                     ", " + shape_string(cv.shape()));
  }
  const std::size_t classes = mv.rows() / dim;
  // left[k] = a · M_k, kept for the backward pass.
  std::vector<Tensor<T>> left;
  left.reserve(classes);
  Tensor<T> out({batch, classes});
  for (std::size_t k = 0; k < classes; ++k) {
    Tensor<T> s({batch, dim});
    kernel::gemm_nn(av.data(), mv.data() + k * dim * dim, s.data(), batch, dim, dim);
    for (std::size_t b = 0; b < batch; ++b) {
      T acc = 0;
      for (std::size_t j = 0; j < dim; ++j) acc += s[b * dim + j] * cv[b * dim + j];
      out[b * classes + k] = acc;
    }
    left.push_back(std::move(s));
  }
  const bool rg = requires_grad(a) || requires_grad(m) || requires_grad(c);
  Var o = push(std::move(out), rg);
  if (rg) {
    node(o).backward = [this, a, m, c, o, left = std::move(left), batch, dim, classes] {
      const auto& g = grad(o);
      const auto& av = value(a);
      const auto& mv = value(m);
      const auto& cv = value(c);
      for (std::size_t k = 0; k < classes; ++k) {
        const T* mk = mv.data() + k * dim * dim;
        if (requires_grad(c)) {
          auto& d = grad_ref(c);
          for (std::size_t b = 0; b < batch; ++b) {
            const T gk = g[b * classes + k];
            for (std::size_t j = 0; j < dim; ++j) d[b * dim + j] += gk * left[k][b * dim + j];
          }
        }
        // Rows of a and c scaled by the upstream gradient of class k.
        Tensor<T> cg({batch, dim});
        for (std::size_t b = 0; b < batch; ++b) {
          const T gk = g[b * classes + k];
          for (std::size_t j = 0; j < dim; ++j) cg[b * dim + j] = gk * cv[b * dim + j];
        }
        if (requires_grad(a)) kernel::gemm_nt(cg.data(), mk, grad_ref(a).data(), batch, dim, dim);
        if (requires_grad(m)) {
          kernel::gemm_tn(av.data(), cg.data(), grad_ref(m).data() + k * dim * dim, dim, batch, dim);
        }
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::group_dot(Var p, Var c, std::size_t groups) -> Var {
  const auto& pv = value(p);
  const auto& cv = value(c);
  const std::size_t batch = pv.rows(), dim = pv.cols();
  if (groups == 0 || cv.rows() != batch * groups || cv.cols() != dim) {
    throw ShapeError("group_dot: " + shape_string(pv.shape()) + " vs " + shape_string(cv.shape()) + " with " +
                     std::to_string(groups) + " groups");
  }
  Tensor<T> out({batch, groups});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t g = 0; g < groups; ++g) {
      T acc = 0;
      const T* cr = cv.data() + (b * groups + g) * dim;
      for (std::size_t j = 0; j < dim; ++j) acc += pv[b * dim + j] * cr[j];
      out[b * groups + g] = acc;
    }
  }
  Var o = push(std::move(out), requires_grad(p) || requires_grad(c));
  if (node(o).requires_grad) {
    node(o).backward = [this, p, c, o, batch, groups, dim] {
      const auto& go = grad(o);
      const auto& pv = value(p);
      const auto& cv = value(c);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t g = 0; g < groups; ++g) {
          const T gv = go[b * groups + g];
          const std::size_t crow = (b * groups + g) * dim;
          if (requires_grad(p)) {
            auto& d = grad_ref(p);
            for (std::size_t j = 0; j < dim; ++j) d[b * dim + j] += gv * cv[crow + j];
          }
          if (requires_grad(c)) {
            auto& d = grad_ref(c);
            for (std::size_t j = 0; j < dim; ++j) d[crow + j] += gv * pv[b * dim + j];
          }
        }
      }
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::softmax_xent(Var logits, std::vector<std::size_t> targets) -> Var {
  const auto& lv = value(logits);
  const std::size_t batch = lv.rows(), classes = lv.cols();
  if (targets.size() != batch || batch == 0) throw ShapeError("softmax_xent: target count does not match batch");
  Tensor<T> dlogits({batch, classes});
  Accumulator<T> total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    auto ce = softmax_cross_entropy<T>(lv.row(b), targets[b]);
    total += static_cast<Accumulator<T>>(ce.loss);
    std::copy(ce.dlogits.begin(), ce.dlogits.end(), dlogits.data() + b * classes);
  }
  Var o = push(Tensor<T>({1}, static_cast<T>(total / static_cast<Accumulator<T>>(batch))), requires_grad(logits));
  if (node(o).requires_grad) {
    node(o).backward = [this, logits, o, dl = std::move(dlogits), batch] {
      const T scale = grad(o)[0] / static_cast<T>(batch);
      auto& d = grad_ref(logits);
      for (std::size_t i = 0; i < dl.size(); ++i) d[i] += scale * dl[i];
    };
  }
  return o;
}

template <typename T>
auto Tape<T>::inner(Var a, Tensor<T> weights) -> Var {
  const auto& av = value(a);
  if (weights.size() != av.size()) throw ShapeError("inner: weight size mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * weights[i];
  Var o = push(Tensor<T>({1}, acc), requires_grad(a));
  if (node(o).requires_grad) {
    node(o).backward = [this, a, o, w = std::move(weights)] {
      const T g = grad(o)[0];
      auto& d = grad_ref(a);
      for (std::size_t i = 0; i < w.size(); ++i) d[i] += g * w[i];
    };
  }
  return o;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (value(loss).size() != 1) throw ShapeError("backward: loss must be a scalar");
  if (!requires_grad(loss)) return;
  grad_ref(loss)[0] += T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    if (!has_grad(Var{static_cast<std::uint32_t>(i)})) continue;
    n.backward();
  }
}

template class Tape<float>;
template class Tape<double>;
template class Tape<long double>;

}  // namespace discsent::num
