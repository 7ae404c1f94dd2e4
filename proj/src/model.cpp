#include "discsent/model.hpp"

#include "discsent/error.hpp"

namespace discsent::model {

std::size_t task_classes(Task t) {
  switch (t) {
    case Task::kOrder: return 2;
    case Task::kConjunction: return discourse::kNumCategories;
    case Task::kNext: return kNextCandidates;
  }
  return 0;
}

std::size_t TaskItems::size(Task t) const {
  switch (t) {
    case Task::kOrder: return order.size();
    case Task::kConjunction: return conjunction.size();
    case Task::kNext: return next.size();
  }
  return 0;
}

PairItem to_item(const text::Vocabulary& vocab, const discourse::OrderExample& e) {
  return {vocab.encode(e.s0), vocab.encode(e.s1), e.swapped ? 1u : 0u};
}

PairItem to_item(const text::Vocabulary& vocab, const discourse::ConjunctionExample& e) {
  return {vocab.encode(e.s0), vocab.encode(e.s1), static_cast<std::uint32_t>(discourse::category_index(e.category))};
}

NextItem to_item(const text::Vocabulary& vocab, const discourse::NextExample& e) {
  NextItem item;
  for (std::size_t i = 0; i < kNextContext; ++i) item.context[i] = vocab.encode(e.context[i]);
  for (std::size_t i = 0; i < kNextCandidates; ++i) item.candidates[i] = vocab.encode(e.candidates[i]);
  item.label = e.answer;
  return item;
}

template <typename T>
PairHead<T>::PairHead(const std::string& prefix, std::size_t dim, std::size_t classes)
    : m(prefix + ".m", Tensor<T>({classes * dim, dim})),
      w(prefix + ".w", Tensor<T>({2 * dim, classes})),
      c(prefix + ".c", Tensor<T>({classes})) {}

template <typename T>
NextHead<T>::NextHead(const std::string& prefix, std::size_t dim) : w(prefix + ".w", Tensor<T>({3 * dim, dim})) {}

namespace {

template <typename T, typename Head>
typename Tape<T>::Var pair_logits_impl(Tape<T>& tape, Head& head, typename Tape<T>::Var a, typename Tape<T>::Var b) {
  const std::size_t dim = head.m.value.cols();
  if (tape.value(a).cols() != dim || tape.value(b).cols() != dim) {
    throw ShapeError("pair_logits: encodings " + num::shape_string(tape.value(a).shape()) + " and " +
                     num::shape_string(tape.value(b).shape()) + " do not match head dimension " +
                     std::to_string(dim));
  }
  const std::array<typename Tape<T>::Var, 2> ab{a, b};
  const auto bil = tape.bilinear(a, tape.param(head.m), b);
  const auto lin = tape.matmul(tape.concat_cols(ab), tape.param(head.w));
  return tape.add_bias(tape.add(bil, lin), tape.param(head.c));
}

template <typename T, typename Head>
typename Tape<T>::Var next_scores_impl(Tape<T>& tape, Head& head, typename Tape<T>::Var context,
                                       typename Tape<T>::Var candidates) {
  const auto& cv = tape.value(context);
  const auto& dv = tape.value(candidates);
  if (cv.cols() != head.w.value.rows() || dv.cols() != head.w.value.cols()) {
    throw ShapeError("next_scores: context " + num::shape_string(cv.shape()) + " and candidates " +
                     num::shape_string(dv.shape()) + " do not match head " + num::shape_string(head.w.value.shape()));
  }
  if (dv.rows() != cv.rows() * kNextCandidates) {
    throw CardinalityError("next_scores: expected " + std::to_string(kNextCandidates) +
                           " candidates per context, got " + std::to_string(dv.rows()) + " rows for " +
                           std::to_string(cv.rows()) + " contexts");
  }
  return tape.group_dot(tape.matmul(context, tape.param(head.w)), candidates, kNextCandidates);
}

template <typename T>
Tensor<T> as_row(const Tensor<T>& v) {
  return Tensor<T>({1, v.size()}, std::vector<T>(v.values().begin(), v.values().end()));
}

template <typename T>
Tensor<T> flat(const Tensor<T>& v) {
  return Tensor<T>({v.size()}, std::vector<T>(v.values().begin(), v.values().end()));
}

template <typename T>
std::vector<std::uint32_t> argmax_rows(const Tensor<T>& logits) {
  std::vector<std::uint32_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k] > row[best]) best = k;
    }
    out[r] = static_cast<std::uint32_t>(best);
  }
  return out;
}

template <typename U, typename T>
Parameter<U> cast_param(const Parameter<T>& p) {
  Parameter<U> out(p.name, p.value.template cast<U>(), p.trainable);
  out.accumulator = p.accumulator.template cast<U>();
  return out;
}

}  // namespace

template <typename T>
typename Tape<T>::Var pair_logits(Tape<T>& tape, PairHead<T>& head, typename Tape<T>::Var a,
                                  typename Tape<T>::Var b) {
  return pair_logits_impl<T>(tape, head, a, b);
}

template <typename T>
Tensor<T> pair_logits(const PairHead<T>& head, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != head.dim() || b.size() != head.dim()) {
    throw ShapeError("pair_logits: encodings " + num::shape_string(a.shape()) + " and " +
                     num::shape_string(b.shape()) + " do not match head dimension " + std::to_string(head.dim()));
  }
  Tape<T> tape;
  return flat(tape.value(pair_logits_impl<T>(tape, head, tape.constant(as_row(a)), tape.constant(as_row(b)))));
}

template <typename T>
typename Tape<T>::Var next_scores(Tape<T>& tape, NextHead<T>& head, typename Tape<T>::Var context,
                                  typename Tape<T>::Var candidates) {
  return next_scores_impl<T>(tape, head, context, candidates);
}

template <typename T>
Tensor<T> next_scores(const NextHead<T>& head, const Tensor<T>& context, std::span<const Tensor<T>> candidates) {
  if (candidates.size() != kNextCandidates) {
    throw CardinalityError("next_scores: expected " + std::to_string(kNextCandidates) + " candidates, got " +
                           std::to_string(candidates.size()));
  }
  const std::size_t dim = head.w.value.cols();
  Tensor<T> cands({kNextCandidates, dim});
  for (std::size_t i = 0; i < kNextCandidates; ++i) {
    if (candidates[i].size() != dim) throw ShapeError("next_scores: candidate " + std::to_string(i) + " has wrong size");
    std::copy(candidates[i].values().begin(), candidates[i].values().end(), cands.row(i).begin());
  }
  if (context.size() != head.w.value.rows()) throw ShapeError("next_scores: context has wrong size");
  Tape<T> tape;
  return flat(tape.value(next_scores_impl<T>(tape, head, tape.constant(as_row(context)), tape.constant(cands))));
}

template <typename T>
Model<T>::Model(const EncoderConfig& config, SplitMix64& rng)
    : encoder_(config, rng),
      order_("order", config.output_dim(), task_classes(Task::kOrder)),
      conjunction_("conjunction", config.output_dim(), task_classes(Task::kConjunction)),
      next_("next", config.output_dim()) {}

template <typename T>
template <typename Self, typename TapeT>
typename TapeT::Var Model<T>::pair_impl(Self& self, TapeT& tape, Task task, std::span<const PairItem> batch) {
  if (batch.empty()) throw ShapeError("empty batch");
  if (task == Task::kNext) throw ShapeError("pair batch given for the next task");
  const std::size_t n = batch.size();
  std::vector<TokenIds> sentences;
  sentences.reserve(2 * n);
  for (const auto& item : batch) sentences.push_back(item.a);
  for (const auto& item : batch) sentences.push_back(item.b);
  const auto enc = self.encoder_.encode(tape, sentences);
  auto& head = task == Task::kOrder ? self.order_ : self.conjunction_;
  return pair_logits_impl<T>(tape, head, tape.slice_rows(enc, 0, n), tape.slice_rows(enc, n, n));
}

template <typename T>
template <typename Self, typename TapeT>
typename TapeT::Var Model<T>::next_impl(Self& self, TapeT& tape, std::span<const NextItem> batch) {
  using V = typename TapeT::Var;
  if (batch.empty()) throw ShapeError("empty batch");
  const std::size_t n = batch.size();
  std::vector<TokenIds> sentences;
  sentences.reserve(n * (kNextContext + kNextCandidates));
  for (std::size_t i = 0; i < kNextContext; ++i) {
    for (const auto& item : batch) sentences.push_back(item.context[i]);
  }
  for (const auto& item : batch) {
    for (const auto& c : item.candidates) sentences.push_back(c);
  }
  const auto enc = self.encoder_.encode(tape, sentences);
  const std::array<V, kNextContext> parts{tape.slice_rows(enc, 0, n), tape.slice_rows(enc, n, n),
                                          tape.slice_rows(enc, 2 * n, n)};
  const auto context = tape.concat_cols(parts);
  const auto cands = tape.slice_rows(enc, kNextContext * n, kNextCandidates * n);
  return next_scores_impl<T>(tape, self.next_, context, cands);
}

template <typename T>
auto Model<T>::logits(Tape<T>& tape, Task task, std::span<const PairItem> batch) -> Var {
  return pair_impl(*this, tape, task, batch);
}

template <typename T>
auto Model<T>::logits(Tape<T>& tape, std::span<const NextItem> batch) -> Var {
  return next_impl(*this, tape, batch);
}

template <typename T>
auto Model<T>::loss(Tape<T>& tape, Task task, std::span<const PairItem> batch) -> Var {
  const auto out = logits(tape, task, batch);
  std::vector<std::size_t> labels;
  labels.reserve(batch.size());
  for (const auto& item : batch) labels.push_back(item.label);
  return tape.softmax_xent(out, std::move(labels));
}

template <typename T>
auto Model<T>::loss(Tape<T>& tape, std::span<const NextItem> batch) -> Var {
  const auto out = logits(tape, batch);
  std::vector<std::size_t> labels;
  labels.reserve(batch.size());
  for (const auto& item : batch) labels.push_back(item.label);
  return tape.softmax_xent(out, std::move(labels));
}

template <typename T>
std::vector<std::uint32_t> Model<T>::predict(Task task, std::span<const PairItem> batch) const {
  Tape<T> tape;
  return argmax_rows(tape.value(pair_impl(*this, tape, task, batch)));
}

template <typename T>
std::vector<std::uint32_t> Model<T>::predict(std::span<const NextItem> batch) const {
  Tape<T> tape;
  return argmax_rows(tape.value(next_impl(*this, tape, batch)));
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::head_parameters(Task task) {
  switch (task) {
    case Task::kOrder: return {&order_.m, &order_.w, &order_.c};
    case Task::kConjunction: return {&conjunction_.m, &conjunction_.w, &conjunction_.c};
    case Task::kNext: return {&next_.w};
  }
  return {};
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::parameters() {
  auto out = encoder_.parameters();
  for (Task t : dataset::kAllTasks) {
    for (auto* p : head_parameters(t)) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Model<T>::parameters() const {
  auto mut = const_cast<Model*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out;
  out.encoder_ = encoder_.template cast<U>();
  out.order_.m = cast_param<U>(order_.m);
  out.order_.w = cast_param<U>(order_.w);
  out.order_.c = cast_param<U>(order_.c);
  out.conjunction_.m = cast_param<U>(conjunction_.m);
  out.conjunction_.w = cast_param<U>(conjunction_.w);
  out.conjunction_.c = cast_param<U>(conjunction_.c);
  out.next_.w = cast_param<U>(next_.w);
  return out;
}

template struct PairHead<float>;
template struct PairHead<double>;
template struct NextHead<float>;
template struct NextHead<double>;
template Tape<float>::Var pair_logits(Tape<float>&, PairHead<float>&, Tape<float>::Var, Tape<float>::Var);
template Tape<double>::Var pair_logits(Tape<double>&, PairHead<double>&, Tape<double>::Var, Tape<double>::Var);
template Tensor<float> pair_logits(const PairHead<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> pair_logits(const PairHead<double>&, const Tensor<double>&, const Tensor<double>&);
template Tape<float>::Var next_scores(Tape<float>&, NextHead<float>&, Tape<float>::Var, Tape<float>::Var);
template Tape<double>::Var next_scores(Tape<double>&, NextHead<double>&, Tape<double>::Var, Tape<double>::Var);
template Tensor<float> next_scores(const NextHead<float>&, const Tensor<float>&, std::span<const Tensor<float>>);
template Tensor<double> next_scores(const NextHead<double>&, const Tensor<double>&, std::span<const Tensor<double>>);
template class Model<float>;
template class Model<double>;
template class Model<long double>;
template struct PairHead<long double>;
template struct NextHead<long double>;
template Model<long double> Model<double>::cast<long double>() const;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace discsent::model
