#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "discsent/dataset.hpp"
#include "discsent/encoder.hpp"

namespace discsent::model {

using dataset::Task;

/// Bilinear pair classifier: logit_k = aᵀ M_k b + w_k · [a; b] + c_k.
/// m stacks the K matrices as [K·D, D]; w is [2D, K] (column k is w_k).
template <typename T>
struct PairHead {
  Parameter<T> m, w, c;

  PairHead() = default;
  /// Zero-initialized head.
  PairHead(const std::string& prefix, std::size_t dim, std::size_t classes);

  std::size_t classes() const { return c.value.size(); }
  std::size_t dim() const { return m.value.cols(); }
};

/// score_i = contextᵀ W cand_i with W [3D, D].
template <typename T>
struct NextHead {
  Parameter<T> w;

  NextHead() = default;
  NextHead(const std::string& prefix, std::size_t dim);
};

inline constexpr std::size_t kNextCandidates = 5;
inline constexpr std::size_t kNextContext = 3;

/// Rows of a and b are paired; result is [B, K].
template <typename T>
typename Tape<T>::Var pair_logits(Tape<T>& tape, PairHead<T>& head, typename Tape<T>::Var a,
                                  typename Tape<T>::Var b);
template <typename T>
Tensor<T> pair_logits(const PairHead<T>& head, const Tensor<T>& a, const Tensor<T>& b);

/// context [B, 3D], candidates [B·5, D] grouped by example; result is [B, 5].
template <typename T>
typename Tape<T>::Var next_scores(Tape<T>& tape, NextHead<T>& head, typename Tape<T>::Var context,
                                  typename Tape<T>::Var candidates);
/// Throws CardinalityError unless exactly five candidates are given.
template <typename T>
Tensor<T> next_scores(const NextHead<T>& head, const Tensor<T>& context, std::span<const Tensor<T>> candidates);

/// ORDER or CONJUNCTION example in token-id form. For ORDER the label is 1
/// when the pair was swapped; for CONJUNCTION it is the category index.
struct PairItem {
  TokenIds a, b;
  std::uint32_t label = 0;
  friend bool operator==(const PairItem&, const PairItem&) = default;
};

struct NextItem {
  std::array<TokenIds, kNextContext> context;
  std::array<TokenIds, kNextCandidates> candidates;
  std::uint32_t label = 0;
  friend bool operator==(const NextItem&, const NextItem&) = default;
};

PairItem to_item(const text::Vocabulary& vocab, const discourse::OrderExample& e);
PairItem to_item(const text::Vocabulary& vocab, const discourse::ConjunctionExample& e);
NextItem to_item(const text::Vocabulary& vocab, const discourse::NextExample& e);

/// Items of all three tasks; any list may be empty.
struct TaskItems {
  std::vector<PairItem> order, conjunction;
  std::vector<NextItem> next;

  std::size_t size(Task t) const;
};

/// Shared encoder plus one head per task. Heads start at zero.
template <typename T>
class Model {
 public:
  using Var = typename Tape<T>::Var;

  Model() = default;
  Model(const EncoderConfig& config, SplitMix64& rng);

  SentenceEncoder<T>& encoder() { return encoder_; }
  const SentenceEncoder<T>& encoder() const { return encoder_; }
  PairHead<T>& order_head() { return order_; }
  PairHead<T>& conjunction_head() { return conjunction_; }
  NextHead<T>& next_head() { return next_; }
  const PairHead<T>& order_head() const { return order_; }
  const PairHead<T>& conjunction_head() const { return conjunction_; }
  const NextHead<T>& next_head() const { return next_; }

  /// Mean cross-entropy over the batch.
  Var loss(Tape<T>& tape, Task task, std::span<const PairItem> batch);
  Var loss(Tape<T>& tape, std::span<const NextItem> batch);

  /// Logits [B, K] for ORDER / CONJUNCTION, scores [B, 5] for NEXT.
  Var logits(Tape<T>& tape, Task task, std::span<const PairItem> batch);
  Var logits(Tape<T>& tape, std::span<const NextItem> batch);

  /// Argmax predictions, computed without gradients.
  std::vector<std::uint32_t> predict(Task task, std::span<const PairItem> batch) const;
  std::vector<std::uint32_t> predict(std::span<const NextItem> batch) const;

  std::vector<Parameter<T>*> head_parameters(Task task);
  /// Encoder parameters followed by every head's parameters.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  template <typename U>
  Model<U> cast() const;

 private:
  template <typename Self, typename TapeT>
  static typename TapeT::Var pair_impl(Self& self, TapeT& tape, Task task, std::span<const PairItem> batch);
  template <typename Self, typename TapeT>
  static typename TapeT::Var next_impl(Self& self, TapeT& tape, std::span<const NextItem> batch);

  template <typename U>
  friend class Model;

  SentenceEncoder<T> encoder_;
  PairHead<T> order_, conjunction_;
  NextHead<T> next_;
};

/// Number of classes of each task: 2, 9, 5.
std::size_t task_classes(Task t);

}  // namespace discsent::model
