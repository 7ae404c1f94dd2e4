#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "discsent/model.hpp"

namespace discsent::eval {

using model::Model;
using model::Tensor;

/// Lowercases and tokenizes one line of raw text, then maps it to ids.
/// Throws EmptySentence when no token remains.
model::TokenIds encode_text(const text::Vocabulary& vocab, std::string_view sentence);

/// Row i of `encodings` is the encoding of `sentences[i]`.
struct SentenceIndex {
  Tensor<float> encodings;
  std::vector<std::string> sentences;

  std::size_t size() const { return sentences.size(); }
};

struct EncodeResult {
  SentenceIndex index;
  /// Lines that tokenized to nothing.
  std::size_t skipped = 0;
};

/// Encodes every line; lines without tokens are skipped and counted. Work is
/// split into fixed batches spread over `workers` threads; the result does not
/// depend on the worker count.
EncodeResult encode_corpus(const Model<float>& model, const text::Vocabulary& vocab,
                           std::span<const std::string> sentences, unsigned workers = 1, std::size_t batch_size = 128);

/// Writes the encodings in the checkpoint container and the sentences to
/// `path` + ".sentences", one per line.
void save_index(const SentenceIndex& index, const std::filesystem::path& path);
SentenceIndex load_index(const std::filesystem::path& path);

struct Neighbor {
  std::size_t index = 0;
  std::string sentence;
  double distance = 0;
};

/// The min(k, N) rows closest to `query` in Euclidean distance, nearest first,
/// ties broken by row order.
std::vector<Neighbor> nearest_neighbors(const SentenceIndex& index, std::span<const float> query, std::size_t k);
/// Encodes `query` with `model` first. Throws EmptySentence for a query without tokens.
std::vector<Neighbor> nearest_neighbors(const Model<float>& model, const text::Vocabulary& vocab,
                                        const SentenceIndex& index, std::string_view query, std::size_t k);

/// Labeled sentences or sentence pairs; `second` is empty for single-sentence data.
struct LabeledSet {
  std::vector<std::uint32_t> labels;
  std::vector<std::string> first;
  std::vector<std::string> second;

  std::size_t size() const { return labels.size(); }
  bool pairs() const { return !second.empty(); }
};

/// Reads "label<TAB>sentence" or "label<TAB>sentence<TAB>sentence" lines. All
/// lines must have the same number of fields. Throws FormatError with the line.
LabeledSet read_labeled_tsv(const std::filesystem::path& path);

/// One row per example: the encoding, or [a; b; |a − b|; a ⊙ b] for pairs.
/// Examples whose text has no tokens are dropped and counted in `skipped`.
struct Features {
  Tensor<float> x;
  std::vector<std::uint32_t> labels;
  std::size_t skipped = 0;
};
Features probe_features(const Model<float>& model, const text::Vocabulary& vocab, const LabeledSet& set,
                        unsigned workers = 1);

struct ProbeConfig {
  std::size_t epochs = 100;
  double lr = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  std::size_t classes = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;
};

/// Multinomial logistic regression on fixed features, trained with AdaGrad.
/// Training rows are put in a canonical order before the seeded per-epoch
/// shuffles, so the result does not depend on the input order. Throws
/// ProbeError when the training labels contain fewer than two classes or
/// either set is empty.
ProbeResult linear_probe(const Features& train, const Features& test, const ProbeConfig& config = {});

}  // namespace discsent::eval
