#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "discsent/parameter.hpp"
#include "discsent/rng.hpp"
#include "discsent/tape.hpp"
#include "discsent/vocabulary.hpp"

namespace discsent::model {

using num::Parameter;
using num::Tape;
using num::Tensor;
using text::TokenId;
using TokenIds = std::vector<TokenId>;

enum class EncoderKind { kCbow, kGru, kBigru };

std::string_view encoder_name(EncoderKind k);
std::optional<EncoderKind> parse_encoder(std::string_view name);

/// Sentence encoder shape. Zero dimensions select the defaults: 1024 output for
/// CBOW (via a projection) and GRU, 512 per direction for BiGRU.
struct EncoderConfig {
  EncoderKind kind = EncoderKind::kBigru;
  std::size_t vocab_size = 1;
  std::size_t embedding_dim = 300;
  std::size_t hidden_dim = 0;
  bool trainable_embeddings = true;

  /// GRU state size per direction, or CBOW projection width.
  std::size_t hidden() const;
  /// Dimension of every sentence encoding.
  std::size_t output_dim() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

nlohmann::json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

template <typename T>
struct HighwayParams {
  Parameter<T> w_h, w_g, b_h, b_g;
};

/// One GRU direction. Input weights are [d_in, d_h], recurrent weights [d_h, d_h].
template <typename T>
struct GruParams {
  Parameter<T> w_z, w_r, w_c;
  Parameter<T> u_z, u_r, u_c;
  Parameter<T> b_z, b_r, b_c;
};

template <typename T>
HighwayParams<T> make_highway(std::size_t dim, const std::string& prefix);
template <typename T>
GruParams<T> make_gru(std::size_t input_dim, std::size_t hidden_dim, const std::string& prefix);

/// y = g ⊙ tanh(W_hᵀx + b_h) + (1 − g) ⊙ x with g = σ(W_gᵀx + b_g).
/// Accepts one vector [d] or a batch of rows [n, d].
template <typename T>
Tensor<T> highway_forward(const HighwayParams<T>& p, const Tensor<T>& x);

/// h' = (1 − z) ⊙ h + z ⊙ tanh(W_cᵀx + U_cᵀ(r ⊙ h) + b_c).
template <typename T>
Tensor<T> gru_step(const GruParams<T>& p, const Tensor<T>& x, const Tensor<T>& h);

/// Embedding lookup → per-token highway → CBOW sum + projection, final GRU
/// state, or concatenated forward/backward BiGRU final states.
template <typename T>
class SentenceEncoder {
 public:
  using Var = typename Tape<T>::Var;

  SentenceEncoder() = default;
  /// Glorot-uniform matrices, zero biases, embeddings uniform(−0.1, 0.1).
  SentenceEncoder(const EncoderConfig& config, SplitMix64& rng);

  const EncoderConfig& config() const { return config_; }
  std::size_t output_dim() const { return config_.output_dim(); }

  /// Encodes a batch into a [N, D] node. Throws EmptySentence for an empty sentence.
  Var encode(Tape<T>& tape, std::span<const TokenIds> sentences);
  /// Same, with every parameter recorded as a read-only leaf.
  Var encode(Tape<T>& tape, std::span<const TokenIds> sentences) const;
  /// Gradient-free encoding of one sentence.
  Tensor<T> encode(const TokenIds& ids) const;
  /// Gradient-free encoding of a batch, [N, D].
  Tensor<T> encode_batch(std::span<const TokenIds> sentences) const;

  Parameter<T>& embedding() { return embedding_; }
  const Parameter<T>& embedding() const { return embedding_; }
  /// Replaces the table and freezes it.
  void set_pretrained_embeddings(Tensor<T> table);
  HighwayParams<T>& highway_params() { return highway_; }
  GruParams<T>& forward_gru() { return fwd_; }
  GruParams<T>& backward_gru() { return bwd_; }
  Parameter<T>& projection_weight() { return proj_w_; }
  Parameter<T>& projection_bias() { return proj_b_; }

  /// Every parameter of the configured kind, in a fixed order.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  template <typename U>
  SentenceEncoder<U> cast() const;

 private:
  template <typename Self, typename TapeT>
  static typename TapeT::Var encode_impl(Self& self, TapeT& tape, std::span<const TokenIds> sentences);

  template <typename U>
  friend class SentenceEncoder;

  EncoderConfig config_;
  Parameter<T> embedding_;
  HighwayParams<T> highway_;
  Parameter<T> proj_w_, proj_b_;
  GruParams<T> fwd_, bwd_;
};

/// Reads the word-vector text format ("word v1 … vd" per line, optional
/// "count dim" header). Vocabulary words missing from the file get zeros;
/// "<unk>" gets the mean of all vectors in the file.
Tensor<float> load_embeddings_text(const std::filesystem::path& path, const text::Vocabulary& vocab);

}  // namespace discsent::model
