#include "discsent/encoder.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "discsent/error.hpp"

namespace discsent::model {

std::string_view encoder_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::kCbow: return "cbow";
    case EncoderKind::kGru: return "gru";
    case EncoderKind::kBigru: return "bigru";
  }
  return "?";
}

std::optional<EncoderKind> parse_encoder(std::string_view name) {
  for (auto k : {EncoderKind::kCbow, EncoderKind::kGru, EncoderKind::kBigru}) {
    if (encoder_name(k) == name) return k;
  }
  return std::nullopt;
}

std::size_t EncoderConfig::hidden() const {
  if (hidden_dim != 0) return hidden_dim;
  return kind == EncoderKind::kBigru ? 512 : 1024;
}

std::size_t EncoderConfig::output_dim() const {
  return kind == EncoderKind::kBigru ? 2 * hidden() : hidden();
}

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"kind", encoder_name(c.kind)},
          {"vocab_size", c.vocab_size},
          {"embedding_dim", c.embedding_dim},
          {"hidden_dim", c.hidden()},
          {"trainable_embeddings", c.trainable_embeddings}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    if (j.contains("kind")) {
      const auto name = j.at("kind").get<std::string>();
      const auto kind = parse_encoder(name);
      if (!kind) throw FormatError("unknown encoder kind '" + name + "'");
      c.kind = *kind;
    }
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.trainable_embeddings = j.value("trainable_embeddings", c.trainable_embeddings);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("encoder config: ") + e.what());
  }
  if (c.embedding_dim == 0 || c.vocab_size == 0) throw FormatError("encoder config: zero dimension");
  return c;
}

namespace {

template <typename T>
Parameter<T> glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out, SplitMix64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> v({fan_in, fan_out});
  for (auto& x : v.values()) x = static_cast<T>(rng.next_uniform(-a, a));
  return Parameter<T>(name, std::move(v));
}

template <typename T>
Parameter<T> zeros(const std::string& name, std::size_t n) {
  return Parameter<T>(name, Tensor<T>({n}));
}

template <typename U, typename T>
Parameter<U> cast_param(const Parameter<T>& p) {
  Parameter<U> out(p.name, p.value.template cast<U>(), p.trainable);
  out.accumulator = p.accumulator.template cast<U>();
  if (p.sparse_rows) out.enable_sparse_rows();
  return out;
}

template <typename U, typename T>
HighwayParams<U> cast_highway(const HighwayParams<T>& p) {
  return {cast_param<U>(p.w_h), cast_param<U>(p.w_g), cast_param<U>(p.b_h), cast_param<U>(p.b_g)};
}

template <typename U, typename T>
GruParams<U> cast_gru(const GruParams<T>& p) {
  return {cast_param<U>(p.w_z), cast_param<U>(p.w_r), cast_param<U>(p.w_c),
          cast_param<U>(p.u_z), cast_param<U>(p.u_r), cast_param<U>(p.u_c),
          cast_param<U>(p.b_z), cast_param<U>(p.b_r), cast_param<U>(p.b_c)};
}

// HP / GP are possibly-const parameter structs; const members become read-only leaves.
template <typename T, typename HP>
typename Tape<T>::Var highway_rows(Tape<T>& tape, HP& p, typename Tape<T>::Var x) {
  const auto gate = tape.sigmoid(tape.add_bias(tape.matmul(x, tape.param(p.w_g)), tape.param(p.b_g)));
  const auto h = tape.tanh(tape.add_bias(tape.matmul(x, tape.param(p.w_h)), tape.param(p.b_h)));
  return tape.add(tape.mul(gate, h), tape.mul(tape.one_minus(gate), x));
}

// Runs one GRU direction over the highway outputs `x` of all tokens. Row n of
// the result is the final state of sentence n.
template <typename T, typename GP>
typename Tape<T>::Var gru_rows(Tape<T>& tape, GP& p, typename Tape<T>::Var x, const std::vector<std::size_t>& offsets,
                               bool reverse) {
  using Var = typename Tape<T>::Var;
  const std::size_t n = offsets.size() - 1;
  const std::size_t d_h = p.b_z.value.size();
  std::size_t longest = 0;
  for (std::size_t i = 0; i < n; ++i) longest = std::max(longest, offsets[i + 1] - offsets[i]);

  const Var xz = tape.add_bias(tape.matmul(x, tape.param(p.w_z)), tape.param(p.b_z));
  const Var xr = tape.add_bias(tape.matmul(x, tape.param(p.w_r)), tape.param(p.b_r));
  const Var xc = tape.add_bias(tape.matmul(x, tape.param(p.w_c)), tape.param(p.b_c));
  const Var uz = tape.param(p.u_z), ur = tape.param(p.u_r), uc = tape.param(p.u_c);

  Var h = tape.constant(Tensor<T>({n, d_h}));
  for (std::size_t t = 0; t < longest; ++t) {
    std::vector<std::int64_t> index(n, -1);
    std::vector<std::uint8_t> active(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = offsets[i + 1] - offsets[i];
      if (t >= len) continue;
      index[i] = static_cast<std::int64_t>(reverse ? offsets[i + 1] - 1 - t : offsets[i] + t);
      active[i] = 1;
    }
    const Var z = tape.sigmoid(tape.add(tape.gather_rows(xz, index), tape.matmul(h, uz)));
    const Var r = tape.sigmoid(tape.add(tape.gather_rows(xr, index), tape.matmul(h, ur)));
    const Var c = tape.tanh(tape.add(tape.gather_rows(xc, std::move(index)), tape.matmul(tape.mul(r, h), uc)));
    const Var next = tape.add(tape.mul(tape.one_minus(z), h), tape.mul(z, c));
    h = tape.select_rows(next, h, std::move(active));
  }
  return h;
}

template <typename T>
Tensor<T> as_matrix(const Tensor<T>& v) {
  return Tensor<T>({v.rows(), v.cols()}, std::vector<T>(v.values().begin(), v.values().end()));
}

template <typename T>
void require_vector(const Tensor<T>& v, std::size_t dim, const char* what) {
  if (v.cols() != dim || v.rows() == 0) {
    throw ShapeError(std::string(what) + ": expected width " + std::to_string(dim) + ", got " +
                     num::shape_string(v.shape()));
  }
}

template <typename T>
Tensor<T> restore_rank(const Tensor<T>& in, Tensor<T> out) {
  if (in.rank() == 1) return Tensor<T>({out.size()}, std::vector<T>(out.values().begin(), out.values().end()));
  return out;
}

}  // namespace

template <typename T>
HighwayParams<T> make_highway(std::size_t dim, const std::string& prefix) {
  return {Parameter<T>(prefix + ".w_h", Tensor<T>({dim, dim})), Parameter<T>(prefix + ".w_g", Tensor<T>({dim, dim})),
          zeros<T>(prefix + ".b_h", dim), zeros<T>(prefix + ".b_g", dim)};
}

template <typename T>
GruParams<T> make_gru(std::size_t input_dim, std::size_t hidden_dim, const std::string& prefix) {
  const auto in = [&](const char* n) { return Parameter<T>(prefix + n, Tensor<T>({input_dim, hidden_dim})); };
  const auto rec = [&](const char* n) { return Parameter<T>(prefix + n, Tensor<T>({hidden_dim, hidden_dim})); };
  return {in(".w_z"),  in(".w_r"),  in(".w_c"),
          rec(".u_z"), rec(".u_r"), rec(".u_c"),
          zeros<T>(prefix + ".b_z", hidden_dim), zeros<T>(prefix + ".b_r", hidden_dim),
          zeros<T>(prefix + ".b_c", hidden_dim)};
}

template <typename T>
Tensor<T> highway_forward(const HighwayParams<T>& p, const Tensor<T>& x) {
  require_vector(x, p.w_h.value.rows(), "highway_forward");
  Tape<T> tape;
  const auto y = highway_rows<T>(tape, p, tape.constant(as_matrix(x)));
  return restore_rank(x, tape.value(y));
}

template <typename T>
Tensor<T> gru_step(const GruParams<T>& p, const Tensor<T>& x, const Tensor<T>& h) {
  require_vector(x, p.w_z.value.rows(), "gru_step input");
  require_vector(h, p.u_z.value.rows(), "gru_step state");
  if (x.rows() != h.rows()) throw ShapeError("gru_step: input and state batch sizes differ");
  Tape<T> tape;
  const auto xv = tape.constant(as_matrix(x));
  const auto hv = tape.constant(as_matrix(h));
  const auto pre = [&](const Parameter<T>& w, const Parameter<T>& u, const Parameter<T>& b, decltype(hv) state) {
    return tape.add_bias(tape.add(tape.matmul(xv, tape.param(w)), tape.matmul(state, tape.param(u))), tape.param(b));
  };
  const auto z = tape.sigmoid(pre(p.w_z, p.u_z, p.b_z, hv));
  const auto r = tape.sigmoid(pre(p.w_r, p.u_r, p.b_r, hv));
  const auto c = tape.tanh(pre(p.w_c, p.u_c, p.b_c, tape.mul(r, hv)));
  const auto out = tape.add(tape.mul(tape.one_minus(z), hv), tape.mul(z, c));
  return restore_rank(h, tape.value(out));
}

template <typename T>
SentenceEncoder<T>::SentenceEncoder(const EncoderConfig& config, SplitMix64& rng) : config_(config) {
  const std::size_t d_emb = config.embedding_dim, d_h = config.hidden();
  Tensor<T> table({config.vocab_size, d_emb});
  if (config.trainable_embeddings) {
    for (auto& v : table.values()) v = static_cast<T>(rng.next_uniform(-0.1, 0.1));
  }
  embedding_ = Parameter<T>("embedding", std::move(table), config.trainable_embeddings);
  highway_ = {glorot<T>("highway.w_h", d_emb, d_emb, rng), glorot<T>("highway.w_g", d_emb, d_emb, rng),
              zeros<T>("highway.b_h", d_emb), zeros<T>("highway.b_g", d_emb)};
  const auto gru = [&](const std::string& prefix) {
    GruParams<T> g;
    g.w_z = glorot<T>(prefix + ".w_z", d_emb, d_h, rng);
    g.w_r = glorot<T>(prefix + ".w_r", d_emb, d_h, rng);
    g.w_c = glorot<T>(prefix + ".w_c", d_emb, d_h, rng);
    g.u_z = glorot<T>(prefix + ".u_z", d_h, d_h, rng);
    g.u_r = glorot<T>(prefix + ".u_r", d_h, d_h, rng);
    g.u_c = glorot<T>(prefix + ".u_c", d_h, d_h, rng);
    g.b_z = zeros<T>(prefix + ".b_z", d_h);
    g.b_r = zeros<T>(prefix + ".b_r", d_h);
    g.b_c = zeros<T>(prefix + ".b_c", d_h);
    return g;
  };
  switch (config.kind) {
    case EncoderKind::kCbow:
      proj_w_ = glorot<T>("projection.w", d_emb, d_h, rng);
      proj_b_ = zeros<T>("projection.b", d_h);
      break;
    case EncoderKind::kBigru:
      fwd_ = gru("gru_fwd");
      bwd_ = gru("gru_bwd");
      break;
    case EncoderKind::kGru:
      fwd_ = gru("gru_fwd");
      break;
  }
}

template <typename T>
template <typename Self, typename TapeT>
typename TapeT::Var SentenceEncoder<T>::encode_impl(Self& self, TapeT& tape, std::span<const TokenIds> sentences) {
  using Var = typename TapeT::Var;
  if (sentences.empty()) throw ShapeError("encode: empty batch");
  std::vector<std::int64_t> ids;
  std::vector<std::size_t> offsets{0};
  const std::size_t vocab = self.embedding_.value.rows();
  for (const auto& s : sentences) {
    if (s.empty()) throw EmptySentence();
    for (TokenId id : s) {
      if (id >= vocab) throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                                        std::to_string(vocab));
      ids.push_back(id);
    }
    offsets.push_back(ids.size());
  }
  const Var x = highway_rows<T>(tape, self.highway_, tape.gather_rows(tape.param(self.embedding_), std::move(ids)));
  switch (self.config_.kind) {
    case EncoderKind::kCbow: {
      const Var sum = tape.segment_sum(x, offsets);
      return tape.add_bias(tape.matmul(sum, tape.param(self.proj_w_)), tape.param(self.proj_b_));
    }
    case EncoderKind::kGru:
      return gru_rows<T>(tape, self.fwd_, x, offsets, false);
    case EncoderKind::kBigru: {
      const std::array<Var, 2> halves{gru_rows<T>(tape, self.fwd_, x, offsets, false),
                                      gru_rows<T>(tape, self.bwd_, x, offsets, true)};
      return tape.concat_cols(halves);
    }
  }
  throw ShapeError("encode: unknown encoder kind");
}

template <typename T>
auto SentenceEncoder<T>::encode(Tape<T>& tape, std::span<const TokenIds> sentences) -> Var {
  return encode_impl(*this, tape, sentences);
}

template <typename T>
auto SentenceEncoder<T>::encode(Tape<T>& tape, std::span<const TokenIds> sentences) const -> Var {
  return encode_impl(*this, tape, sentences);
}

template <typename T>
Tensor<T> SentenceEncoder<T>::encode_batch(std::span<const TokenIds> sentences) const {
  Tape<T> tape;
  return tape.value(encode_impl(*this, tape, sentences));
}

template <typename T>
Tensor<T> SentenceEncoder<T>::encode(const TokenIds& ids) const {
  const Tensor<T> row = encode_batch(std::span<const TokenIds>(&ids, 1));
  return Tensor<T>({row.size()}, std::vector<T>(row.values().begin(), row.values().end()));
}

template <typename T>
void SentenceEncoder<T>::set_pretrained_embeddings(Tensor<T> table) {
  if (table.rank() != 2 || table.rows() != config_.vocab_size || table.cols() != config_.embedding_dim) {
    throw ShapeError("embedding table " + num::shape_string(table.shape()) + " does not match [" +
                     std::to_string(config_.vocab_size) + "," + std::to_string(config_.embedding_dim) + "]");
  }
  embedding_ = Parameter<T>("embedding", std::move(table), false);
  config_.trainable_embeddings = false;
}

template <typename T>
std::vector<Parameter<T>*> SentenceEncoder<T>::parameters() {
  std::vector<Parameter<T>*> out{&embedding_, &highway_.w_h, &highway_.w_g, &highway_.b_h, &highway_.b_g};
  const auto add_gru = [&out](GruParams<T>& g) {
    for (auto* p : {&g.w_z, &g.w_r, &g.w_c, &g.u_z, &g.u_r, &g.u_c, &g.b_z, &g.b_r, &g.b_c}) out.push_back(p);
  };
  switch (config_.kind) {
    case EncoderKind::kCbow:
      out.push_back(&proj_w_);
      out.push_back(&proj_b_);
      break;
    case EncoderKind::kGru:
      add_gru(fwd_);
      break;
    case EncoderKind::kBigru:
      add_gru(fwd_);
      add_gru(bwd_);
      break;
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> SentenceEncoder<T>::parameters() const {
  auto mut = const_cast<SentenceEncoder*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename T>
template <typename U>
SentenceEncoder<U> SentenceEncoder<T>::cast() const {
  SentenceEncoder<U> out;
  out.config_ = config_;
  out.embedding_ = cast_param<U>(embedding_);
  out.highway_ = cast_highway<U>(highway_);
  out.proj_w_ = cast_param<U>(proj_w_);
  out.proj_b_ = cast_param<U>(proj_b_);
  out.fwd_ = cast_gru<U>(fwd_);
  out.bwd_ = cast_gru<U>(bwd_);
  return out;
}

Tensor<float> load_embeddings_text(const std::filesystem::path& path, const text::Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings file " + path.string());
  const std::string source = path.string();

  std::size_t dim = 0;
  std::optional<Tensor<float>> table;
  std::vector<std::uint8_t> filled;
  std::vector<double> sum;
  std::size_t loaded = 0;

  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) fields.emplace_back(line.data() + start, i - start);
    }
    if (fields.empty()) continue;

    if (lineno == 1 && fields.size() == 2) {
      std::size_t count = 0, d = 0;
      const auto parse = [](std::string_view f, std::size_t& v) {
        const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        return ec == std::errc() && p == f.data() + f.size();
      };
      if (parse(fields[0], count) && parse(fields[1], d)) {
        if (d == 0) throw FormatError(source, lineno, "header declares dimension 0");
        dim = d;
        continue;
      }
    }
    if (fields.size() < 2) throw FormatError(source, lineno, "expected a word followed by its vector");
    const std::size_t d = fields.size() - 1;
    if (dim == 0) dim = d;
    if (d != dim) {
      throw FormatError(source, lineno,
                        "vector has " + std::to_string(d) + " values, expected " + std::to_string(dim));
    }
    if (!table) {
      table.emplace(num::Shape{vocab.size(), dim});
      filled.assign(vocab.size(), 0);
      sum.assign(dim, 0.0);
    }
    std::vector<float> values(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const auto f = fields[k + 1];
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), values[k]);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(values[k])) {
        throw FormatError(source, lineno, "invalid number '" + std::string(f) + "'");
      }
      sum[k] += values[k];
    }
    ++loaded;
    const std::string word(fields[0]);
    if (!vocab.contains(word)) continue;
    const auto id = vocab.id(word);
    if (id == text::Vocabulary::kUnkId || filled[id]) continue;
    filled[id] = 1;
    std::copy(values.begin(), values.end(), table->row(id).begin());
  }
  if (!table) throw FormatError(source, lineno, "no word vectors found");
  for (std::size_t k = 0; k < dim; ++k) {
    (*table)(text::Vocabulary::kUnkId, k) = static_cast<float>(sum[k] / static_cast<double>(loaded));
  }
  return std::move(*table);
}

template HighwayParams<float> make_highway(std::size_t, const std::string&);
template HighwayParams<double> make_highway(std::size_t, const std::string&);
template GruParams<float> make_gru(std::size_t, std::size_t, const std::string&);
template GruParams<double> make_gru(std::size_t, std::size_t, const std::string&);
template Tensor<float> highway_forward(const HighwayParams<float>&, const Tensor<float>&);
template Tensor<double> highway_forward(const HighwayParams<double>&, const Tensor<double>&);
template Tensor<float> gru_step(const GruParams<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> gru_step(const GruParams<double>&, const Tensor<double>&, const Tensor<double>&);
template class SentenceEncoder<float>;
template class SentenceEncoder<double>;
template class SentenceEncoder<long double>;
template SentenceEncoder<long double> SentenceEncoder<double>::cast<long double>() const;
template SentenceEncoder<double> SentenceEncoder<float>::cast<double>() const;
template SentenceEncoder<float> SentenceEncoder<double>::cast<float>() const;
template SentenceEncoder<float> SentenceEncoder<float>::cast<float>() const;
template SentenceEncoder<double> SentenceEncoder<double>::cast<double>() const;

}  // namespace discsent::model
