#include "discsent/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <thread>

#include "discsent/checkpoint.hpp"
#include "discsent/error.hpp"
#include "discsent/parameter.hpp"
#include "discsent/rng.hpp"
#include "discsent/text.hpp"

namespace discsent::eval {

namespace {

std::filesystem::path sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".sentences";
  return p;
}

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  workers = std::max(1u, workers);
  if (workers == 1 || n <= 1) {
    work();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w) pool.emplace_back(work);
}

/// Encodes already tokenized sentences in fixed batches; row order follows input.
Tensor<float> encode_ids(const Model<float>& model, std::span<const model::TokenIds> ids, unsigned workers,
                         std::size_t batch_size) {
  const std::size_t dim = model.encoder().config().output_dim();
  Tensor<float> out({ids.size(), dim});
  if (ids.empty()) return out;
  batch_size = std::max<std::size_t>(1, batch_size);
  const std::size_t batches = (ids.size() + batch_size - 1) / batch_size;
  parallel_for(batches, workers, [&](std::size_t b) {
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(ids.size(), begin + batch_size);
    const auto enc = model.encoder().encode_batch(ids.subspan(begin, end - begin));
    std::copy(enc.values().begin(), enc.values().end(), out.data() + begin * dim);
  });
  return out;
}

std::uint32_t parse_label(const std::string& s, const std::string& source, std::size_t line) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }) || s.size() > 9) {
    throw FormatError(source, line, "label must be a non-negative integer, got '" + s + "'");
  }
  return static_cast<std::uint32_t>(std::stoul(s));
}

double accuracy(const num::Parameter<double>& w, const num::Parameter<double>& b, const Features& f) {
  std::size_t correct = 0;
  const std::size_t classes = b.value.size();
  std::vector<double> logits(classes);
  for (std::size_t r = 0; r < f.labels.size(); ++r) {
    const auto x = f.x.row(r);
    for (std::size_t k = 0; k < classes; ++k) logits[k] = b.value[k];
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t k = 0; k < classes; ++k) logits[k] += static_cast<double>(x[i]) * w.value(i, k);
    }
    const auto pred = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    correct += pred == f.labels[r];
  }
  return static_cast<double>(correct) / static_cast<double>(f.labels.size());
}

}  // namespace

model::TokenIds encode_text(const text::Vocabulary& vocab, std::string_view sentence) {
  return vocab.encode(text::tokenize(text::to_lower(sentence)));
}

EncodeResult encode_corpus(const Model<float>& model, const text::Vocabulary& vocab,
                           std::span<const std::string> sentences, unsigned workers, std::size_t batch_size) {
  std::vector<std::optional<model::TokenIds>> tokenized(sentences.size());
  parallel_for(sentences.size(), workers, [&](std::size_t i) {
    try {
      tokenized[i] = encode_text(vocab, sentences[i]);
    } catch (const EmptySentence&) {
    }
  });
  EncodeResult result;
  std::vector<model::TokenIds> ids;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!tokenized[i]) {
      ++result.skipped;
      continue;
    }
    ids.push_back(std::move(*tokenized[i]));
    result.index.sentences.push_back(sentences[i]);
  }
  result.index.encodings = encode_ids(model, ids, workers, batch_size);
  return result;
}

void save_index(const SentenceIndex& index, const std::filesystem::path& path) {
  if (index.encodings.rows() != index.size() || index.encodings.rank() != 2) {
    throw ShapeError("index has " + std::to_string(index.size()) + " sentences but encodings of shape " +
                     num::shape_string(index.encodings.shape()));
  }
  for (const auto& s : index.sentences) {
    if (s.find('\n') != std::string::npos) throw FormatError("index sentence contains a newline");
  }
  model::TensorArchive archive;
  archive.header["kind"] = "index";
  archive.header["count"] = index.size();
  archive.tensors.push_back({"encodings", index.encodings});
  write_archive(path, archive);

  const auto side = sidecar(path);
  std::ofstream f(side, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + side.string());
  for (const auto& s : index.sentences) f << s << '\n';
  if (!f) throw IoError("write failed for " + side.string());
}

SentenceIndex load_index(const std::filesystem::path& path) {
  const auto archive = model::read_archive(path);
  if (archive.header.value("kind", "") != "index") throw FormatError(path.string() + ": not a sentence index");
  SentenceIndex index;
  try {
    index.encodings = archive.at("encodings");
  } catch (const IndexError&) {
    throw FormatError(path.string() + ": index has no encodings tensor");
  }
  const auto side = sidecar(path);
  std::ifstream f(side, std::ios::binary);
  if (!f) throw IoError("cannot open " + side.string());
  for (std::string line; std::getline(f, line);) index.sentences.push_back(line);
  if (index.encodings.rank() != 2 || index.encodings.rows() != index.sentences.size()) {
    throw FormatError(path.string() + ": " + std::to_string(index.sentences.size()) +
                      " sentences do not match encodings of shape " + num::shape_string(index.encodings.shape()));
  }
  return index;
}

std::vector<Neighbor> nearest_neighbors(const SentenceIndex& index, std::span<const float> query, std::size_t k) {
  const std::size_t n = index.size();
  if (n == 0) return {};
  if (query.size() != index.encodings.cols()) {
    throw ShapeError("query has dimension " + std::to_string(query.size()) + ", index has " +
                     std::to_string(index.encodings.cols()));
  }
  std::vector<double> dist(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = index.encodings.row(r);
    double s = 0;
    for (std::size_t i = 0; i < query.size(); ++i) {
      const double d = static_cast<double>(row[i]) - static_cast<double>(query[i]);
      s += d * d;
    }
    dist[r] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t m = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  std::vector<Neighbor> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back({order[i], index.sentences[order[i]], dist[order[i]]});
  return out;
}

std::vector<Neighbor> nearest_neighbors(const Model<float>& model, const text::Vocabulary& vocab,
                                        const SentenceIndex& index, std::string_view query, std::size_t k) {
  const auto enc = model.encoder().encode(encode_text(vocab, query));
  return nearest_neighbors(index, enc.values(), k);
}

LabeledSet read_labeled_tsv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  LabeledSet set;
  std::size_t fields = 0;
  std::size_t lineno = 0;
  for (std::string line; std::getline(f, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      parts.push_back(line.substr(start, tab - start));
    }
    parts.push_back(line.substr(start));
    if (parts.size() != 2 && parts.size() != 3) {
      throw FormatError(path.string(), lineno, "expected 2 or 3 tab-separated fields, got " +
                                                   std::to_string(parts.size()));
    }
    if (fields == 0) fields = parts.size();
    if (parts.size() != fields) {
      throw FormatError(path.string(), lineno, "expected " + std::to_string(fields) + " fields like the first line");
    }
    set.labels.push_back(parse_label(parts[0], path.string(), lineno));
    set.first.push_back(std::move(parts[1]));
    if (fields == 3) set.second.push_back(std::move(parts[2]));
  }
  return set;
}

Features probe_features(const Model<float>& model, const text::Vocabulary& vocab, const LabeledSet& set,
                        unsigned workers) {
  Features f;
  std::vector<model::TokenIds> a, b;
  for (std::size_t i = 0; i < set.size(); ++i) {
    try {
      auto ia = encode_text(vocab, set.first[i]);
      if (set.pairs()) b.push_back(encode_text(vocab, set.second[i]));
      a.push_back(std::move(ia));
      f.labels.push_back(set.labels[i]);
    } catch (const EmptySentence&) {
      ++f.skipped;
    }
  }
  const auto ea = encode_ids(model, a, workers, 128);
  if (!set.pairs()) {
    f.x = ea;
    return f;
  }
  const auto eb = encode_ids(model, b, workers, 128);
  const std::size_t d = ea.cols();
  f.x = Tensor<float>({a.size(), 4 * d});
  for (std::size_t r = 0; r < a.size(); ++r) {
    const auto u = ea.row(r), v = eb.row(r);
    auto out = f.x.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      out[i] = u[i];
      out[d + i] = v[i];
      out[2 * d + i] = std::abs(u[i] - v[i]);
      out[3 * d + i] = u[i] * v[i];
    }
  }
  return f;
}

ProbeResult linear_probe(const Features& train, const Features& test, const ProbeConfig& config) {
  if (train.labels.empty() || test.labels.empty()) throw ProbeError("probe needs non-empty train and test sets");
  if (train.x.cols() != test.x.cols()) throw ShapeError("train and test features differ in width");
  std::vector<std::uint32_t> seen(train.labels);
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  if (seen.size() < 2) throw ProbeError("probe training labels contain a single class");
  const std::uint32_t max_label =
      std::max(seen.back(), *std::max_element(test.labels.begin(), test.labels.end()));
  const std::size_t classes = max_label + 1u;
  const std::size_t dim = train.x.cols();

  std::vector<std::size_t> order(train.labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (train.labels[a] != train.labels[b]) return train.labels[a] < train.labels[b];
    const auto ra = train.x.row(a), rb = train.x.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });

  num::Parameter<double> w("probe.w", Tensor<double>({dim, classes}));
  num::Parameter<double> b("probe.b", Tensor<double>({classes}));
  SplitMix64 rng(config.seed);
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  std::vector<double> logits(classes);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const auto x = train.x.row(order[i]);
        for (std::size_t k = 0; k < classes; ++k) logits[k] = b.value[k];
        for (std::size_t j = 0; j < dim; ++j) {
          for (std::size_t k = 0; k < classes; ++k) logits[k] += static_cast<double>(x[j]) * w.value(j, k);
        }
        const auto ce = num::softmax_cross_entropy<double>(logits, train.labels[order[i]]);
        for (std::size_t k = 0; k < classes; ++k) b.grad[k] += scale * ce.dlogits[k];
        for (std::size_t j = 0; j < dim; ++j) {
          for (std::size_t k = 0; k < classes; ++k) w.grad(j, k) += scale * x[j] * ce.dlogits[k];
        }
      }
      num::adagrad_update(w, config.lr);
      num::adagrad_update(b, config.lr);
    }
  }
  return {classes, accuracy(w, b, train), accuracy(w, b, test)};
}

}  // namespace discsent::eval
