#include <doctest.h>

#include <cmath>
#include <fstream>

#include "discsent/checkpoint.hpp"
#include "discsent/error.hpp"
#include "discsent/evalkit.hpp"
#include "model_util.hpp"
#include "test_util.hpp"

using namespace discsent;
using namespace discsent::eval;
using model::EncoderKind;

namespace {

text::Vocabulary tiny_vocab() {
  std::vector<std::string> tokens{"<unk>"};
  for (std::size_t i = 1; i < test::kTinyVocab; ++i) tokens.push_back("w" + std::to_string(i));
  return text::Vocabulary::from_tokens(tokens, std::vector<std::uint64_t>(tokens.size(), 3));
}

std::string random_line(SplitMix64& rng) {
  std::string s;
  const auto n = 1 + rng.next_below(6);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += rng.next_below(5) == 0 ? "W" + std::to_string(1 + rng.next_below(20)) : "w" + std::to_string(1 + rng.next_below(15));
  }
  if (rng.next_bit()) s += '.';
  return s;
}

double gaussian(SplitMix64& rng) {
  const double u = std::max(rng.next_unit(), 1e-300), v = rng.next_unit();
  return std::sqrt(-2 * std::log(u)) * std::cos(2 * M_PI * v);
}

/// Two Gaussian clusters with unit spread around ±`offset` in every coordinate.
Features clusters(std::size_t n, std::size_t dim, double offset, SplitMix64& rng) {
  Features f;
  f.x = Tensor<float>({n, dim});
  for (std::size_t r = 0; r < n; ++r) {
    const auto label = static_cast<std::uint32_t>(rng.next_below(2));
    f.labels.push_back(label);
    for (auto& v : f.x.row(r)) v = static_cast<float>((label ? offset : -offset) + gaussian(rng));
  }
  return f;
}

SentenceIndex toy_index(std::vector<float> values, std::size_t dim) {
  SentenceIndex idx;
  const std::size_t n = values.size() / dim;
  idx.encodings = Tensor<float>({n, dim}, std::move(values));
  for (std::size_t i = 0; i < n; ++i) idx.sentences.push_back("s" + std::to_string(i));
  return idx;
}

}  // namespace

TEST_CASE("encode_corpus") {
  const auto vocab = tiny_vocab();
  for (auto kind : {EncoderKind::kCbow, EncoderKind::kGru, EncoderKind::kBigru}) {
    SplitMix64 rng(11);
    const auto model = test::tiny_model<float>(kind, 6, rng);
    std::vector<std::string> lines;
    for (int i = 0; i < 50; ++i) lines.push_back(random_line(rng));
    lines.push_back("   ");
    lines.push_back(lines[3]);
    lines.push_back("");

    SUBCASE("rows match sentences and skipped lines are counted") {
      const auto r = encode_corpus(model, vocab, lines, 1, 7);
      CHECK(r.skipped == 2);
      CHECK(r.index.size() == lines.size() - 2);
      CHECK(r.index.encodings.shape() == num::Shape{lines.size() - 2, 6});
      CHECK(r.index.sentences.back() == lines[3]);
    }
    SUBCASE("duplicates give identical rows; rows equal single-sentence encodings") {
      const auto r = encode_corpus(model, vocab, lines, 1, 7);
      const auto last = r.index.size() - 1;
      CHECK(std::ranges::equal(r.index.encodings.row(3), r.index.encodings.row(last)));
      for (std::size_t i = 0; i < r.index.size(); ++i) {
        const auto single = model.encoder().encode(encode_text(vocab, r.index.sentences[i]));
        CHECK(std::ranges::equal(single.values(), r.index.encodings.row(i)));
      }
    }
    SUBCASE("independent of workers and batch size") {
      const auto a = encode_corpus(model, vocab, lines, 1, 128);
      const auto b = encode_corpus(model, vocab, lines, 4, 3);
      CHECK(a.index.encodings == b.index.encodings);
      CHECK(a.index.sentences == b.index.sentences);
    }
    SUBCASE("permutation equivariance") {
      std::vector<std::string> kept;
      for (const auto& l : lines) {
        if (l.find_first_not_of(' ') != std::string::npos) kept.push_back(l);
      }
      const auto base = encode_corpus(model, vocab, kept, 2, 5);
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<std::size_t> perm(kept.size());
        std::iota(perm.begin(), perm.end(), 0);
        SplitMix64 prng(seed);
        shuffle(perm.begin(), perm.end(), prng);
        std::vector<std::string> permuted;
        for (auto p : perm) permuted.push_back(kept[p]);
        const auto r = encode_corpus(model, vocab, permuted, 3, 4);
        for (std::size_t i = 0; i < perm.size(); ++i) {
          CHECK(std::ranges::equal(r.index.encodings.row(i), base.index.encodings.row(perm[i])));
        }
      }
    }
  }
}

TEST_CASE("nearest_neighbors") {
  SUBCASE("one-dimensional toy index") {
    const auto idx = toy_index({0, 10}, 1);
    const float q = 1;
    const auto nn = nearest_neighbors(idx, std::span(&q, 1), 1);
    REQUIRE(nn.size() == 1);
    CHECK(nn[0].index == 0);
    CHECK(nn[0].sentence == "s0");
    CHECK(nn[0].distance == 1.0);
    CHECK(nearest_neighbors(idx, std::span(&q, 1), 5).size() == 2);
  }
  SUBCASE("ties follow index order") {
    const auto idx = toy_index({2, -2, 2, 0}, 1);
    const float q = 0;
    const auto nn = nearest_neighbors(idx, std::span(&q, 1), 4);
    CHECK(nn[0].index == 3);
    CHECK(nn[1].index == 0);
    CHECK(nn[2].index == 1);
    CHECK(nn[3].index == 2);
  }
  SUBCASE("random indexes: sorted, self at distance 0, distances match") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SplitMix64 rng(seed);
      const std::size_t n = 1 + rng.next_below(30), d = 1 + rng.next_below(6);
      std::vector<float> values(n * d);
      for (auto& v : values) v = static_cast<float>(rng.next_uniform(-3, 3));
      const auto idx = toy_index(values, d);
      const std::size_t self = rng.next_below(n);
      const std::size_t k = 1 + rng.next_below(n + 3);
      const auto nn = nearest_neighbors(idx, idx.encodings.row(self), k);
      CHECK(nn.size() == std::min(k, n));
      CHECK(nn[0].distance == 0.0);
      for (std::size_t i = 1; i < nn.size(); ++i) CHECK(nn[i - 1].distance <= nn[i].distance);
      for (const auto& hit : nn) {
        long double s = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const long double diff = static_cast<long double>(idx.encodings(hit.index, j)) - idx.encodings(self, j);
          s += diff * diff;
        }
        CHECK(hit.distance == doctest::Approx(static_cast<double>(std::sqrt(s))).epsilon(1e-12));
      }
    }
  }
  SUBCASE("text query finds itself first") {
    const auto vocab = tiny_vocab();
    SplitMix64 rng(4);
    const auto model = test::tiny_model<float>(EncoderKind::kBigru, 6, rng);
    const std::vector<std::string> lines{"w1 w2 w3", "w4 w5", "w3 w2 w1", "w7"};
    const auto r = encode_corpus(model, vocab, lines);
    const auto nn = nearest_neighbors(model, vocab, r.index, "W4 w5", 4);
    REQUIRE(nn.size() == 4);
    CHECK(nn[0].sentence == "w4 w5");
    CHECK(nn[0].distance == 0.0);
    CHECK_THROWS_AS(nearest_neighbors(model, vocab, r.index, "  ", 2), EmptySentence);
  }
  SUBCASE("dimension mismatch") {
    const auto idx = toy_index({0, 1, 2, 3}, 2);
    const float q = 0;
    CHECK_THROWS_AS(nearest_neighbors(idx, std::span(&q, 1), 1), ShapeError);
  }
}

TEST_CASE("sentence index persistence") {
  test::TempDir dir;
  const auto vocab = tiny_vocab();
  SplitMix64 rng(2);
  const auto model = test::tiny_model<float>(EncoderKind::kGru, 5, rng);
  const std::vector<std::string> lines{"w1 w2", "w3", "w4 w5 w6."};
  const auto r = encode_corpus(model, vocab, lines);
  const auto path = dir.path() / "sents.idx";
  save_index(r.index, path);
  const auto back = load_index(path);
  CHECK(back.encodings == r.index.encodings);
  CHECK(back.sentences == r.index.sentences);

  model::save_checkpoint({model, vocab, {}, 0}, dir.path() / "m.dsc");
  CHECK_THROWS_AS(load_index(dir.path() / "m.dsc"), FormatError);
  std::filesystem::remove(dir.path() / "sents.idx.sentences");
  CHECK_THROWS_AS(load_index(path), IoError);
}

TEST_CASE("read_labeled_tsv") {
  test::TempDir dir;
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir.path() / name, std::ios::binary) << body;
    return dir.path() / name;
  };
  const auto single = read_labeled_tsv(write("a.tsv", "0\tthe cat sat\n1\ta dog ran\r\n\n2\tbirds\n"));
  CHECK(single.size() == 3);
  CHECK_FALSE(single.pairs());
  CHECK(single.labels == std::vector<std::uint32_t>{0, 1, 2});
  CHECK(single.first[1] == "a dog ran");

  const auto pairs = read_labeled_tsv(write("b.tsv", "1\ta b\tc d\n0\te\tf\n"));
  CHECK(pairs.pairs());
  CHECK(pairs.second == std::vector<std::string>{"c d", "f"});

  try {
    read_labeled_tsv(write("c.tsv", "1\ta\n0\tb\tc\n"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(read_labeled_tsv(write("d.tsv", "x\ta\n")), FormatError);
  CHECK_THROWS_AS(read_labeled_tsv(write("e.tsv", "-1\ta\n")), FormatError);
  CHECK_THROWS_AS(read_labeled_tsv(write("f.tsv", "3\n")), FormatError);
  CHECK_THROWS_AS(read_labeled_tsv(dir.path() / "missing.tsv"), IoError);
}

TEST_CASE("probe_features") {
  const auto vocab = tiny_vocab();
  SplitMix64 rng(6);
  const auto model = test::tiny_model<float>(EncoderKind::kCbow, 3, rng);
  LabeledSet set;
  set.labels = {1, 0, 1};
  set.first = {"w1 w2", " \t ", "w5"};
  set.second = {"w3", "w4", "w6 w7"};
  const auto f = probe_features(model, vocab, set);
  CHECK(f.skipped == 1);
  CHECK(f.labels == std::vector<std::uint32_t>{1, 1});
  REQUIRE(f.x.shape() == num::Shape{2, 12});
  const auto a = model.encoder().encode(encode_text(vocab, "w5"));
  const auto b = model.encoder().encode(encode_text(vocab, "w6 w7"));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(f.x(1, i) == a[i]);
    CHECK(f.x(1, 3 + i) == b[i]);
    CHECK(f.x(1, 6 + i) == std::abs(a[i] - b[i]));
    CHECK(f.x(1, 9 + i) == a[i] * b[i]);
  }
  set.second.clear();
  const auto g = probe_features(model, vocab, set);
  CHECK(g.x.shape() == num::Shape{2, 3});
}

TEST_CASE("linear_probe") {
  SUBCASE("separated Gaussian clusters") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SplitMix64 rng(seed);
      const auto train = clusters(200, 8, 1.0, rng);
      const auto test = clusters(200, 8, 1.0, rng);
      const auto r = linear_probe(train, test, {.seed = seed});
      CHECK(r.classes == 2);
      CHECK(r.test_accuracy >= 0.95);
      CHECK(r.train_accuracy >= 0.95);
    }
  }
  SUBCASE("evaluating on the training set reproduces train accuracy") {
    SplitMix64 rng(3);
    const auto train = clusters(60, 4, 0.5, rng);
    const auto r = linear_probe(train, train);
    CHECK(r.test_accuracy == r.train_accuracy);
  }
  SUBCASE("invariant to training set order") {
    SplitMix64 rng(9);
    const auto train = clusters(80, 3, 0.3, rng);
    const auto test = clusters(80, 3, 0.3, rng);
    const auto base = linear_probe(train, test, {.epochs = 20});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      std::vector<std::size_t> perm(train.labels.size());
      std::iota(perm.begin(), perm.end(), 0);
      SplitMix64 prng(seed + 100);
      shuffle(perm.begin(), perm.end(), prng);
      Features shuffled;
      shuffled.x = Tensor<float>(train.x.shape());
      for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.labels.push_back(train.labels[perm[i]]);
        std::ranges::copy(train.x.row(perm[i]), shuffled.x.row(i).begin());
      }
      const auto r = linear_probe(shuffled, test, {.epochs = 20});
      CHECK(r.train_accuracy == base.train_accuracy);
      CHECK(r.test_accuracy == base.test_accuracy);
    }
  }
  SUBCASE("three classes") {
    SplitMix64 rng(1);
    Features train, test;
    for (auto* f : {&train, &test}) {
      f->x = Tensor<float>({150, 2});
      for (std::size_t r = 0; r < 150; ++r) {
        const auto label = static_cast<std::uint32_t>(r % 3);
        f->labels.push_back(label);
        f->x(r, 0) = static_cast<float>(4 * std::cos(2 * M_PI * label / 3) + 0.5 * gaussian(rng));
        f->x(r, 1) = static_cast<float>(4 * std::sin(2 * M_PI * label / 3) + 0.5 * gaussian(rng));
      }
    }
    const auto r = linear_probe(train, test);
    CHECK(r.classes == 3);
    CHECK(r.test_accuracy >= 0.95);
  }
  SUBCASE("errors") {
    SplitMix64 rng(2);
    auto train = clusters(20, 2, 1.0, rng);
    const auto test = clusters(20, 2, 1.0, rng);
    auto one_class = train;
    for (auto& l : one_class.labels) l = 1;
    CHECK_THROWS_AS(linear_probe(one_class, test), ProbeError);
    CHECK_THROWS_AS(linear_probe(Features{}, test), ProbeError);
    CHECK_THROWS_AS(linear_probe(train, Features{}), ProbeError);
  }
}
