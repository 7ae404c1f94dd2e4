#include <doctest.h>

#include "discsent/error.hpp"
#include "discsent/rng.hpp"
#include "discsent/text.hpp"
#include "discsent/vocabulary.hpp"

using namespace discsent;
using namespace discsent::text;

TEST_CASE("split_paragraphs") {
  CHECK(split_paragraphs("a\n\nb") == std::vector<std::string>{"a", "b"});
  CHECK(split_paragraphs("a\n \n\nb") == std::vector<std::string>{"a", "b"});
  CHECK(split_paragraphs("").empty());
  CHECK(split_paragraphs("\n\n  \n").empty());
  // Lines inside a paragraph stay together; U+3000 counts as whitespace.
  CHECK(split_paragraphs("one\ntwo\n\xE3\x80\x80\nthree\n") == std::vector<std::string>{"one\ntwo", "three"});
  CHECK(split_paragraphs("a\r\n\r\nb") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("split_paragraphs inverts joining with blank lines") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> parts;
    const auto n = 1 + rng.next_below(6);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string s;
      const auto len = 1 + rng.next_below(12);
      for (std::uint64_t k = 0; k < len; ++k) s.push_back(static_cast<char>('a' + rng.next_below(26)));
      parts.push_back(s);
    }
    std::string joined;
    for (std::size_t i = 0; i < parts.size(); ++i) joined += (i ? "\n\n" : "") + parts[i];
    CHECK(split_paragraphs(joined) == parts);
  }
}

TEST_CASE("split_sentences") {
  CHECK(split_sentences("He had a point. For good measure, I pouted.") ==
        std::vector<std::string>{"he had a point.", "for good measure, i pouted."});
  CHECK(split_sentences("it doesn't hurt at all.") == std::vector<std::string>{"it doesn't hurt at all."});
  CHECK(split_sentences("wait... what?") == std::vector<std::string>{"wait...", "what?"});
  CHECK(split_sentences("He said \"stop!\" She ran. (Really.) Yes") ==
        std::vector<std::string>{"he said \"stop!\"", "she ran.", "(really.)", "yes"});
  CHECK(split_sentences("version 2.5 is out") == std::vector<std::string>{"version 2.5 is out"});
  CHECK(split_sentences("   ").empty());
  // Known limitation: abbreviations end sentences.
  CHECK(split_sentences("Mr. Smith left.").size() == 2);
}

TEST_CASE("to_lower handles ASCII and Latin-1 capitals") {
  CHECK(to_lower("ABC xyz") == "abc xyz");
  CHECK(to_lower("\xC3\x89T\xC3\x89") == "\xC3\xA9t\xC3\xA9");  // ÉTÉ -> été
  CHECK(to_lower("\xC3\x97") == "\xC3\x97");                    // × unchanged
}

TEST_CASE("tokenize") {
  CHECK(tokenize("it doesn't hurt at all.") == Sentence{"it", "doesn't", "hurt", "at", "all", "."});
  CHECK(tokenize("\"stop!\"") == Sentence{"\"", "stop", "!", "\""});
  CHECK_THROWS_AS(tokenize("   "), EmptySentence);
  CHECK(tokenize("wait...") == Sentence{"wait", "..."});
  CHECK(tokenize("(well-known), [x];") == Sentence{"(", "well-known", ")", ",", "[", "x", "]", ";"});
  CHECK(tokenize("u.s.a.") == Sentence{"u.s.a", "."});
}

TEST_CASE("tokenize is idempotent on its own output") {
  SplitMix64 rng(11);
  const std::string alphabet = "ab.,!?;:\"()[]'- ";
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const auto len = 1 + rng.next_below(30);
    for (std::uint64_t i = 0; i < len; ++i) s.push_back(alphabet[rng.next_below(alphabet.size())]);
    Sentence first;
    try {
      first = tokenize(s);
    } catch (const EmptySentence&) {
      continue;
    }
    for (const auto& t : first) {
      CHECK(!t.empty());
      CHECK(t.find(' ') == std::string::npos);
    }
    CHECK(tokenize(join_tokens(first)) == first);
  }
}

TEST_CASE("utf8 validation") {
  CHECK(is_valid_utf8("plain"));
  CHECK(is_valid_utf8("caf\xC3\xA9"));
  CHECK_FALSE(is_valid_utf8("\xC3"));
  CHECK_FALSE(is_valid_utf8("\xC0\xAF"));          // overlong
  CHECK_FALSE(is_valid_utf8("\xED\xA0\x80"));      // surrogate
  CHECK_FALSE(is_valid_utf8("\xF4\x90\x80\x80"));  // above U+10FFFF
}

TEST_CASE("segment_document numbers surviving paragraphs") {
  const auto ps = segment_document({"doc", "First one. Second!\n\n  \n\nThird?"});
  REQUIRE(ps.size() == 2);
  CHECK(ps[0].doc_id == "doc");
  CHECK(ps[0].index == 0);
  CHECK(ps[1].index == 1);
  CHECK(ps[0].sentences == std::vector<Sentence>{{"first", "one", "."}, {"second", "!"}});
  CHECK(ps[1].sentences == std::vector<Sentence>{{"third", "?"}});
}

TEST_CASE("build_vocabulary orders by count then token") {
  const std::vector<Sentence> corpus = {{"a", "b"}, {"a"}};
  const auto v1 = build_vocabulary(corpus, 1);
  REQUIRE(v1.size() == 3);
  CHECK(v1.token(0) == "<unk>");
  CHECK(v1.id("a") == 1);
  CHECK(v1.id("b") == 2);

  const auto v2 = build_vocabulary(corpus, 2);
  CHECK(v2.size() == 2);
  CHECK(v2.id("a") == 1);
  CHECK(v2.id("b") == Vocabulary::kUnkId);
  CHECK(v2.count(0) == 1);

  const auto empty = build_vocabulary(std::vector<Sentence>{}, 2);
  CHECK(empty.size() == 1);
  CHECK(empty.token(0) == "<unk>");

  const auto tie = build_vocabulary(std::vector<Sentence>{{"z", "y", "x", "y"}}, 1);
  CHECK(tie.tokens() == std::vector<std::string>{"<unk>", "y", "x", "z"});
}

TEST_CASE("vocabulary ids do not depend on corpus order") {
  SplitMix64 rng(3);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 50; ++i) {
    Sentence s;
    for (int k = 0; k < 6; ++k) s.push_back(std::string(1, static_cast<char>('a' + rng.next_below(8))));
    corpus.push_back(s);
  }
  const auto v = build_vocabulary(corpus, 1);
  for (int trial = 0; trial < 10; ++trial) {
    shuffle(corpus.begin(), corpus.end(), rng);
    CHECK(build_vocabulary(corpus, 1) == v);
  }
}

TEST_CASE("encode and decode") {
  const auto v = Vocabulary::from_tokens({"<unk>", "a", "b"}, {0, 2, 1});
  CHECK(v.encode({"a", "z", "b"}) == std::vector<TokenId>{1, 0, 2});
  CHECK(v.encode({"a"}) == std::vector<TokenId>{1});
  CHECK(v.encode({"x", "y"}) == std::vector<TokenId>{0, 0});
  const Sentence s{"a", "q", "b", "b"};
  const auto ids = v.encode(s);
  CHECK(ids.size() == s.size());
  CHECK(v.decode(ids) == Sentence{"a", "<unk>", "b", "b"});
}

TEST_CASE("vocabulary file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "discsent_vocab_test.tsv";
  const auto v = build_vocabulary(std::vector<Sentence>{{"the", "cat", "the"}, {"sat"}}, 1);
  v.save(path);
  CHECK(Vocabulary::load(path) == v);
  std::filesystem::remove(path);
}
