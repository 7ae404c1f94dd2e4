#include "discsent/discourse.hpp"

#include <algorithm>
#include <numeric>

#include "discsent/error.hpp"

namespace discsent::discourse {

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "addition", "contrast", "time", "result", "specific", "compare", "strengthen", "return", "recognize",
};

Sentence split_phrase(std::string_view phrase) {
  Sentence tokens;
  std::size_t pos = 0;
  while (pos < phrase.size()) {
    const auto sp = phrase.find(' ', pos);
    const auto end = sp == std::string_view::npos ? phrase.size() : sp;
    if (end > pos) tokens.emplace_back(phrase.substr(pos, end - pos));
    pos = end + 1;
  }
  return tokens;
}

ConjunctionLexicon make_builtin() {
  ConjunctionLexicon lex;
  const auto group = [&lex](Category c, std::initializer_list<std::string_view> phrases) {
    for (auto p : phrases) lex.add(p, c);
  };
  group(Category::kAddition,
        {"again", "also", "besides", "finally", "further", "furthermore", "moreover", "in addition"});
  group(Category::kContrast, {"anyway", "contrarily", "however", "conversely", "instead", "nonetheless",
                              "nevertheless", "in contrast", "otherwise", "rather"});
  group(Category::kTime, {"meanwhile", "next", "then", "now", "thereafter"});
  group(Category::kResult, {"accordingly", "consequently", "hence", "thus", "therefore"});
  group(Category::kSpecific, {"namely", "specifically", "notably", "that is", "for example"});
  group(Category::kCompare, {"likewise", "similarly"});
  group(Category::kStrengthen, {"indeed", "in fact"});
  group(Category::kReturn, {"still"});
  group(Category::kRecognize, {"undoubtedly", "certainly"});
  return lex;
}

}  // namespace

std::string_view category_name(Category c) { return kCategoryNames.at(category_index(c)); }

std::optional<Category> parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == name) return static_cast<Category>(i);
  }
  return std::nullopt;
}

const ConjunctionLexicon& ConjunctionLexicon::builtin() {
  static const ConjunctionLexicon lex = make_builtin();
  return lex;
}

void ConjunctionLexicon::add(std::string_view phrase, Category category) {
  auto tokens = split_phrase(phrase);
  if (tokens.empty()) throw Error("empty conjunction phrase");
  max_tokens_ = std::max(max_tokens_, tokens.size());
  phrases_[std::move(tokens)] = category;
}

std::optional<Category> ConjunctionLexicon::lookup(std::string_view phrase) const {
  const auto it = phrases_.find(split_phrase(phrase));
  if (it == phrases_.end()) return std::nullopt;
  return it->second;
}

std::optional<ConjunctionMatch> match_conjunction(const ConjunctionLexicon& lex, const Sentence& s) {
  for (std::size_t len = std::min(lex.max_phrase_tokens(), s.size()); len >= 1; --len) {
    const Sentence prefix(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(len));
    const auto it = lex.phrases().find(prefix);
    if (it == lex.phrases().end()) continue;
    std::size_t cut = len;
    if (cut < s.size() && s[cut] == ",") ++cut;
    if (cut == s.size()) return std::nullopt;
    return ConjunctionMatch{it->second, Sentence(s.begin() + static_cast<std::ptrdiff_t>(cut), s.end()),
                            text::join_tokens(prefix)};
  }
  return std::nullopt;
}

std::vector<OrderExample> extract_order_pairs(const Paragraph& p, SplitMix64& rng) {
  std::vector<OrderExample> out;
  const auto& ss = p.sentences;
  for (std::size_t i = 0; i + 1 < ss.size(); ++i) {
    if (rng.next_bit()) {
      out.push_back({ss[i + 1], ss[i], true});
    } else {
      out.push_back({ss[i], ss[i + 1], false});
    }
  }
  return out;
}

std::vector<ConjunctionExample> extract_conjunction_pairs(const ConjunctionLexicon& lex, const Paragraph& p) {
  std::vector<ConjunctionExample> out;
  const auto& ss = p.sentences;
  for (std::size_t i = 0; i + 1 < ss.size(); ++i) {
    if (auto m = match_conjunction(lex, ss[i + 1])) {
      out.push_back({ss[i], std::move(m->stripped), m->category, std::move(m->phrase)});
    }
  }
  return out;
}

std::optional<NextExample> extract_next_example(const Paragraph& p, SplitMix64& rng) {
  const auto& ss = p.sentences;
  if (ss.size() < kNextMinSentences) return std::nullopt;

  // Partial Fisher-Yates over the positions after the true successor.
  std::vector<std::size_t> pool(ss.size() - 4);
  std::iota(pool.begin(), pool.end(), std::size_t{4});
  for (std::size_t i = 0; i < 4; ++i) {
    const auto j = i + rng.next_below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  std::array<std::size_t, 5> positions = {3, pool[0], pool[1], pool[2], pool[3]};
  shuffle(positions.begin(), positions.end(), rng);

  NextExample ex;
  for (std::size_t i = 0; i < 3; ++i) ex.context[i] = ss[i];
  for (std::size_t i = 0; i < 5; ++i) {
    ex.candidates[i] = ss[positions[i]];
    if (positions[i] == 3) ex.answer = static_cast<std::uint8_t>(i);
  }
  return ex;
}

ParagraphExamples extract_paragraph(const ConjunctionLexicon& lex, const Paragraph& p, std::uint64_t seed) {
  SplitMix64 rng(paragraph_seed(seed, p.doc_id, p.index));
  ParagraphExamples out;
  out.order = extract_order_pairs(p, rng);
  out.conjunction = extract_conjunction_pairs(lex, p);
  out.next = extract_next_example(p, rng);
  return out;
}

}  // namespace discsent::discourse
