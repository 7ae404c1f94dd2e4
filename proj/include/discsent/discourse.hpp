#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "discsent/rng.hpp"
#include "discsent/text.hpp"

namespace discsent::discourse {

using text::Paragraph;
using text::Sentence;

enum class Category : std::uint8_t {
  kAddition,
  kContrast,
  kTime,
  kResult,
  kSpecific,
  kCompare,
  kStrengthen,
  kReturn,
  kRecognize,
};

inline constexpr std::size_t kNumCategories = 9;

std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view name);
constexpr std::size_t category_index(Category c) { return static_cast<std::size_t>(c); }

/// Sentence-initial discourse markers grouped into coherence-relation categories.
/// Phrases are one or two tokens long.
class ConjunctionLexicon {
 public:
  /// The fixed 40-phrase, 9-category grouping.
  static const ConjunctionLexicon& builtin();

  void add(std::string_view phrase, Category category);

  std::optional<Category> lookup(std::string_view phrase) const;
  std::size_t size() const { return phrases_.size(); }
  std::size_t max_phrase_tokens() const { return max_tokens_; }

  /// Phrases keyed by their token sequence.
  const std::map<std::vector<std::string>, Category>& phrases() const { return phrases_; }

 private:
  std::map<std::vector<std::string>, Category> phrases_;
  std::size_t max_tokens_ = 0;
};

struct ConjunctionMatch {
  Category category;
  Sentence stripped;
  std::string phrase;
};

/// Matches the longest lexicon phrase at the start of `s`, then removes it and
/// one following "," token. Returns nothing when no phrase matches or nothing
/// would be left.
std::optional<ConjunctionMatch> match_conjunction(const ConjunctionLexicon& lex, const Sentence& s);

struct OrderExample {
  Sentence s0;
  Sentence s1;
  bool swapped = false;
  friend bool operator==(const OrderExample&, const OrderExample&) = default;
};

struct ConjunctionExample {
  Sentence s0;
  Sentence s1;
  Category category = Category::kAddition;
  std::string phrase;
  friend bool operator==(const ConjunctionExample&, const ConjunctionExample&) = default;
};

struct NextExample {
  std::array<Sentence, 3> context;
  std::array<Sentence, 5> candidates;
  std::uint8_t answer = 0;
  friend bool operator==(const NextExample&, const NextExample&) = default;
};

/// Smallest paragraph that yields a NEXT example: 3 context + truth + 4 distractors.
inline constexpr std::size_t kNextMinSentences = 8;

/// One example per adjacent pair, each swapped on one draw of `rng`.
std::vector<OrderExample> extract_order_pairs(const Paragraph& p, SplitMix64& rng);

std::vector<ConjunctionExample> extract_conjunction_pairs(const ConjunctionLexicon& lex, const Paragraph& p);

std::optional<NextExample> extract_next_example(const Paragraph& p, SplitMix64& rng);

/// Every example extracted from one paragraph with its dedicated stream:
/// ORDER draws first, then NEXT.
struct ParagraphExamples {
  std::vector<OrderExample> order;
  std::vector<ConjunctionExample> conjunction;
  std::optional<NextExample> next;
};

ParagraphExamples extract_paragraph(const ConjunctionLexicon& lex, const Paragraph& p, std::uint64_t seed);

}  // namespace discsent::discourse
