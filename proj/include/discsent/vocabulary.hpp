#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "discsent/text.hpp"

namespace discsent::text {

using TokenId = std::uint32_t;

/// Token frequency table. Merging is commutative, so per-document counts can be
/// combined in any order.
class TokenCounts {
 public:
  void add(const Sentence& s);
  void add(std::string_view token, std::uint64_t n = 1);
  void merge(const TokenCounts& other);

  const std::unordered_map<std::string, std::uint64_t>& map() const { return counts_; }

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
};

/// Dense token ids. Id 0 is always "<unk>"; the rest are ordered by descending
/// count, ties broken lexicographically.
class Vocabulary {
 public:
  static constexpr TokenId kUnkId = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  static Vocabulary build(const TokenCounts& counts, std::uint64_t min_count = 2);

  /// Rebuilds from an id-ordered token list; ids[0] must be "<unk>".
  static Vocabulary from_tokens(std::vector<std::string> tokens, std::vector<std::uint64_t> counts);

  /// Reads the "token<TAB>count" file written by save(); line number = id.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::uint64_t count(TokenId id) const { return counts_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  std::vector<TokenId> encode(const Sentence& s) const;
  Sentence decode(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

Vocabulary build_vocabulary(std::span<const Sentence> corpus, std::uint64_t min_count = 2);

}  // namespace discsent::text
