#include "discsent/vocabulary.hpp"

#include <algorithm>
#include <fstream>

#include "discsent/error.hpp"

namespace discsent::text {

void TokenCounts::add(const Sentence& s) {
  for (const auto& t : s) ++counts_[t];
}

void TokenCounts::add(std::string_view token, std::uint64_t n) { counts_[std::string(token)] += n; }

void TokenCounts::merge(const TokenCounts& other) {
  for (const auto& [token, n] : other.counts_) counts_[token] += n;
}

Vocabulary::Vocabulary() {
  tokens_.emplace_back(kUnkToken);
  counts_.push_back(0);
  index_.emplace(kUnkToken, kUnkId);
}

Vocabulary Vocabulary::build(const TokenCounts& counts, std::uint64_t min_count) {
  if (min_count < 1) min_count = 1;
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  std::uint64_t unk_count = 0;
  for (const auto& [token, n] : counts.map()) {
    if (token == kUnkToken || n < min_count) {
      unk_count += n;
    } else {
      kept.emplace_back(token, n);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.counts_[kUnkId] = unk_count;
  for (auto& [token, n] : kept) {
    v.index_.emplace(token, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(std::move(token));
    v.counts_.push_back(n);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, std::vector<std::uint64_t> counts) {
  if (tokens.empty() || tokens.front() != kUnkToken) {
    throw FormatError("vocabulary must start with " + std::string(kUnkToken));
  }
  if (counts.size() != tokens.size()) throw FormatError("vocabulary token/count length mismatch");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.counts_ = std::move(counts);
  v.index_.clear();
  for (TokenId i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second) {
      throw FormatError("duplicate vocabulary token: " + v.tokens_[i]);
    }
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary: " + path.string());
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw FormatError(path.string(), lineno, "expected token<TAB>count");
    tokens.push_back(line.substr(0, tab));
    try {
      std::size_t used = 0;
      counts.push_back(std::stoull(line.substr(tab + 1), &used));
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw FormatError(path.string(), lineno, "bad count");
    }
  }
  return from_tokens(std::move(tokens), std::move(counts));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary: " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << counts_[i] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::vector<TokenId> Vocabulary::encode(const Sentence& s) const {
  std::vector<TokenId> ids;
  ids.reserve(s.size());
  for (const auto& t : s) ids.push_back(id(t));
  return ids;
}

Sentence Vocabulary::decode(std::span<const TokenId> ids) const {
  Sentence s;
  s.reserve(ids.size());
  for (TokenId id : ids) s.push_back(tokens_.at(id));
  return s;
}

Vocabulary build_vocabulary(std::span<const Sentence> corpus, std::uint64_t min_count) {
  TokenCounts counts;
  for (const auto& s : corpus) counts.add(s);
  return Vocabulary::build(counts, min_count);
}

}  // namespace discsent::text
