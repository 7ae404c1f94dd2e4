#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace discsent::text {

/// A lowercased, tokenized sentence. Tokens are nonempty and whitespace-free.
using Sentence = std::vector<std::string>;

struct RawDocument {
  std::string source_id;
  std::string text;
};

struct Paragraph {
  std::string doc_id;
  std::size_t index = 0;
  std::vector<Sentence> sentences;
};

bool is_valid_utf8(std::string_view bytes);

/// True for every code point in the Unicode White_Space property.
bool is_unicode_space(char32_t cp);

/// Lowercases ASCII and the Latin-1 uppercase letters; other bytes pass through.
std::string to_lower(std::string_view s);

/// Splits on runs of blank lines (lines made only of Unicode whitespace).
std::vector<std::string> split_paragraphs(std::string_view text);

/// Lowercases, then splits after `.`, `!` or `?` followed by whitespace or end of
/// text. Closing quotes and brackets right after the terminator stay on the left.
std::vector<std::string> split_sentences(std::string_view paragraph);

/// Whitespace split, then detaches leading and trailing punctuation
/// (`, . ! ? ; : " ( ) [ ]` and `...`) as separate tokens.
/// Throws EmptySentence when nothing remains.
Sentence tokenize(std::string_view sentence);

/// Full segmentation of one document. Sentences that tokenize to nothing are
/// dropped, as are paragraphs left without sentences. Paragraph indices count
/// the surviving paragraphs.
std::vector<Paragraph> segment_document(const RawDocument& doc);

/// Regular files below `root`, as paths relative to it, sorted lexicographically
/// by their generic (forward-slash) form.
std::vector<std::filesystem::path> list_corpus_files(const std::filesystem::path& root);

std::string join_tokens(const Sentence& s);

}  // namespace discsent::text
