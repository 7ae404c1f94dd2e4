#include "discsent/text.hpp"

#include <algorithm>
#include <array>
#include <optional>

#include "discsent/error.hpp"

namespace discsent::text {

namespace {

struct Decoded {
  char32_t cp;
  std::size_t length;
};

// Decodes one code point at `pos`; invalid sequences decode as a single byte.
Decoded decode_at(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  if (pos + len > s.size()) return {0xFFFD, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

bool is_blank(std::string_view line) {
  for (std::size_t i = 0; i < line.size();) {
    const auto d = decode_at(line, i);
    if (!is_unicode_space(d.cp)) return false;
    i += d.length;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size()) {
    const auto d = decode_at(s, begin);
    if (!is_unicode_space(d.cp)) break;
    begin += d.length;
  }
  std::size_t end = begin;
  for (std::size_t i = begin; i < s.size();) {
    const auto d = decode_at(s, i);
    i += d.length;
    if (!is_unicode_space(d.cp)) end = i;
  }
  return s.substr(begin, end - begin);
}

// Length of the whitespace code point at `pos`, or 0.
std::size_t space_at(std::string_view s, std::size_t pos) {
  const auto d = decode_at(s, pos);
  return is_unicode_space(d.cp) ? d.length : 0;
}

// Length of a closing quote or bracket at `pos`, or 0.
std::size_t closer_at(std::string_view s, std::size_t pos) {
  const char c = s[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  const auto d = decode_at(s, pos);
  // ’ ” »
  if (d.cp == 0x2019 || d.cp == 0x201D || d.cp == 0x00BB) return d.length;
  return 0;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_detachable(char c) {
  switch (c) {
    case ',':
    case '.':
    case '!':
    case '?':
    case ';':
    case ':':
    case '"':
    case '(':
    case ')':
    case '[':
    case ']':
      return true;
    default:
      return false;
  }
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> words;
  std::optional<std::size_t> start;
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t sp = space_at(s, i);
    if (sp > 0) {
      if (start) words.push_back(s.substr(*start, i - *start));
      start.reset();
      i += sp;
    } else {
      if (!start) start = i;
      i += decode_at(s, i).length;
    }
  }
  if (start) words.push_back(s.substr(*start));
  return words;
}

}  // namespace

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto b0 = static_cast<unsigned char>(bytes[i]);
    std::size_t len;
    char32_t min_cp;
    if (b0 < 0x80) {
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      min_cp = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      min_cp = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      min_cp = 0x10000;
    } else {
      return false;
    }
    const auto d = decode_at(bytes, i);
    if (d.length != len) return false;
    if (d.cp < min_cp || d.cp > 0x10FFFF || (d.cp >= 0xD800 && d.cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09:
    case 0x0A:
    case 0x0B:
    case 0x0C:
    case 0x0D:
    case 0x20:
    case 0x85:
    case 0xA0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 >= 'A' && b0 <= 'Z') {
      out.push_back(static_cast<char>(b0 - 'A' + 'a'));
      ++i;
      continue;
    }
    const auto d = decode_at(s, i);
    // U+00C0..U+00DE except U+00D7 (multiplication sign) lowercase by +0x20.
    if (d.length == 2 && d.cp >= 0xC0 && d.cp <= 0xDE && d.cp != 0xD7) {
      const char32_t lower = d.cp + 0x20;
      out.push_back(static_cast<char>(0xC0 | (lower >> 6)));
      out.push_back(static_cast<char>(0x80 | (lower & 0x3F)));
    } else {
      out.append(s.substr(i, d.length));
    }
    i += d.length;
  }
  return out;
}

std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> paragraphs;
  std::string current;
  bool in_paragraph = false;
  auto flush = [&] {
    const auto t = trim(current);
    if (!t.empty()) paragraphs.emplace_back(t);
    current.clear();
    in_paragraph = false;
  };
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    if (is_blank(line)) {
      if (in_paragraph) flush();
    } else {
      if (in_paragraph) current.push_back('\n');
      current.append(line);
      in_paragraph = true;
    }
    pos = nl + 1;
  }
  if (in_paragraph) flush();
  return paragraphs;
}

std::vector<std::string> split_sentences(std::string_view paragraph) {
  const std::string lowered = to_lower(paragraph);
  const std::string_view s = lowered;
  std::vector<std::string> sentences;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    const auto t = trim(s.substr(start, end - start));
    if (!t.empty()) sentences.emplace_back(t);
    start = end;
  };
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_terminator(s[i])) {
      i += decode_at(s, i).length;
      continue;
    }
    std::size_t end = i + 1;
    while (end < s.size()) {
      const std::size_t c = closer_at(s, end);
      if (c == 0) break;
      end += c;
    }
    if (end == s.size() || space_at(s, end) > 0) {
      emit(end);
    }
    i = std::max(end, i + 1);
  }
  emit(s.size());
  return sentences;
}

Sentence tokenize(std::string_view sentence) {
  Sentence tokens;
  for (std::string_view word : split_whitespace(sentence)) {
    std::vector<std::string> prefix;
    std::vector<std::string> suffix;
    while (!word.empty()) {
      if (word.starts_with("...")) {
        prefix.emplace_back("...");
        word.remove_prefix(3);
      } else if (is_detachable(word.front())) {
        prefix.emplace_back(1, word.front());
        word.remove_prefix(1);
      } else {
        break;
      }
    }
    while (!word.empty()) {
      if (word.ends_with("...")) {
        suffix.emplace_back("...");
        word.remove_suffix(3);
      } else if (is_detachable(word.back())) {
        suffix.emplace_back(1, word.back());
        word.remove_suffix(1);
      } else {
        break;
      }
    }
    tokens.insert(tokens.end(), prefix.begin(), prefix.end());
    if (!word.empty()) tokens.emplace_back(word);
    tokens.insert(tokens.end(), suffix.rbegin(), suffix.rend());
  }
  if (tokens.empty()) throw EmptySentence();
  return tokens;
}

std::vector<Paragraph> segment_document(const RawDocument& doc) {
  std::vector<Paragraph> out;
  for (const auto& raw : split_paragraphs(doc.text)) {
    Paragraph p{doc.source_id, out.size(), {}};
    for (const auto& sentence : split_sentences(raw)) {
      try {
        p.sentences.push_back(tokenize(sentence));
      } catch (const EmptySentence&) {
      }
    }
    if (!p.sentences.empty()) out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::filesystem::path> list_corpus_files(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_regular_file(root)) {
    files.push_back(root.filename());
    return files;
  }
  if (!fs::is_directory(root)) throw IoError("corpus path is not a directory: " + root.string());
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), root));
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.generic_string() < b.generic_string();
  });
  return files;
}

std::string join_tokens(const Sentence& s) {
  std::string out;
  for (const auto& t : s) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

}  // namespace discsent::text
