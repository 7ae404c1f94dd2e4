#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "discsent/rng.hpp"

namespace discsent::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("discsent_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline const std::array<std::string, 8> kDatasetFiles = {
    "order.jsonl",       "order.heldout.jsonl", "conjunction.jsonl", "conjunction.heldout.jsonl",
    "next.jsonl",        "next.heldout.jsonl",  "stats.json",        "vocab.tsv",
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Small-vocabulary English-like corpus with conjunction-initial sentences and
/// paragraphs long enough for NEXT examples.
inline void write_synthetic_corpus(const std::filesystem::path& dir, int documents, std::uint64_t seed) {
  static const std::vector<std::string> subjects = {"the cat", "a dog", "my friend", "the old man", "she", "he",
                                                    "the river", "our town"};
  static const std::vector<std::string> verbs = {"walked", "saw", "liked", "found", "left", "built", "painted",
                                                 "heard"};
  static const std::vector<std::string> objects = {"the house", "a bird", "the road", "some bread", "the lake",
                                                   "a letter", "the garden", "an apple"};
  static const std::vector<std::string> openers = {"However, ", "Then ", "Still, ", "In fact, ", "Thus ",
                                                   "Moreover, ", "For example, ", "Certainly "};
  std::filesystem::create_directories(dir);
  SplitMix64 rng(seed);
  for (int d = 0; d < documents; ++d) {
    std::ofstream out(dir / ("doc" + std::to_string(d) + ".txt"));
    const auto paragraphs = 2 + rng.next_below(4);
    for (std::uint64_t p = 0; p < paragraphs; ++p) {
      const auto sentences = 2 + rng.next_below(10);
      for (std::uint64_t s = 0; s < sentences; ++s) {
        std::string sent;
        if (s > 0 && rng.next_below(4) == 0) sent += openers[rng.next_below(openers.size())];
        std::string body = subjects[rng.next_below(subjects.size())] + " " + verbs[rng.next_below(verbs.size())] +
                           " " + objects[rng.next_below(objects.size())];
        if (sent.empty()) body[0] = static_cast<char>(std::toupper(body[0]));
        out << sent << body << (rng.next_below(5) == 0 ? "!" : ".") << ' ';
      }
      out << "\n\n";
    }
  }
}

/// Random printable text with heavy punctuation, quotes, and irregular blank lines.
inline void write_fuzz_corpus(const std::filesystem::path& dir, int documents, std::uint64_t seed) {
  static const std::string alphabet = "abcdefghij ABC  ..!?,;:\"'()[]-  \n";
  static const std::vector<std::string> words = {"however", "in", "fact", "still", "then", "that", "is", "x", "yy"};
  std::filesystem::create_directories(dir);
  SplitMix64 rng(seed);
  for (int d = 0; d < documents; ++d) {
    std::ofstream out(dir / ("f" + std::to_string(d) + ".txt"), std::ios::binary);
    const auto len = 200 + rng.next_below(3000);
    for (std::uint64_t i = 0; i < len; ++i) {
      const auto r = rng.next_below(10);
      if (r < 2) {
        out << words[rng.next_below(words.size())] << (rng.next_bit() ? ", " : " ");
      } else if (r == 2) {
        out << ". ";
      } else if (r == 3 && rng.next_below(8) == 0) {
        out << "\n\n";
      } else {
        out << alphabet[rng.next_below(alphabet.size())];
      }
    }
  }
}

}  // namespace discsent::test
