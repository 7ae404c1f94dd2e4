#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discsent/discourse.hpp"

namespace discsent::dataset {

using discourse::ConjunctionExample;
using discourse::NextExample;
using discourse::OrderExample;

enum class Task : std::uint8_t { kOrder = 0, kConjunction = 1, kNext = 2 };
inline constexpr std::size_t kNumTasks = 3;
inline constexpr std::array<Task, kNumTasks> kAllTasks = {Task::kOrder, Task::kConjunction, Task::kNext};

std::string_view task_name(Task t);
std::optional<Task> parse_task(std::string_view name);
constexpr std::size_t task_index(Task t) { return static_cast<std::size_t>(t); }

/// File stem of each task's JSON Lines output ("order", "conjunction", "next").
std::string task_file(Task t, bool heldout);

nlohmann::json to_json(const OrderExample& ex);
nlohmann::json to_json(const ConjunctionExample& ex);
nlohmann::json to_json(const NextExample& ex);

/// Parsers validate the record shape and throw FormatError on any mismatch.
OrderExample order_from_json(const nlohmann::json& j);
ConjunctionExample conjunction_from_json(const nlohmann::json& j);
NextExample next_from_json(const nlohmann::json& j);

/// Serialized record line without the trailing newline.
template <typename Example>
std::string to_line(const Example& ex) {
  return to_json(ex).dump();
}

std::vector<OrderExample> read_order(const std::filesystem::path& path);
std::vector<ConjunctionExample> read_conjunction(const std::filesystem::path& path);
std::vector<NextExample> read_next(const std::filesystem::path& path);

struct TaskCounts {
  std::uint64_t train = 0;
  std::uint64_t heldout = 0;
  std::uint64_t total() const { return train + heldout; }
};

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct DatasetStats {
  std::uint64_t seed = 0;
  double heldout_fraction = 0;
  std::uint64_t documents = 0;
  std::uint64_t paragraphs = 0;
  std::uint64_t sentences = 0;
  std::uint64_t next_eligible_paragraphs = 0;
  std::array<TaskCounts, kNumTasks> tasks{};
  std::array<std::uint64_t, discourse::kNumCategories> categories{};
  std::uint64_t vocabulary_size = 0;
  std::vector<SkippedFile> skipped;

  nlohmann::json to_json() const;
};

struct BuildOptions {
  std::uint64_t seed = 0;
  double heldout_fraction = 0.0;
  unsigned workers = 1;
  std::uint64_t min_count = 2;
};

/// True when a serialized record goes to the held-out split. Depends only on
/// the record bytes and the seed.
bool is_heldout(std::string_view record_line, std::uint64_t seed, double fraction);

/// Reads every file under `corpus_dir`, extracts all three tasks, and writes
/// {order,conjunction,next}[.heldout].jsonl, vocab.tsv and stats.json into
/// `out_dir`. Files that cannot be read or are not UTF-8 are skipped and listed
/// in the stats. Output bytes do not depend on `workers`.
DatasetStats build_datasets(const std::filesystem::path& corpus_dir, const std::filesystem::path& out_dir,
                            const BuildOptions& options);

}  // namespace discsent::dataset
