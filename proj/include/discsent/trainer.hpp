#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discsent/checkpoint.hpp"
#include "discsent/model.hpp"

namespace discsent::train {

using dataset::Task;
using model::Model;
using model::NextItem;
using model::PairItem;
using model::TaskItems;

struct TrainConfig {
  model::EncoderConfig encoder;
  double lr = 0.01;
  std::size_t batch_size = 64;
  std::uint64_t steps = 2000;
  std::uint64_t seed = 1;
  std::uint32_t subsample_conj = 4;
  std::uint32_t subsample_next = 6;
  /// Indexed by task_index.
  std::array<bool, dataset::kNumTasks> enabled = {true, true, true};
  /// Metrics cadence; 0 logs only at the end.
  std::uint64_t log_every = 100;
  /// Held-out evaluation cadence; 0 evaluates only at the end.
  std::uint64_t eval_every = 0;
  /// At most this many held-out examples per task in each evaluation; 0 means all.
  std::size_t eval_limit = 0;
  /// Checkpoint cadence; 0 writes only at the end.
  std::uint64_t checkpoint_every = 0;
  /// Optional word-vector text file; empty trains embeddings from scratch.
  std::string embeddings;

  bool task_enabled(Task t) const { return enabled[dataset::task_index(t)]; }
  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Fields absent from `j` keep their values from `base`. Throws ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Deterministic stride schedule: task weights (1, 1/f_conj, 1/f_next); each
/// task's pass value advances by its stride f after it runs; the lowest pass
/// runs next with ties broken ORDER < CONJUNCTION < NEXT.
class TaskSchedule {
 public:
  explicit TaskSchedule(std::uint32_t f_conj = 4, std::uint32_t f_next = 6,
                        std::array<bool, dataset::kNumTasks> enabled = {true, true, true});
  Task next();

 private:
  std::array<std::uint64_t, dataset::kNumTasks> stride_{}, pass_{};
  std::array<bool, dataset::kNumTasks> enabled_{};
};

/// Vocabulary plus training and held-out items read from a build-data directory.
struct TrainData {
  text::Vocabulary vocab;
  TaskItems train, heldout;
};

/// One split (training or held-out) of the enabled tasks, mapped through
/// `vocab`. A missing file is an IoError when `required` and skipped otherwise.
TaskItems load_split(const std::filesystem::path& dir, const std::array<bool, dataset::kNumTasks>& enabled,
                     const text::Vocabulary& vocab, bool heldout, bool required);

/// Loads vocab.tsv and the JSON Lines files of the enabled tasks. A missing
/// training file of an enabled task is an IoError; held-out files are optional.
TrainData load_train_data(const std::filesystem::path& dir, const std::array<bool, dataset::kNumTasks>& enabled);

/// Fresh model for `vocab`; loads and freezes pretrained embeddings when configured.
Model<float> initial_model(const TrainConfig& config, const text::Vocabulary& vocab);

/// One AdaGrad step on a single-task batch: gradients reach the encoder and
/// that task's head only. Returns the batch loss before the update.
template <typename T>
double train_step(Model<T>& model, Task task, std::span<const PairItem> batch, double lr);
template <typename T>
double train_step(Model<T>& model, std::span<const NextItem> batch, double lr);

struct TaskAccuracy {
  Task task = Task::kOrder;
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy = 0;
  /// ORDER 0.5, NEXT 0.2, CONJUNCTION the majority-category frequency.
  double chance = 0;
};

struct IntrinsicReport {
  std::vector<TaskAccuracy> tasks;
  const TaskAccuracy* find(Task t) const;
};

nlohmann::json to_json(const IntrinsicReport& r);

/// Argmax accuracy on each selected task. Throws EvalError when a selected
/// task has no examples.
IntrinsicReport evaluate_intrinsic(const Model<float>& model, const TaskItems& items,
                                   const std::array<bool, dataset::kNumTasks>& tasks, std::size_t limit = 0,
                                   std::size_t batch_size = 256);

struct TrainResult {
  model::Checkpoint checkpoint;
  std::optional<IntrinsicReport> final_heldout;
};

/// Runs `config.steps` scheduled steps. Each task's examples are reshuffled
/// every epoch from a seeded stream. Metrics go to `metrics` as JSON Lines
/// {"step","task","loss","heldout"}; when `out` is nonempty the checkpoint is
/// written there periodically and at the end.
TrainResult train_loop(const TrainConfig& config, const TrainData& data, const std::filesystem::path& out,
                       std::ostream* metrics);

}  // namespace discsent::train
