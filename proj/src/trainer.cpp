#include "discsent/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "discsent/error.hpp"

namespace discsent::train {

using dataset::kAllTasks;
using dataset::task_index;
using dataset::task_name;

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (subsample_conj == 0 || subsample_next == 0) throw ConfigError("subsample factors must be at least 1");
  if (std::none_of(enabled.begin(), enabled.end(), [](bool b) { return b; })) {
    throw ConfigError("at least one task must be enabled");
  }
  if (encoder.embedding_dim == 0 || encoder.hidden() == 0) throw ConfigError("encoder dimensions must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json tasks = nlohmann::json::array();
  for (Task t : kAllTasks) {
    if (c.task_enabled(t)) tasks.push_back(task_name(t));
  }
  return {{"encoder", model::encoder_name(c.encoder.kind)},
          {"embedding_dim", c.encoder.embedding_dim},
          {"hidden_dim", c.encoder.hidden()},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"steps", c.steps},
          {"seed", c.seed},
          {"subsample_conj", c.subsample_conj},
          {"subsample_next", c.subsample_next},
          {"tasks", tasks},
          {"log_every", c.log_every},
          {"eval_every", c.eval_every},
          {"eval_limit", c.eval_limit},
          {"checkpoint_every", c.checkpoint_every},
          {"embeddings", c.embeddings}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  static const std::vector<std::string> known = {
      "encoder",        "embedding_dim", "hidden_dim", "lr",        "batch_size", "steps",
      "seed",           "subsample_conj", "subsample_next", "tasks", "log_every", "eval_every",
      "eval_limit",     "checkpoint_every", "embeddings"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    if (j.contains("encoder")) {
      const auto name = j["encoder"].get<std::string>();
      const auto kind = model::parse_encoder(name);
      if (!kind) throw ConfigError("unknown encoder '" + name + "'");
      c.encoder.kind = *kind;
    }
    c.encoder.embedding_dim = j.value("embedding_dim", c.encoder.embedding_dim);
    c.encoder.hidden_dim = j.value("hidden_dim", c.encoder.hidden_dim);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.seed = j.value("seed", c.seed);
    c.subsample_conj = j.value("subsample_conj", c.subsample_conj);
    c.subsample_next = j.value("subsample_next", c.subsample_next);
    if (j.contains("tasks")) {
      c.enabled = {false, false, false};
      for (const auto& name : j["tasks"].get<std::vector<std::string>>()) {
        const auto t = dataset::parse_task(name);
        if (!t) throw ConfigError("unknown task '" + name + "'");
        c.enabled[task_index(*t)] = true;
      }
    }
    c.log_every = j.value("log_every", c.log_every);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.eval_limit = j.value("eval_limit", c.eval_limit);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.embeddings = j.value("embeddings", c.embeddings);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  return c;
}

TaskSchedule::TaskSchedule(std::uint32_t f_conj, std::uint32_t f_next, std::array<bool, dataset::kNumTasks> enabled)
    : stride_{1, f_conj, f_next}, enabled_(enabled) {
  if (f_conj == 0 || f_next == 0) throw ConfigError("subsample factors must be at least 1");
  if (std::none_of(enabled.begin(), enabled.end(), [](bool b) { return b; })) {
    throw ConfigError("schedule needs at least one enabled task");
  }
}

Task TaskSchedule::next() {
  std::size_t best = dataset::kNumTasks;
  for (std::size_t i = 0; i < dataset::kNumTasks; ++i) {
    if (!enabled_[i]) continue;
    if (best == dataset::kNumTasks || pass_[i] < pass_[best]) best = i;
  }
  pass_[best] += stride_[best];
  return kAllTasks[best];
}

TaskItems load_split(const std::filesystem::path& dir, const std::array<bool, dataset::kNumTasks>& enabled,
                     const text::Vocabulary& vocab, bool heldout, bool required) {
  TaskItems items;
  const auto convert = [&vocab](const auto& examples, auto& out) {
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(model::to_item(vocab, e));
  };
  for (Task t : kAllTasks) {
    if (!enabled[task_index(t)]) continue;
    const auto path = dir / dataset::task_file(t, heldout);
    if (!std::filesystem::exists(path)) {
      if (!required) continue;
      throw IoError("missing dataset file " + path.string());
    }
    switch (t) {
      case Task::kOrder: convert(dataset::read_order(path), items.order); break;
      case Task::kConjunction: convert(dataset::read_conjunction(path), items.conjunction); break;
      case Task::kNext: convert(dataset::read_next(path), items.next); break;
    }
  }
  return items;
}

TrainData load_train_data(const std::filesystem::path& dir, const std::array<bool, dataset::kNumTasks>& enabled) {
  TrainData data;
  data.vocab = text::Vocabulary::load(dir / "vocab.tsv");
  data.train = load_split(dir, enabled, data.vocab, false, true);
  data.heldout = load_split(dir, enabled, data.vocab, true, false);
  return data;
}

Model<float> initial_model(const TrainConfig& config, const text::Vocabulary& vocab) {
  model::EncoderConfig ec = config.encoder;
  ec.vocab_size = vocab.size();
  std::optional<model::Tensor<float>> table;
  if (!config.embeddings.empty()) {
    table = model::load_embeddings_text(config.embeddings, vocab);
    ec.embedding_dim = table->cols();
    ec.trainable_embeddings = false;
  } else {
    ec.trainable_embeddings = true;
  }
  SplitMix64 rng(mix64(config.seed ^ 0x6D6F64656C696E69ULL));
  Model<float> m(ec, rng);
  if (table) m.encoder().set_pretrained_embeddings(std::move(*table));
  if (m.encoder().embedding().trainable) m.encoder().embedding().enable_sparse_rows();
  return m;
}

namespace {

template <typename T>
double apply_step(Model<T>& model, Task task, num::Tape<T>& tape, typename num::Tape<T>::Var loss, double lr) {
  const double value = static_cast<double>(tape.value(loss)[0]);
  if (!std::isfinite(value)) throw NumericsError("non-finite loss on task " + std::string(task_name(task)));
  tape.backward(loss);
  for (auto* p : model.encoder().parameters()) {
    if (p->trainable) num::adagrad_update(*p, lr);
  }
  for (auto* p : model.head_parameters(task)) num::adagrad_update(*p, lr);
  return value;
}

}  // namespace

template <typename T>
double train_step(Model<T>& model, Task task, std::span<const PairItem> batch, double lr) {
  num::Tape<T> tape;
  const auto loss = model.loss(tape, task, batch);
  return apply_step(model, task, tape, loss, lr);
}

template <typename T>
double train_step(Model<T>& model, std::span<const NextItem> batch, double lr) {
  num::Tape<T> tape;
  const auto loss = model.loss(tape, batch);
  return apply_step(model, Task::kNext, tape, loss, lr);
}

template double train_step(Model<float>&, Task, std::span<const PairItem>, double);
template double train_step(Model<double>&, Task, std::span<const PairItem>, double);
template double train_step(Model<float>&, std::span<const NextItem>, double);
template double train_step(Model<double>&, std::span<const NextItem>, double);

const TaskAccuracy* IntrinsicReport::find(Task t) const {
  for (const auto& a : tasks) {
    if (a.task == t) return &a;
  }
  return nullptr;
}

nlohmann::json to_json(const IntrinsicReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& a : r.tasks) {
    j[std::string(task_name(a.task))] = {
        {"accuracy", a.accuracy}, {"chance", a.chance}, {"correct", a.correct}, {"count", a.count}};
  }
  return j;
}

namespace {

template <typename Item, typename Predict>
TaskAccuracy score(Task task, std::span<const Item> items, std::size_t batch_size, Predict predict) {
  if (items.empty()) throw EvalError("no held-out examples for task " + std::string(task_name(task)));
  TaskAccuracy acc;
  acc.task = task;
  acc.count = items.size();
  std::map<std::uint32_t, std::size_t> label_counts;
  for (std::size_t begin = 0; begin < items.size(); begin += batch_size) {
    const auto chunk = items.subspan(begin, std::min(batch_size, items.size() - begin));
    const auto pred = predict(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      acc.correct += pred[i] == chunk[i].label;
      ++label_counts[chunk[i].label];
    }
  }
  acc.accuracy = static_cast<double>(acc.correct) / static_cast<double>(acc.count);
  switch (task) {
    case Task::kOrder: acc.chance = 0.5; break;
    case Task::kNext: acc.chance = 1.0 / static_cast<double>(model::kNextCandidates); break;
    case Task::kConjunction: {
      std::size_t majority = 0;
      for (const auto& [_, n] : label_counts) majority = std::max(majority, n);
      acc.chance = static_cast<double>(majority) / static_cast<double>(acc.count);
      break;
    }
  }
  return acc;
}

template <typename Item>
std::span<const Item> limited(const std::vector<Item>& v, std::size_t limit) {
  return std::span<const Item>(v).first(limit == 0 ? v.size() : std::min(limit, v.size()));
}

}  // namespace

IntrinsicReport evaluate_intrinsic(const Model<float>& model, const TaskItems& items,
                                   const std::array<bool, dataset::kNumTasks>& tasks, std::size_t limit,
                                   std::size_t batch_size) {
  if (batch_size == 0) batch_size = 1;
  IntrinsicReport report;
  for (Task t : kAllTasks) {
    if (!tasks[task_index(t)]) continue;
    if (t == Task::kNext) {
      report.tasks.push_back(score<NextItem>(t, limited(items.next, limit), batch_size,
                                             [&](std::span<const NextItem> b) { return model.predict(b); }));
    } else {
      const auto& v = t == Task::kOrder ? items.order : items.conjunction;
      report.tasks.push_back(score<PairItem>(t, limited(v, limit), batch_size,
                                             [&](std::span<const PairItem> b) { return model.predict(t, b); }));
    }
  }
  return report;
}

namespace {

/// Endless stream of example indices, reshuffled at every epoch.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, SplitMix64 rng) : order_(n), rng_(rng) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    cursor_ = n;
  }
  std::size_t next() {
    if (cursor_ == order_.size()) {
      shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  SplitMix64 rng_;
};

template <typename Item>
std::vector<Item> draw(const std::vector<Item>& items, EpochSampler& sampler, std::size_t n) {
  std::vector<Item> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) batch.push_back(items[sampler.next()]);
  return batch;
}

}  // namespace

TrainResult train_loop(const TrainConfig& config, const TrainData& data, const std::filesystem::path& out,
                       std::ostream* metrics) {
  config.validate();
  for (Task t : kAllTasks) {
    if (config.task_enabled(t) && data.train.size(t) == 0) {
      throw EvalError("no training examples for enabled task " + std::string(task_name(t)));
    }
  }
  TrainResult result;
  result.checkpoint.vocab = data.vocab;
  result.checkpoint.train_config = to_json(config);
  result.checkpoint.model = initial_model(config, data.vocab);
  auto& model = result.checkpoint.model;

  SplitMix64 root(config.seed);
  std::vector<EpochSampler> samplers;
  for (Task t : kAllTasks) samplers.emplace_back(data.train.size(t), root.fork());

  std::array<bool, dataset::kNumTasks> eval_tasks{};
  bool any_heldout = false;
  for (Task t : kAllTasks) {
    eval_tasks[task_index(t)] = config.task_enabled(t) && data.heldout.size(t) > 0;
    any_heldout = any_heldout || eval_tasks[task_index(t)];
  }

  std::array<double, dataset::kNumTasks> loss_sum{};
  std::array<std::uint64_t, dataset::kNumTasks> loss_n{};
  const auto emit = [&](std::uint64_t step, const IntrinsicReport* report) {
    for (Task t : kAllTasks) {
      const auto i = task_index(t);
      if (!config.task_enabled(t)) continue;
      const TaskAccuracy* acc = report ? report->find(t) : nullptr;
      if (loss_n[i] == 0 && !acc) continue;
      nlohmann::json line = {{"step", step}, {"task", task_name(t)}};
      line["loss"] = loss_n[i] ? nlohmann::json(loss_sum[i] / static_cast<double>(loss_n[i])) : nlohmann::json();
      line["heldout"] = nlohmann::json::object();
      if (acc) line["heldout"] = {{"accuracy", acc->accuracy}, {"chance", acc->chance}, {"count", acc->count}};
      if (metrics) *metrics << line.dump() << '\n';
      loss_sum[i] = 0;
      loss_n[i] = 0;
    }
    if (metrics) metrics->flush();
  };

  TaskSchedule schedule(config.subsample_conj, config.subsample_next, config.enabled);
  for (std::uint64_t step = 1; step <= config.steps; ++step) {
    const Task task = schedule.next();
    const auto i = task_index(task);
    double loss = 0;
    switch (task) {
      case Task::kOrder:
        loss = train_step(model, task, draw(data.train.order, samplers[i], config.batch_size), config.lr);
        break;
      case Task::kConjunction:
        loss = train_step(model, task, draw(data.train.conjunction, samplers[i], config.batch_size), config.lr);
        break;
      case Task::kNext:
        loss = train_step(model, draw(data.train.next, samplers[i], config.batch_size), config.lr);
        break;
    }
    loss_sum[i] += loss;
    ++loss_n[i];
    result.checkpoint.step = step;

    const bool last = step == config.steps;
    std::optional<IntrinsicReport> report;
    if (any_heldout && (last || (config.eval_every && step % config.eval_every == 0))) {
      report = evaluate_intrinsic(model, data.heldout, eval_tasks, config.eval_limit);
      if (last) result.final_heldout = report;
    }
    if (last || report || (config.log_every && step % config.log_every == 0)) emit(step, report ? &*report : nullptr);
    if (!out.empty() && config.checkpoint_every && step % config.checkpoint_every == 0 && !last) {
      model::save_checkpoint(result.checkpoint, out);
    }
  }
  if (config.steps == 0 && any_heldout) {
    result.final_heldout = evaluate_intrinsic(model, data.heldout, eval_tasks, config.eval_limit);
  }
  if (!out.empty()) model::save_checkpoint(result.checkpoint, out);
  return result;
}

}  // namespace discsent::train
