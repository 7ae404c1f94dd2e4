#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "discsent/checkpoint.hpp"
#include "discsent/dataset.hpp"
#include "discsent/error.hpp"
#include "discsent/evalkit.hpp"
#include "discsent/trainer.hpp"

namespace discsent::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Level { kError, kWarn, kInfo, kDebug };

/// Writes to the diagnostic stream when `DISCSENT_LOG` allows the level.
class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {
    const char* env = std::getenv("DISCSENT_LOG");
    const std::string v = env ? env : "";
    if (v == "error" || v == "quiet") level_ = Level::kError;
    else if (v == "warn") level_ = Level::kWarn;
    else if (v == "debug") level_ = Level::kDebug;
  }

  template <typename... Args>
  void operator()(Level level, fmt::format_string<Args...> f, Args&&... args) {
    if (level > level_) return;
    static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
    fmt::print(err_, "[{}] {}\n", kNames[static_cast<int>(level)], fmt::format(f, std::forward<Args>(args)...));
  }

 private:
  std::ostream& err_;
  Level level_ = Level::kInfo;
};

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool is_archive(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8] = {};
  in.read(magic, 8);
  return in.gcount() == 8 && std::equal(magic, magic + 8, model::kMagic);
}

std::array<bool, dataset::kNumTasks> parse_tasks(const std::string& list) {
  std::array<bool, dataset::kNumTasks> enabled{};
  std::stringstream ss(list);
  for (std::string name; std::getline(ss, name, ',');) {
    const auto t = dataset::parse_task(name);
    if (!t) throw ConfigError("unknown task '" + name + "'");
    enabled[dataset::task_index(*t)] = true;
  }
  if (std::none_of(enabled.begin(), enabled.end(), [](bool b) { return b; })) throw ConfigError("no task selected");
  return enabled;
}

struct BuildArgs {
  std::string corpus, out;
  dataset::BuildOptions options;
};

struct TrainArgs {
  std::string data, out, config, metrics;
  std::string encoder = "bigru", tasks = "order,conjunction,next", embeddings;
  train::TrainConfig flags;
};

struct EvalArgs {
  std::string model, data, tasks = "order,conjunction,next", split = "heldout";
  std::size_t limit = 0;
};

struct EncodeArgs {
  std::string model, input, out;
  unsigned workers = default_workers();
  std::size_t batch_size = 128;
};

struct NnArgs {
  std::string model, index, query;
  std::size_t k = 5;
  unsigned workers = default_workers();
};

struct ProbeArgs {
  std::string model, train, test;
  eval::ProbeConfig config;
  unsigned workers = default_workers();
};

int build_data(const BuildArgs& a, std::ostream& out, Log& log) {
  log(Level::kInfo, "extracting from {} with {} workers", a.corpus, a.options.workers);
  const auto stats = dataset::build_datasets(a.corpus, a.out, a.options);
  for (const auto& s : stats.skipped) log(Level::kWarn, "skipped {}: {}", s.path, s.reason);
  fmt::print(out, "{}\n", stats.to_json().dump());
  return kExitOk;
}

/// Config file values over defaults, then explicitly given flags over both.
train::TrainConfig resolve_train_config(const TrainArgs& a, const CLI::App& cmd) {
  train::TrainConfig c;
  if (!a.config.empty()) {
    std::ifstream in(a.config, std::ios::binary);
    if (!in) throw IoError("cannot open " + a.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
    c = train::train_config_from_json(j, c);
  }
  json given = json::object();
  const auto set = [&](const char* flag, const char* key, json value) {
    if (cmd.count(flag) > 0) given[key] = std::move(value);
  };
  const auto& f = a.flags;
  set("--encoder", "encoder", a.encoder);
  set("--embedding-dim", "embedding_dim", f.encoder.embedding_dim);
  set("--hidden-dim", "hidden_dim", f.encoder.hidden_dim);
  set("--lr", "lr", f.lr);
  set("--batch-size", "batch_size", f.batch_size);
  set("--steps", "steps", f.steps);
  set("--seed", "seed", f.seed);
  set("--subsample-conj", "subsample_conj", f.subsample_conj);
  set("--subsample-next", "subsample_next", f.subsample_next);
  if (cmd.count("--tasks") > 0) {
    json names = json::array();
    for (auto t : dataset::kAllTasks) {
      if (parse_tasks(a.tasks)[dataset::task_index(t)]) names.push_back(dataset::task_name(t));
    }
    given["tasks"] = names;
  }
  set("--log-every", "log_every", f.log_every);
  set("--eval-every", "eval_every", f.eval_every);
  set("--eval-limit", "eval_limit", f.eval_limit);
  set("--checkpoint-every", "checkpoint_every", f.checkpoint_every);
  set("--embeddings", "embeddings", a.embeddings);
  c = train::train_config_from_json(given, c);
  c.validate();
  return c;
}

int train_cmd(const TrainArgs& a, const CLI::App& cmd, std::ostream& out, Log& log) {
  const auto config = resolve_train_config(a, cmd);
  log(Level::kDebug, "config {}", train::to_json(config).dump());
  const auto data = train::load_train_data(a.data, config.enabled);
  log(Level::kInfo, "loaded {} order, {} conjunction, {} next training examples", data.train.order.size(),
      data.train.conjunction.size(), data.train.next.size());
  const fs::path metrics_path = a.metrics.empty() ? fs::path(a.out).parent_path() / "metrics.jsonl" : fs::path(a.metrics);
  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
  if (!metrics) throw IoError("cannot write " + metrics_path.string());
  const auto result = train::train_loop(config, data, a.out, &metrics);
  metrics.close();
  if (!metrics) throw IoError("write failed for " + metrics_path.string());
  json summary = {{"checkpoint", a.out}, {"metrics", metrics_path.string()}, {"steps", result.checkpoint.step}};
  summary["heldout"] = result.final_heldout ? train::to_json(*result.final_heldout) : json::object();
  fmt::print(out, "{}\n", summary.dump());
  return kExitOk;
}

int eval_cmd(const EvalArgs& a, std::ostream& out, Log& log) {
  const auto enabled = parse_tasks(a.tasks);
  const auto ckpt = model::load_checkpoint(a.model);
  const auto items = train::load_split(a.data, enabled, ckpt.vocab, a.split == "heldout", true);
  const auto report = train::evaluate_intrinsic(ckpt.model, items, enabled, a.limit);
  for (const auto& t : report.tasks) {
    log(Level::kInfo, "{}: {:.4f} on {} examples (chance {:.4f})", dataset::task_name(t.task), t.accuracy, t.count,
        t.chance);
  }
  fmt::print(out, "{}\n", train::to_json(report).dump());
  return kExitOk;
}

int encode_cmd(const EncodeArgs& a, std::ostream& out, Log& log) {
  const auto ckpt = model::load_checkpoint(a.model);
  const auto lines = read_lines(a.input);
  const auto r = eval::encode_corpus(ckpt.model, ckpt.vocab, lines, a.workers, a.batch_size);
  if (r.skipped) log(Level::kWarn, "skipped {} lines without tokens", r.skipped);
  eval::save_index(r.index, a.out);
  fmt::print(out, "{}\n",
             json({{"index", a.out}, {"sentences", r.index.size()}, {"skipped", r.skipped},
                   {"dim", r.index.encodings.cols()}})
                 .dump());
  return kExitOk;
}

int nn_cmd(const NnArgs& a, std::ostream& out, Log& log) {
  if (a.k == 0) throw ConfigError("--k must be at least 1");
  const auto ckpt = model::load_checkpoint(a.model);
  eval::SentenceIndex index;
  if (is_archive(a.index)) {
    index = eval::load_index(a.index);
  } else {
    auto r = eval::encode_corpus(ckpt.model, ckpt.vocab, read_lines(a.index), a.workers);
    if (r.skipped) log(Level::kWarn, "skipped {} lines without tokens", r.skipped);
    index = std::move(r.index);
  }
  if (index.size() == 0) throw EvalError("index " + a.index + " is empty");
  for (const auto& n : eval::nearest_neighbors(ckpt.model, ckpt.vocab, index, a.query, a.k)) {
    fmt::print(out, "{:.6f}\t{}\n", n.distance, n.sentence);
  }
  return kExitOk;
}

int probe_cmd(const ProbeArgs& a, std::ostream& out, Log& log) {
  const auto ckpt = model::load_checkpoint(a.model);
  const auto train_set = eval::read_labeled_tsv(a.train);
  const auto test_set = eval::read_labeled_tsv(a.test);
  if (train_set.pairs() != test_set.pairs()) throw FormatError("train and test files differ in field count");
  const auto train_f = eval::probe_features(ckpt.model, ckpt.vocab, train_set, a.workers);
  const auto test_f = eval::probe_features(ckpt.model, ckpt.vocab, test_set, a.workers);
  if (train_f.skipped + test_f.skipped) log(Level::kWarn, "skipped {} examples without tokens", train_f.skipped + test_f.skipped);
  const auto r = eval::linear_probe(train_f, test_f, a.config);
  fmt::print(out, "{}\n",
             json({{"classes", r.classes},
                   {"train_count", train_f.labels.size()},
                   {"test_count", test_f.labels.size()},
                   {"train_accuracy", r.train_accuracy},
                   {"test_accuracy", r.test_accuracy}})
                 .dump());
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Log log(err);
  CLI::App app{"Discourse-based sentence encoder toolkit", "discsent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "discsent 1.0");

  BuildArgs build;
  build.options.workers = default_workers();
  auto* build_cmd = app.add_subcommand("build-data", "Extract ORDER, CONJUNCTION and NEXT examples from a corpus");
  build_cmd->add_option("--corpus", build.corpus, "Directory of UTF-8 text files")->required();
  build_cmd->add_option("--out", build.out, "Output directory")->required();
  build_cmd->add_option("--seed", build.options.seed, "Extraction seed")->capture_default_str();
  build_cmd->add_option("--heldout", build.options.heldout_fraction, "Held-out fraction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  build_cmd->add_option("--min-count", build.options.min_count, "Minimum token count for the vocabulary")
      ->capture_default_str();
  build_cmd->add_option("--workers", build.options.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  TrainArgs tr;
  auto* train_cmd_app = app.add_subcommand("train", "Train an encoder jointly on the extracted tasks");
  train_cmd_app->add_option("--data", tr.data, "Directory written by build-data")->required();
  train_cmd_app->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd_app->add_option("--metrics", tr.metrics, "Metrics JSON Lines path (default: metrics.jsonl next to --out)");
  train_cmd_app->add_option("--config", tr.config, "JSON training config; flags override it");
  train_cmd_app->add_option("--encoder", tr.encoder, "cbow, gru or bigru")->capture_default_str();
  train_cmd_app->add_option("--embedding-dim", tr.flags.encoder.embedding_dim, "Word embedding size")->capture_default_str();
  train_cmd_app->add_option("--hidden-dim", tr.flags.encoder.hidden_dim,
                            "GRU state size per direction or CBOW output size; 0 picks 1024 (512 per BiGRU direction)")
      ->capture_default_str();
  train_cmd_app->add_option("--lr", tr.flags.lr, "AdaGrad learning rate")->capture_default_str();
  train_cmd_app->add_option("--batch-size", tr.flags.batch_size, "Examples per step")->capture_default_str();
  train_cmd_app->add_option("--steps", tr.flags.steps, "Training steps")->capture_default_str();
  train_cmd_app->add_option("--seed", tr.flags.seed, "Training seed")->capture_default_str();
  train_cmd_app->add_option("--subsample-conj", tr.flags.subsample_conj, "CONJUNCTION runs once per this many ORDER steps")
      ->capture_default_str();
  train_cmd_app->add_option("--subsample-next", tr.flags.subsample_next, "NEXT runs once per this many ORDER steps")
      ->capture_default_str();
  train_cmd_app->add_option("--tasks", tr.tasks, "Comma-separated tasks to train")->capture_default_str();
  train_cmd_app->add_option("--log-every", tr.flags.log_every, "Metrics cadence in steps; 0 logs at the end only")
      ->capture_default_str();
  train_cmd_app->add_option("--eval-every", tr.flags.eval_every, "Held-out evaluation cadence; 0 evaluates at the end only")
      ->capture_default_str();
  train_cmd_app->add_option("--eval-limit", tr.flags.eval_limit, "Held-out examples per task per evaluation; 0 uses all")
      ->capture_default_str();
  train_cmd_app->add_option("--checkpoint-every", tr.flags.checkpoint_every, "Checkpoint cadence; 0 saves at the end only")
      ->capture_default_str();
  train_cmd_app->add_option("--embeddings", tr.embeddings, "Pretrained word vectors (text format); frozen when given");

  EvalArgs ev;
  auto* eval_app = app.add_subcommand("eval", "Intrinsic accuracy of a checkpoint on extracted examples");
  eval_app->add_option("--model", ev.model, "Checkpoint")->required();
  eval_app->add_option("--data", ev.data, "Directory written by build-data")->required();
  eval_app->add_option("--tasks", ev.tasks, "Comma-separated tasks")->capture_default_str();
  eval_app->add_option("--split", ev.split, "heldout or train")
      ->check(CLI::IsMember({"heldout", "train"}))
      ->capture_default_str();
  eval_app->add_option("--limit", ev.limit, "Examples per task; 0 uses all")->capture_default_str();

  EncodeArgs en;
  auto* encode_app = app.add_subcommand("encode", "Encode one sentence per line into a sentence index");
  encode_app->add_option("--model", en.model, "Checkpoint")->required();
  encode_app->add_option("--input", en.input, "Text file, one sentence per line")->required();
  encode_app->add_option("--out", en.out, "Index path; sentences go to <out>.sentences")->required();
  encode_app->add_option("--batch-size", en.batch_size, "Sentences per encoder batch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  encode_app->add_option("--workers", en.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  NnArgs nn;
  auto* nn_app = app.add_subcommand("nn", "Euclidean nearest neighbours of a query sentence");
  nn_app->add_option("--model", nn.model, "Checkpoint")->required();
  nn_app->add_option("--index", nn.index, "Index written by encode, or a text file with one sentence per line")
      ->required();
  nn_app->add_option("--query", nn.query, "Query sentence")->required();
  nn_app->add_option("--k", nn.k, "Number of neighbours")->capture_default_str();
  nn_app->add_option("--workers", nn.workers, "Worker threads for text indexes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  ProbeArgs pr;
  auto* probe_app = app.add_subcommand("probe", "Logistic-regression probe on frozen encodings");
  probe_app->add_option("--model", pr.model, "Checkpoint")->required();
  probe_app->add_option("--train", pr.train, "Training TSV: label<TAB>sentence[<TAB>sentence]")->required();
  probe_app->add_option("--test", pr.test, "Test TSV in the same layout")->required();
  probe_app->add_option("--epochs", pr.config.epochs, "Training epochs")->capture_default_str();
  probe_app->add_option("--lr", pr.config.lr, "AdaGrad learning rate")->capture_default_str();
  probe_app->add_option("--batch-size", pr.config.batch_size, "Examples per update")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  probe_app->add_option("--seed", pr.config.seed, "Shuffling seed")->capture_default_str();
  probe_app->add_option("--workers", pr.workers, "Worker threads for encoding")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*build_cmd) return build_data(build, out, log);
    if (*train_cmd_app) return train_cmd(tr, *train_cmd_app, out, log);
    if (*eval_app) return eval_cmd(ev, out, log);
    if (*encode_app) return encode_cmd(en, out, log);
    if (*nn_app) return nn_cmd(nn, out, log);
    if (*probe_app) return probe_cmd(pr, out, log);
  } catch (const ConfigError& e) {
    log(Level::kError, "{}", e.what());
    return kExitUsage;
  } catch (const NumericsError& e) {
    log(Level::kError, "{}", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    log(Level::kError, "{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace discsent::cli
