#include "discsent/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "discsent/error.hpp"
#include "discsent/vocabulary.hpp"

namespace discsent::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumTasks> kTaskNames = {"order", "conjunction", "next"};

// Tag mixed into the seed for split assignment so it is independent of extraction draws.
constexpr std::uint64_t kHeldoutTag = 0x68656C646F7574ULL;

text::Sentence sentence_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.empty()) throw FormatError(std::string("field '") + field + "' must be a nonempty token array");
  text::Sentence s;
  s.reserve(j.size());
  for (const auto& t : j) {
    if (!t.is_string() || t.get_ref<const std::string&>().empty()) {
      throw FormatError(std::string("field '") + field + "' holds a non-string or empty token");
    }
    s.push_back(t.get<std::string>());
  }
  return s;
}

const json& field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw FormatError(std::string("missing field '") + name + "'");
  return *it;
}

void expect_task(const json& j, Task t) {
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  const auto& task = field(j, "task");
  if (!task.is_string() || task.get_ref<const std::string&>() != task_name(t)) {
    throw FormatError("expected task '" + std::string(task_name(t)) + "'");
  }
}

template <typename Example, typename Parse>
std::vector<Example> read_jsonl(const fs::path& path, Parse parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string(), lineno, e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string(), lineno, e.what());
    }
  }
  return out;
}

// Everything one document contributes, serialized and split.
struct DocumentOutput {
  std::array<std::string, 2 * kNumTasks> lines;  // [task * 2 + heldout]
  std::array<TaskCounts, kNumTasks> tasks{};
  std::array<std::uint64_t, discourse::kNumCategories> categories{};
  std::uint64_t paragraphs = 0;
  std::uint64_t sentences = 0;
  std::uint64_t next_eligible = 0;
  text::TokenCounts counts;
  std::optional<SkippedFile> skipped;
};

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return std::move(ss).str();
}

DocumentOutput process_document(const fs::path& root, const fs::path& rel, const BuildOptions& opt) {
  DocumentOutput out;
  const std::string doc_id = rel.generic_string();
  const auto bytes = read_file(root / rel);
  if (!bytes) {
    out.skipped = SkippedFile{doc_id, "unreadable"};
    return out;
  }
  if (!text::is_valid_utf8(*bytes)) {
    out.skipped = SkippedFile{doc_id, "invalid UTF-8"};
    return out;
  }
  const auto& lex = discourse::ConjunctionLexicon::builtin();
  auto emit = [&](Task t, const std::string& line) {
    const bool held = is_heldout(line, opt.seed, opt.heldout_fraction);
    auto& buf = out.lines[task_index(t) * 2 + (held ? 1 : 0)];
    buf += line;
    buf.push_back('\n');
    auto& c = out.tasks[task_index(t)];
    (held ? c.heldout : c.train) += 1;
  };
  for (const auto& p : text::segment_document({doc_id, *bytes})) {
    ++out.paragraphs;
    out.sentences += p.sentences.size();
    for (const auto& s : p.sentences) out.counts.add(s);
    const auto ex = discourse::extract_paragraph(lex, p, opt.seed);
    for (const auto& e : ex.order) emit(Task::kOrder, to_line(e));
    for (const auto& e : ex.conjunction) {
      emit(Task::kConjunction, to_line(e));
      ++out.categories[discourse::category_index(e.category)];
    }
    if (ex.next) {
      ++out.next_eligible;
      emit(Task::kNext, to_line(*ex.next));
    }
  }
  return out;
}

}  // namespace

std::string_view task_name(Task t) { return kTaskNames.at(task_index(t)); }

std::optional<Task> parse_task(std::string_view name) {
  for (auto t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  return std::nullopt;
}

std::string task_file(Task t, bool heldout) {
  return std::string(task_name(t)) + (heldout ? ".heldout.jsonl" : ".jsonl");
}

json to_json(const OrderExample& ex) {
  return json{{"task", "order"}, {"s0", ex.s0}, {"s1", ex.s1}, {"swapped", ex.swapped}};
}

json to_json(const ConjunctionExample& ex) {
  return json{{"task", "conjunction"},
              {"s0", ex.s0},
              {"s1", ex.s1},
              {"category", discourse::category_name(ex.category)},
              {"phrase", ex.phrase}};
}

json to_json(const NextExample& ex) {
  return json{{"task", "next"}, {"context", ex.context}, {"candidates", ex.candidates}, {"answer", ex.answer}};
}

OrderExample order_from_json(const json& j) {
  expect_task(j, Task::kOrder);
  const auto& swapped = field(j, "swapped");
  if (!swapped.is_boolean()) throw FormatError("field 'swapped' must be a boolean");
  return {sentence_from_json(field(j, "s0"), "s0"), sentence_from_json(field(j, "s1"), "s1"), swapped.get<bool>()};
}

ConjunctionExample conjunction_from_json(const json& j) {
  expect_task(j, Task::kConjunction);
  const auto& cat = field(j, "category");
  const auto& phrase = field(j, "phrase");
  if (!cat.is_string() || !phrase.is_string()) throw FormatError("category and phrase must be strings");
  const auto c = discourse::parse_category(cat.get_ref<const std::string&>());
  if (!c) throw FormatError("unknown category '" + cat.get<std::string>() + "'");
  return {sentence_from_json(field(j, "s0"), "s0"), sentence_from_json(field(j, "s1"), "s1"), *c,
          phrase.get<std::string>()};
}

NextExample next_from_json(const json& j) {
  expect_task(j, Task::kNext);
  const auto& context = field(j, "context");
  const auto& candidates = field(j, "candidates");
  const auto& answer = field(j, "answer");
  if (!context.is_array() || context.size() != 3) throw FormatError("'context' must hold exactly 3 sentences");
  if (!candidates.is_array() || candidates.size() != 5) throw FormatError("'candidates' must hold exactly 5 sentences");
  if (!answer.is_number_unsigned() || answer.get<std::uint64_t>() > 4) throw FormatError("'answer' must be in 0..4");
  NextExample ex;
  for (std::size_t i = 0; i < 3; ++i) ex.context[i] = sentence_from_json(context[i], "context");
  for (std::size_t i = 0; i < 5; ++i) ex.candidates[i] = sentence_from_json(candidates[i], "candidates");
  ex.answer = static_cast<std::uint8_t>(answer.get<std::uint64_t>());
  return ex;
}

std::vector<OrderExample> read_order(const fs::path& path) {
  return read_jsonl<OrderExample>(path, order_from_json);
}

std::vector<ConjunctionExample> read_conjunction(const fs::path& path) {
  return read_jsonl<ConjunctionExample>(path, conjunction_from_json);
}

std::vector<NextExample> read_next(const fs::path& path) { return read_jsonl<NextExample>(path, next_from_json); }

json DatasetStats::to_json() const {
  json j;
  j["seed"] = seed;
  j["heldout_fraction"] = heldout_fraction;
  j["documents"] = documents;
  j["paragraphs"] = paragraphs;
  j["sentences"] = sentences;
  j["next_min_sentences"] = discourse::kNextMinSentences;
  j["next_eligible_paragraphs"] = next_eligible_paragraphs;
  j["vocabulary_size"] = vocabulary_size;
  for (auto t : kAllTasks) {
    const auto& c = tasks[task_index(t)];
    const std::string name(task_name(t));
    j[name + "_count"] = c.total();
    j["tasks"][name] = {{"train", c.train}, {"heldout", c.heldout}, {"total", c.total()}};
  }
  json cats = json::object();
  for (std::size_t i = 0; i < discourse::kNumCategories; ++i) {
    cats[std::string(discourse::category_name(static_cast<discourse::Category>(i)))] = categories[i];
  }
  j["conjunction_categories"] = cats;
  json skipped_files = json::array();
  for (const auto& s : skipped) skipped_files.push_back({{"path", s.path}, {"reason", s.reason}});
  j["skipped_files"] = skipped_files;
  return j;
}

bool is_heldout(std::string_view record_line, std::uint64_t seed, double fraction) {
  if (fraction <= 0) return false;
  const auto h = mix64(fnv1a64(record_line) ^ mix64(seed ^ kHeldoutTag));
  return unit_interval(h) < fraction;
}

DatasetStats build_datasets(const fs::path& corpus_dir, const fs::path& out_dir, const BuildOptions& options) {
  if (!(options.heldout_fraction >= 0 && options.heldout_fraction < 1)) {
    throw ConfigError("heldout fraction must be in [0, 1)");
  }
  const auto files = text::list_corpus_files(corpus_dir);
  const fs::path root = fs::is_regular_file(corpus_dir) ? corpus_dir.parent_path() : corpus_dir;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::array<std::ofstream, 2 * kNumTasks> outputs;
  for (auto t : kAllTasks) {
    for (int held = 0; held < 2; ++held) {
      const auto path = out_dir / task_file(t, held != 0);
      auto& f = outputs[task_index(t) * 2 + held];
      f.open(path, std::ios::binary | std::ios::trunc);
      if (!f) throw IoError("cannot write " + path.string());
    }
  }

  DatasetStats stats;
  stats.seed = options.seed;
  stats.heldout_fraction = options.heldout_fraction;
  text::TokenCounts counts;

  const unsigned workers = std::max(1u, options.workers);
  const std::size_t chunk = std::max<std::size_t>(16, 8 * workers);
  for (std::size_t begin = 0; begin < files.size(); begin += chunk) {
    const std::size_t end = std::min(files.size(), begin + chunk);
    std::vector<DocumentOutput> results(end - begin);
    std::atomic<std::size_t> next{begin};
    auto work = [&] {
      for (std::size_t i = next++; i < end; i = next++) {
        results[i - begin] = process_document(root, files[i], options);
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < std::min<std::size_t>(workers, end - begin); ++w) pool.emplace_back(work);
    }
    for (auto& r : results) {
      if (r.skipped) {
        stats.skipped.push_back(*r.skipped);
        continue;
      }
      ++stats.documents;
      stats.paragraphs += r.paragraphs;
      stats.sentences += r.sentences;
      stats.next_eligible_paragraphs += r.next_eligible;
      for (std::size_t t = 0; t < kNumTasks; ++t) {
        stats.tasks[t].train += r.tasks[t].train;
        stats.tasks[t].heldout += r.tasks[t].heldout;
      }
      for (std::size_t c = 0; c < discourse::kNumCategories; ++c) stats.categories[c] += r.categories[c];
      for (std::size_t k = 0; k < outputs.size(); ++k) outputs[k] << r.lines[k];
      counts.merge(r.counts);
    }
  }
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    outputs[k].close();
    if (!outputs[k]) throw IoError("write failed in " + out_dir.string());
  }

  const auto vocab = text::Vocabulary::build(counts, options.min_count);
  vocab.save(out_dir / "vocab.tsv");
  stats.vocabulary_size = vocab.size();

  std::ofstream st(out_dir / "stats.json", std::ios::binary | std::ios::trunc);
  st << stats.to_json().dump(2) << '\n';
  if (!st) throw IoError("cannot write " + (out_dir / "stats.json").string());
  return stats;
}

}  // namespace discsent::dataset
