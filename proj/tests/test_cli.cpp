#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "discsent/checkpoint.hpp"
#include "test_util.hpp"

using namespace discsent;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> train_args(const fs::path& data, const fs::path& out) {
  return {"train", "--data", data.string(), "--out", out.string(), "--encoder", "bigru", "--embedding-dim", "6",
          "--hidden-dim", "4", "--steps", "30", "--seed", "7", "--batch-size", "8", "--log-every", "10"};
}

}  // namespace

TEST_CASE("cli usage errors") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"train", "--data", "x"}).code == cli::kExitUsage);
  CHECK(run({"nn", "--model", "m", "--index", "i", "--query", "q", "--bogus"}).code == cli::kExitUsage);
  CHECK(run({"build-data", "--corpus", "c", "--out", "o", "--heldout", "1.5"}).code == cli::kExitUsage);
  CHECK(run({"build-data", "--corpus", "c", "--out", "o", "--heldout", "1"}).code == cli::kExitUsage);
}

TEST_CASE("cli help lists defaults") {
  const auto r = run({"train", "--help"});
  CHECK(r.code == cli::kExitOk);
  for (const char* s : {"--steps UINT [2000]", "--lr FLOAT [0.01]", "--subsample-conj UINT [4]",
                        "--subsample-next UINT [6]", "--encoder TEXT [bigru]", "--batch-size UINT [64]"}) {
    CHECK_MESSAGE(r.out.find(s) != std::string::npos, s);
  }
  const auto p = run({"probe", "--help"});
  CHECK(p.out.find("--epochs UINT [100]") != std::string::npos);
  const auto n = run({"nn", "--help"});
  CHECK(n.out.find("--k UINT [5]") != std::string::npos);
}

TEST_CASE("cli pipeline") {
  test::TempDir dir;
  const auto corpus = dir.path() / "corpus";
  test::write_synthetic_corpus(corpus, 30, 3);
  const auto data = dir.path() / "data";
  const std::vector<std::string> build = {"build-data", "--corpus", corpus.string(), "--out", data.string(),
                                          "--seed",     "42",       "--heldout",     "0.2", "--workers", "2"};
  const auto b = run(build);
  REQUIRE(b.code == cli::kExitOk);
  CHECK(nlohmann::json::parse(b.out)["documents"] == 30);
  for (const auto& f : test::kDatasetFiles) CHECK(fs::exists(data / f));

  SUBCASE("build-data is byte-identical across runs and worker counts") {
    const auto data2 = dir.path() / "data2";
    auto again = build;
    again[4] = data2.string();
    again.back() = "1";
    REQUIRE(run(again).code == cli::kExitOk);
    for (const auto& f : test::kDatasetFiles) CHECK(test::read_bytes(data / f) == test::read_bytes(data2 / f));
  }

  const auto model = dir.path() / "m.dsc";
  const auto t = run(train_args(data, model));
  REQUIRE_MESSAGE(t.code == cli::kExitOk, t.err);
  CHECK(fs::exists(model));
  CHECK(fs::exists(dir.path() / "metrics.jsonl"));

  SUBCASE("train is bit-identical across runs") {
    const auto model2 = dir.path() / "m2.dsc";
    auto args = train_args(data, model2);
    args.push_back("--metrics");
    args.push_back((dir.path() / "metrics2.jsonl").string());
    REQUIRE(run(args).code == cli::kExitOk);
    CHECK(test::read_bytes(model) == test::read_bytes(model2));
    CHECK(test::read_bytes(dir.path() / "metrics.jsonl") == test::read_bytes(dir.path() / "metrics2.jsonl"));
  }

  SUBCASE("config file is overridden by flags") {
    std::ofstream(dir.path() / "c.json") << R"({"encoder": "cbow", "steps": 5, "lr": 0.5, "hidden_dim": 3})";
    const auto m = dir.path() / "c.dsc";
    const auto r = run({"train", "--data", data.string(), "--out", m.string(), "--config",
                        (dir.path() / "c.json").string(), "--steps", "3", "--embedding-dim", "4"});
    REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
    const auto ckpt = model::load_checkpoint(m);
    CHECK(ckpt.step == 3);
    CHECK(ckpt.model.encoder().config().kind == model::EncoderKind::kCbow);
    CHECK(ckpt.model.encoder().config().hidden_dim == 3);
    CHECK(ckpt.train_config["lr"] == 0.5);

    std::ofstream(dir.path() / "bad.json") << R"({"stepz": 5})";
    CHECK(run({"train", "--data", data.string(), "--out", m.string(), "--config", (dir.path() / "bad.json").string()})
              .code == cli::kExitUsage);
  }

  SUBCASE("eval") {
    const auto r = run({"eval", "--model", model.string(), "--data", data.string()});
    REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
    const auto j = nlohmann::json::parse(r.out);
    for (const char* task : {"order", "conjunction", "next"}) CHECK(j[task]["count"].get<int>() > 0);
    const auto only = nlohmann::json::parse(run({"eval", "--model", model.string(), "--data", data.string(), "--tasks",
                                                 "order", "--split", "train", "--limit", "10"})
                                                .out);
    CHECK(only.size() == 1);
    CHECK(only["order"]["count"] == 10);
  }

  SUBCASE("encode and nn") {
    std::ofstream(dir.path() / "s.txt") << "the cat walked the road.\n\na dog saw a bird.\nshe left the lake.\n"
                                           "he heard a letter.\nthe river found the garden.\n";
    const auto idx = dir.path() / "s.idx";
    const auto e = run({"encode", "--model", model.string(), "--input", (dir.path() / "s.txt").string(), "--out",
                        idx.string(), "--workers", "2"});
    REQUIRE_MESSAGE(e.code == cli::kExitOk, e.err);
    CHECK(nlohmann::json::parse(e.out)["skipped"] == 1);
    for (const auto& index : {idx, dir.path() / "s.txt"}) {
      const auto r = run({"nn", "--model", model.string(), "--index", index.string(), "--query", "A dog saw a bird.",
                          "--k", "4"});
      REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
      std::istringstream lines(r.out);
      std::vector<std::pair<double, std::string>> hits;
      for (std::string line; std::getline(lines, line);) {
        const auto tab = line.find('\t');
        hits.emplace_back(std::stod(line.substr(0, tab)), line.substr(tab + 1));
      }
      REQUIRE(hits.size() == 4);
      CHECK(hits[0].first == 0.0);
      CHECK(hits[0].second == "a dog saw a bird.");
      for (std::size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].first <= hits[i].first);
    }
    CHECK(run({"nn", "--model", model.string(), "--index", idx.string(), "--query", "x", "--k", "0"}).code ==
          cli::kExitUsage);
  }

  SUBCASE("probe") {
    std::ofstream(dir.path() / "p.tsv") << "0\tthe cat walked\n1\ta dog saw\n0\tthe cat left\n1\ta dog heard\n";
    std::ofstream(dir.path() / "one.tsv") << "0\tthe cat walked\n0\ta dog saw\n";
    const auto p = (dir.path() / "p.tsv").string();
    const auto r = run({"probe", "--model", model.string(), "--train", p, "--test", p, "--epochs", "5"});
    REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["classes"] == 2);
    CHECK(j["test_count"] == 4);
    CHECK(run({"probe", "--model", model.string(), "--train", (dir.path() / "one.tsv").string(), "--test", p}).code ==
          cli::kExitData);
  }

  SUBCASE("data errors exit with 2") {
    CHECK(run({"eval", "--model", (dir.path() / "missing.dsc").string(), "--data", data.string()}).code ==
          cli::kExitData);
    std::ofstream(data / "order.jsonl", std::ios::app) << "{not json\n";
    CHECK(run(train_args(data, dir.path() / "x.dsc")).code == cli::kExitData);
  }
}
