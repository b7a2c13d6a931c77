#include <map>

#include "benchforge/cli/commands.hpp"
#include "benchforge/gen_pipeline.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace benchforge;
using namespace benchforge::testing;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  TempDir dir{"bfcli"};
  fs::path config;

  explicit Workspace(int quota = 5, std::size_t chapters = 4) {
    write_toy_corpus(dir.path(), chapters);
    config = dir / "config.json";
    write_json_file(config, toy_run_config(dir.path(), quota));
  }
  int run(const std::string& cmd, const std::string& run_id, std::vector<std::string> extra = {}) const {
    std::vector<std::string> args{cmd, "--config", config.string(), "--run-id", run_id};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }
  fs::path run_dir(const std::string& id) const { return dir / ("runs/" + id); }
};

// Path -> content for every file outside the runs directory.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    std::string rel = fs::relative(e.path(), root).string();
    if (rel.rfind("runs", 0) == 0 || !e.is_regular_file()) continue;
    out[rel] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("argument and config errors exit 1") {
  Workspace ws;
  CHECK(run_cli({}) == 1);
  CHECK(run_cli({"nonsense"}) == 1);
  CHECK(run_cli({"generate"}) == 1);
  CHECK(run_cli({"generate", "--config", (ws.dir / "absent.json").string()}) == 1);
  Json cfg = read_json_file(ws.config);
  cfg["quota"] = 0;
  write_json_file(ws.dir / "bad.json", cfg);
  CHECK(run_cli({"generate", "--config", (ws.dir / "bad.json").string()}) == 1);
  CHECK(ws.run("generate", "r", {"--categories", "Hard-Remember"}) == 1);
  CHECK(ws.run("generate", "r", {"--max-repairs", "-1"}) == 1);
}

TEST_CASE("dedup before generate is a missing artifact") {
  Workspace ws;
  CHECK(ws.run("dedup", "fresh") == 1);
  CHECK(ws.run("evaluate", "fresh") == 1);
  CHECK(ws.run("ledger", "fresh") == 1);
}

TEST_CASE("generation is deterministic and resumable") {
  Workspace ws(2, 2);
  REQUIRE(ws.run("generate", "one") == 0);
  REQUIRE(ws.run("generate", "two", {"--concurrency", "4"}) == 0);
  std::string a = slurp(ws.run_dir("one") / "accepted.jsonl");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(ws.run_dir("two") / "accepted.jsonl"));
  CHECK(slurp(ws.run_dir("one") / "ledger.json") == slurp(ws.run_dir("two") / "ledger.json"));

  // A second invocation on a finished run reuses every chapter.
  std::string costs = slurp(ws.run_dir("one") / "costs/generate.json");
  REQUIRE(ws.run("generate", "one") == 0);
  CHECK(slurp(ws.run_dir("one") / "accepted.jsonl") == a);
  CHECK(slurp(ws.run_dir("one") / "costs/generate.json") == costs);
}

TEST_CASE("default run id is a hash of the effective config") {
  Workspace ws(1, 1);
  REQUIRE(run_cli({"generate", "--config", ws.config.string()}) == 0);
  REQUIRE(run_cli({"generate", "--config", ws.config.string(), "--seed", "8"}) == 0);
  std::size_t runs = 0;
  for (const auto& e : fs::directory_iterator(ws.dir / "runs")) runs += e.is_directory();
  CHECK(runs == 2);
}

TEST_CASE("a held lock blocks the command") {
  Workspace ws(1, 1);
  fs::create_directories(ws.run_dir("locked"));
  write_text_file(ws.run_dir("locked") / ".lock", "other");
  CHECK(ws.run("generate", "locked") == 2);
  CHECK_FALSE(fs::exists(ws.run_dir("locked") / "accepted.jsonl"));
}

TEST_CASE("full mock pipeline") {
  Workspace ws;
  auto before = snapshot(ws.dir.path());
  for (const char* cmd : {"structure", "generate", "dedup", "evaluate", "classify", "analyze", "tsguess", "ledger"}) {
    INFO(cmd);
    REQUIRE(ws.run(cmd, "full") == 0);
  }
  CHECK(snapshot(ws.dir.path()) == before);

  fs::path rd = ws.run_dir("full");
  RunLedger l = RunLedger::from_json(read_json_file(rd / "ledger.json"));
  CHECK(l.seed_count == 80);
  CHECK(l.pass_first == 16);
  CHECK(l.repaired == 32);
  CHECK(l.discarded_retry == 16);
  CHECK(l.discarded_transport == 16);
  CHECK(l.dedup_removed == 16);
  CHECK(l.final_count == 32);
  CHECK(l.identities_hold());

  CHECK(read_benchmark(rd / "accepted.jsonl").size() == 48);
  auto bench = read_benchmark(rd / "benchmark.jsonl");
  CHECK(bench.size() == 32);
  CHECK(bench[0].task_id.rfind("toy_task_", 0) == 0);
  Json report = read_json_file(rd / "dedup_report.json");
  CHECK(report["removed_count"] == 16);

  for (const char* f : {"eval/alpha.jsonl", "eval/beta.jsonl", "eval/gamma.jsonl", "accuracy.csv", "accuracy.json",
                        "analysis/entropy.csv", "analysis/slices.csv", "analysis/spearman.csv",
                        "analysis/samples.json", "classify/ext.jsonl", "tsguess/summary.json", "costs/total.json"})
    CHECK_MESSAGE(fs::exists(rd / f), f);

  Json acc = read_json_file(rd / "accuracy.json");
  for (const auto& c : acc["cells"])
    if (c["model_id"] == "gamma" && c["slice"] == "overall") {
      CHECK(c["accuracy"] == 0.0);
      CHECK(c["invalid"] == 32);
    }

  std::string entropy = slurp(rd / "analysis/entropy.csv");
  CHECK(entropy.rfind("benchmark,entropy,difficulty,separability,size\n", 0) == 0);
  CHECK(entropy.find("\next,") != std::string::npos);
  std::string spearman = slurp(rd / "analysis/spearman.csv");
  CHECK(spearman.rfind("competency_id,competency,spearman\n", 0) == 0);

  Json samples = read_json_file(rd / "analysis/samples.json");
  CHECK(samples["uniform"].size() == 4);

  Json total = read_json_file(rd / "costs/total.json");
  CHECK(total["identities_hold"] == true);
  CHECK(total["costs"]["total"]["usd"].get<double>() > 0.0);

  // Re-running a completed stage reuses its outputs.
  std::string accuracy = slurp(rd / "accuracy.csv");
  REQUIRE(ws.run("evaluate", "full") == 0);
  CHECK(slurp(rd / "accuracy.csv") == accuracy);
}
