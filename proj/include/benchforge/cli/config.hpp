#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "benchforge/analysis.hpp"
#include "benchforge/contamination.hpp"
#include "benchforge/dedup.hpp"
#include "benchforge/gen_pipeline.hpp"
#include "benchforge/json_util.hpp"
#include "benchforge/model_gateway.hpp"

namespace benchforge::cli {

struct RoleConfig {
  std::string name;  // label used in file names and tags
  std::string provider;
  std::string model_id;
  std::size_t max_in_flight = 4;
};

struct ExternalBenchmark {
  std::string id;
  std::filesystem::path problems;  // JSONL with "problem" or "task_statement"
  ModelAccuracyVector accuracies;  // optional, for difficulty/separability
};

struct RunConfig {
  std::filesystem::path config_path;
  Json effective;  // after flag overrides
  std::filesystem::path runs_dir;
  std::string run_id;

  std::filesystem::path taxonomy;
  std::filesystem::path chapters;
  std::filesystem::path prompts_dir;
  std::filesystem::path exemplars;
  std::filesystem::path benchmark;  // external benchmark to evaluate instead of the generated one
  std::filesystem::path mock_script;
  std::string benchmark_prefix = "bench";

  PipelineConfig pipeline;
  std::size_t concurrency = 1;

  std::map<std::string, Json> providers;
  std::optional<RoleConfig> designer, verifier, embedder, classifier;
  std::vector<RoleConfig> subjects;
  PricingTable pricing;
  RetryPolicy retry;

  DedupConfig dedup;
  std::string eval_template;
  double eval_temperature = 0.0;
  std::optional<int> eval_max_tokens;
  std::size_t eval_concurrency = 1;

  std::set<std::string> frontier_models;
  double review_fraction = 0.10;
  std::optional<std::size_t> incorrect_cap;
  std::vector<ExternalBenchmark> externals;

  std::vector<std::string> tsguess_models;  // subject names; empty = all
  std::string ts_template;

  std::filesystem::path run_dir() const { return runs_dir / run_id; }
  const RoleConfig& role(const std::optional<RoleConfig>& r, const char* key) const;
};

struct Overrides {
  std::optional<int> quota;
  std::optional<std::vector<std::string>> categories;
  std::optional<int> max_repairs;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> mock_script;
  std::optional<std::size_t> concurrency;
  std::optional<std::string> run_id;
};

/// Loads, applies overrides and validates. Relative paths resolve against
/// the config file's directory. Throws ValidationError naming the key.
RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides);

/// Builds gateways over shared provider instances.
class GatewayFactory {
 public:
  GatewayFactory(const RunConfig& cfg, std::shared_ptr<CostLedger> ledger);
  std::unique_ptr<Gateway> make(const RoleConfig& role, const std::string& ledger_role,
                                std::filesystem::path embed_cache = {});
  std::shared_ptr<CostLedger> ledger() const { return ledger_; }

 private:
  std::shared_ptr<Provider> provider(const std::string& name);
  const RunConfig& cfg_;
  std::shared_ptr<CostLedger> ledger_;
  std::shared_ptr<Provider> mock_;
  std::map<std::string, std::shared_ptr<Provider>> cache_;
};

}  // namespace benchforge::cli
