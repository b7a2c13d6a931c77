#include "benchforge/cli/config.hpp"

#include "benchforge/error.hpp"
#include "benchforge/hashing.hpp"
#include "benchforge/prompts.hpp"

namespace benchforge::cli {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ValidationError("config key '" + key + "': " + what);
}

fs::path resolve(const fs::path& base, const Json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "must be a path string");
  fs::path p = v.get<std::string>();
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

fs::path existing_path(const fs::path& base, const Json& doc, const std::string& key, bool required) {
  if (!doc.contains(key)) {
    if (required) bad(key, "is required");
    return {};
  }
  fs::path p = resolve(base, doc[key], key);
  if (!fs::exists(p)) bad(key, "path does not exist: " + p.string());
  return p;
}

template <class T>
T get_or(const Json& doc, const std::string& key, T fallback, const std::string& full_key) {
  if (!doc.contains(key) || doc[key].is_null()) return fallback;
  try {
    return doc[key].get<T>();
  } catch (const std::exception&) {
    bad(full_key, "has the wrong type");
  }
}

RoleConfig parse_role(const Json& j, const std::string& key, const std::map<std::string, Json>& providers,
                      bool mock) {
  if (!j.is_object()) bad(key, "must be an object");
  RoleConfig r;
  r.provider = get_or<std::string>(j, "provider", "", key + ".provider");
  r.model_id = get_or<std::string>(j, "model_id", "", key + ".model_id");
  r.name = get_or<std::string>(j, "name", r.model_id, key + ".name");
  r.max_in_flight = get_or<std::size_t>(j, "max_in_flight", 4, key + ".max_in_flight");
  if (r.name.empty()) bad(key + ".name", "a name or model_id is required");
  if (!is_valid_identifier(r.name)) bad(key + ".name", "'" + r.name + "' must match [A-Za-z0-9_-]+");
  if (!mock) {
    if (r.provider.empty()) bad(key + ".provider", "is required");
    if (!providers.count(r.provider)) bad(key + ".provider", "unknown provider '" + r.provider + "'");
  }
  if (r.max_in_flight == 0) bad(key + ".max_in_flight", "must be positive");
  return r;
}

std::vector<std::string> read_exemplars(const fs::path& p) {
  std::vector<Json> rows;
  if (p.extension() == ".jsonl") {
    rows = read_jsonl_file(p);
  } else {
    Json doc = read_json_file(p);
    if (!doc.is_array()) throw ValidationError("exemplars file must hold a JSON array: " + p.string());
    rows.assign(doc.begin(), doc.end());
  }
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (r.is_string()) out.push_back(r.get<std::string>());
    else if (r.is_object() && r.contains("text")) out.push_back(r["text"].get<std::string>());
    else if (r.is_object()) out.push_back(r.dump(2));
    else throw ValidationError("exemplar entries must be strings or objects: " + p.string());
  }
  return out;
}

}  // namespace

const RoleConfig& RunConfig::role(const std::optional<RoleConfig>& r, const char* key) const {
  if (!r) throw ValidationError(std::string("config key 'roles.") + key + "' is required for this command");
  return *r;
}

RunConfig load_run_config(const fs::path& path, const Overrides& ov) {
  Json doc = read_json_file(path);
  if (!doc.is_object()) throw ValidationError("config must be a JSON object: " + path.string());
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();

  // Apply flag overrides to the document so the run id reflects them.
  if (ov.quota) doc["quota"] = *ov.quota;
  if (ov.categories) doc["categories"] = *ov.categories;
  if (ov.max_repairs) doc["max_repairs"] = *ov.max_repairs;
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.mock_script) doc["mock_script"] = fs::absolute(*ov.mock_script).lexically_normal().string();
  if (ov.concurrency) doc["concurrency"] = *ov.concurrency;

  RunConfig c;
  c.config_path = path;
  c.effective = doc;
  c.runs_dir = doc.contains("runs_dir") ? resolve(base, doc["runs_dir"], "runs_dir") : base / "runs";
  c.taxonomy = existing_path(base, doc, "taxonomy", false);
  c.chapters = existing_path(base, doc, "chapters", false);
  c.exemplars = existing_path(base, doc, "exemplars", false);
  c.benchmark = existing_path(base, doc, "benchmark", false);
  c.mock_script = existing_path(base, doc, "mock_script", false);
  c.prompts_dir = doc.contains("prompts_dir") ? existing_path(base, doc, "prompts_dir", true)
                                               : PromptLibrary::default_dir();
  c.benchmark_prefix = get_or<std::string>(doc, "benchmark_prefix", "bench", "benchmark_prefix");
  if (!is_valid_identifier(c.benchmark_prefix)) bad("benchmark_prefix", "must match [A-Za-z0-9_-]+");

  c.pipeline.quota_per_category = get_or<int>(doc, "quota", 5, "quota");
  c.pipeline.max_repairs = get_or<int>(doc, "max_repairs", 3, "max_repairs");
  c.pipeline.seed = get_or<std::uint64_t>(doc, "seed", 0, "seed");
  c.pipeline.allow_non_hard = get_or<bool>(doc, "allow_non_hard", false, "allow_non_hard");
  c.pipeline.designer_temperature = get_or<double>(doc, "designer_temperature", 0.0, "designer_temperature");
  c.pipeline.verifier_temperature = get_or<double>(doc, "verifier_temperature", 0.0, "verifier_temperature");
  c.pipeline.exemplars_per_prompt = get_or<std::size_t>(doc, "exemplars_per_prompt", 3, "exemplars_per_prompt");
  if (doc.contains("max_output_tokens")) c.pipeline.max_output_tokens = get_or<int>(doc, "max_output_tokens", 0, "max_output_tokens");
  if (doc.contains("categories")) {
    if (!doc["categories"].is_array()) bad("categories", "must be a list such as [\"Hard-Apply\"]");
    c.pipeline.categories.clear();
    for (const auto& v : doc["categories"]) {
      if (!v.is_string()) bad("categories", "entries must be strings");
      try {
        c.pipeline.categories.push_back(BloomDifficultyPair::parse(v.get<std::string>()));
      } catch (const ValidationError& e) {
        bad("categories", e.what());
      }
    }
  }
  try {
    c.pipeline.validate();
  } catch (const ValidationError& e) {
    bad("quota/categories/max_repairs", e.what());
  }
  if (!c.exemplars.empty()) c.pipeline.exemplars = read_exemplars(c.exemplars);
  c.concurrency = get_or<std::size_t>(doc, "concurrency", 1, "concurrency");
  if (c.concurrency == 0) bad("concurrency", "must be positive");

  if (doc.contains("providers")) {
    if (!doc["providers"].is_object()) bad("providers", "must be an object keyed by provider name");
    for (const auto& [name, p] : doc["providers"].items()) {
      if (!p.is_object()) bad("providers." + name, "must be an object");
      std::string kind = p.value("kind", std::string("http"));
      if (kind == "mock") {
        if (!p.contains("script")) bad("providers." + name + ".script", "is required for mock providers");
        Json copy = p;
        copy["script"] = existing_path(base, p, "script", true).string();
        c.providers[name] = copy;
      } else if (kind == "http") {
        if (!p.contains("base_url")) bad("providers." + name + ".base_url", "is required");
        c.providers[name] = p;
      } else {
        bad("providers." + name + ".kind", "must be 'http' or 'mock'");
      }
    }
  }
  const bool mock = !c.mock_script.empty();
  Json roles = doc.value("roles", Json::object());
  if (!roles.is_object()) bad("roles", "must be an object");
  auto role = [&](const char* key, std::optional<RoleConfig>& dst) {
    if (roles.contains(key)) dst = parse_role(roles[key], std::string("roles.") + key, c.providers, mock);
  };
  role("designer", c.designer);
  role("verifier", c.verifier);
  role("embedder", c.embedder);
  role("classifier", c.classifier);
  std::set<std::string> subject_names;
  if (doc.contains("subjects")) {
    if (!doc["subjects"].is_array()) bad("subjects", "must be a list");
    for (size_t i = 0; i < doc["subjects"].size(); ++i) {
      auto r = parse_role(doc["subjects"][i], "subjects[" + std::to_string(i) + "]", c.providers, mock);
      if (!subject_names.insert(r.name).second) bad("subjects", "duplicate subject name '" + r.name + "'");
      c.subjects.push_back(r);
    }
  }
  if (doc.contains("pricing")) {
    try {
      c.pricing = PricingTable::from_json(doc["pricing"]);
    } catch (const ValidationError& e) {
      bad("pricing", e.what());
    }
  }
  Json retry = doc.value("retry", Json::object());
  c.retry.max_attempts = get_or<int>(retry, "max_attempts", 5, "retry.max_attempts");
  c.retry.base_delay = std::chrono::milliseconds(get_or<long>(retry, "base_delay_ms", 500, "retry.base_delay_ms"));
  c.retry.max_delay = std::chrono::milliseconds(get_or<long>(retry, "max_delay_ms", 30000, "retry.max_delay_ms"));
  if (c.retry.max_attempts < 1) bad("retry.max_attempts", "must be at least 1");

  Json dedup = doc.value("dedup", Json::object());
  c.dedup.threshold = get_or<double>(dedup, "threshold", 0.90, "dedup.threshold");
  try {
    c.dedup.validate();
  } catch (const ValidationError& e) {
    bad("dedup.threshold", e.what());
  }

  Json ev = doc.value("eval", Json::object());
  c.eval_template = default_mcq_template();
  if (ev.contains("prompt_template"))
    c.eval_template = read_text_file(existing_path(base, ev, "prompt_template", true));
  c.eval_temperature = get_or<double>(ev, "temperature", 0.0, "eval.temperature");
  if (ev.contains("max_output_tokens")) c.eval_max_tokens = get_or<int>(ev, "max_output_tokens", 0, "eval.max_output_tokens");
  c.eval_concurrency = get_or<std::size_t>(ev, "concurrency", 1, "eval.concurrency");

  Json an = doc.value("analysis", Json::object());
  for (const auto& m : get_or<std::vector<std::string>>(an, "frontier_models", {}, "analysis.frontier_models")) {
    if (!subject_names.count(m)) bad("analysis.frontier_models", "'" + m + "' is not a subject name");
    c.frontier_models.insert(m);
  }
  c.review_fraction = get_or<double>(an, "review_fraction", 0.10, "analysis.review_fraction");
  if (!(c.review_fraction > 0 && c.review_fraction <= 1)) bad("analysis.review_fraction", "must be in (0, 1]");
  if (an.contains("incorrect_sample_cap"))
    c.incorrect_cap = get_or<std::size_t>(an, "incorrect_sample_cap", 0, "analysis.incorrect_sample_cap");
  if (an.contains("external_benchmarks")) {
    const Json& ex = an["external_benchmarks"];
    if (!ex.is_array()) bad("analysis.external_benchmarks", "must be a list");
    for (size_t i = 0; i < ex.size(); ++i) {
      std::string key = "analysis.external_benchmarks[" + std::to_string(i) + "]";
      ExternalBenchmark e;
      e.id = get_or<std::string>(ex[i], "id", "", key + ".id");
      if (!is_valid_identifier(e.id)) bad(key + ".id", "must match [A-Za-z0-9_-]+");
      e.problems = existing_path(base, ex[i], "problems", false);
      if (ex[i].contains("accuracies"))
        e.accuracies = get_or<ModelAccuracyVector>(ex[i], "accuracies", {}, key + ".accuracies");
      c.externals.push_back(e);
    }
  }

  Json ts = doc.value("tsguess", Json::object());
  c.tsguess_models = get_or<std::vector<std::string>>(ts, "models", {}, "tsguess.models");
  for (const auto& m : c.tsguess_models)
    if (!subject_names.count(m)) bad("tsguess.models", "'" + m + "' is not a subject name");
  c.ts_template = default_ts_template();
  if (ts.contains("prompt_template")) c.ts_template = read_text_file(existing_path(base, ts, "prompt_template", true));

  if (ov.run_id) {
    c.run_id = *ov.run_id;
  } else if (doc.contains("run_id")) {
    c.run_id = get_or<std::string>(doc, "run_id", "", "run_id");
  } else {
    Json h = doc;
    for (const char* k : {"runs_dir", "run_id", "concurrency"}) h.erase(k);
    if (h.contains("eval") && h["eval"].is_object()) h["eval"].erase("concurrency");
    if (!c.mock_script.empty()) h["mock_script"] = sha256_hex(read_text_file(c.mock_script));
    c.run_id = sha256_hex(h.dump()).substr(0, 16);
  }
  if (!is_valid_identifier(c.run_id)) bad("run_id", "must match [A-Za-z0-9_-]+");
  return c;
}

// ---------------------------------------------------------------- gateways

GatewayFactory::GatewayFactory(const RunConfig& cfg, std::shared_ptr<CostLedger> ledger)
    : cfg_(cfg), ledger_(std::move(ledger)) {
  if (!cfg_.mock_script.empty()) mock_ = MockProvider::from_file(cfg_.mock_script);
}

std::shared_ptr<Provider> GatewayFactory::provider(const std::string& name) {
  if (mock_) return mock_;
  if (auto it = cache_.find(name); it != cache_.end()) return it->second;
  auto pc = cfg_.providers.find(name);
  if (pc == cfg_.providers.end()) throw ValidationError("unknown provider '" + name + "'");
  std::shared_ptr<Provider> p;
  if (pc->second.value("kind", std::string("http")) == "mock")
    p = std::make_shared<MockProvider>(read_json_file(pc->second["script"].get<std::string>()), name);
  else
    p = std::make_shared<HttpProvider>(pc->second);
  cache_.emplace(name, p);
  return p;
}

std::unique_ptr<Gateway> GatewayFactory::make(const RoleConfig& role, const std::string& ledger_role,
                                              std::filesystem::path embed_cache) {
  GatewayOptions o;
  o.role = ledger_role;
  o.model_id = role.model_id.empty() ? role.name : role.model_id;
  o.retry = cfg_.retry;
  o.max_in_flight = role.max_in_flight;
  o.jitter_seed = derive_seed(cfg_.pipeline.seed, {"jitter", ledger_role});
  o.embed_cache_dir = std::move(embed_cache);
  return std::make_unique<Gateway>(provider(role.provider), ledger_, o);
}

}  // namespace benchforge::cli
