#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "benchforge/json_util.hpp"

namespace benchforge {

struct Message {
  std::string role;  // "system" | "user"
  std::string content;
};

struct ChatRequest {
  std::string model_id;  // empty: the gateway's configured model
  std::vector<Message> messages;
  double temperature = 0.0;
  std::optional<int> max_output_tokens;
  /// Stage tag identifying the call site, e.g. "ch01.Hard-Apply.0/seed".
  /// Used by scripted providers and audit logs.
  std::string tag;
};

struct ChatResponse {
  std::string text;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  std::chrono::milliseconds provider_latency{0};
};

struct EmbedResponse {
  std::vector<std::vector<double>> vectors;
  std::uint64_t input_tokens = 0;
};

/// A concrete model API. Implementations throw TransportError on failure.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
  /// Default implementation throws a fatal TransportError.
  virtual EmbedResponse embed(const std::vector<std::string>& texts, const std::string& model_id);
};

struct Rate {
  double usd_per_1m_input = 0.0;
  double usd_per_1m_output = 0.0;
};

class PricingTable {
 public:
  PricingTable() = default;
  /// `{model_id: {usd_per_1m_input, usd_per_1m_output}}`. Throws ValidationError
  /// for negative or non-finite rates.
  static PricingTable from_json(const Json& doc);
  void set(const std::string& model_id, Rate rate);
  /// Zero rate for unknown models.
  Rate rate(const std::string& model_id) const;
  bool contains(const std::string& model_id) const { return rates_.count(model_id) != 0; }

 private:
  std::map<std::string, Rate> rates_;
};

double cost_usd(std::uint64_t input_tokens, std::uint64_t output_tokens, Rate rate);

struct UsageTotals {
  std::uint64_t calls = 0;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  double usd = 0.0;
};

/// Thread-safe token accounting keyed by (role, model).
class CostLedger {
 public:
  explicit CostLedger(PricingTable pricing = {}) : pricing_(std::move(pricing)) {}

  void record(const std::string& role, const std::string& model_id, std::uint64_t input_tokens,
              std::uint64_t output_tokens);

  struct Row {
    std::string role;
    std::string model_id;
    UsageTotals usage;
  };
  /// Rows sorted by (role, model); usd computed from the token totals.
  std::vector<Row> rows() const;
  UsageTotals totals() const;
  const PricingTable& pricing() const { return pricing_; }

  /// Adds the rows of a previously written report (used to aggregate
  /// per-command cost files).
  void merge_report(const Json& report);

 private:
  struct Key {
    std::string role, model;
    bool operator<(const Key& o) const { return std::tie(role, model) < std::tie(o.role, o.model); }
  };
  mutable std::mutex mu_;
  PricingTable pricing_;
  std::map<Key, UsageTotals> acc_;
};

/// `{rows: [{role, model_id, calls, input_tokens, output_tokens, usd}], total: {...}}`.
Json ledger_report(const CostLedger& ledger);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct GatewayOptions {
  std::string role;      // "designer", "verifier", "subject", ...
  std::string model_id;  // default model for requests that leave it empty
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::uint64_t jitter_seed = 0;
  Sleeper sleeper;                      // default: std::this_thread::sleep_for
  std::filesystem::path embed_cache_dir;  // empty: memory only
};

/// Wraps a provider with transport retries, an in-flight cap, usage
/// accounting and an embedding cache. Safe for concurrent use.
class Gateway {
 public:
  Gateway(std::shared_ptr<Provider> provider, std::shared_ptr<CostLedger> ledger, GatewayOptions options);

  /// Records usage exactly once per call, also when the call finally fails.
  ChatResponse chat(ChatRequest request);

  /// One vector per text, in order. Cached texts are served locally.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);

  const std::string& role() const { return opts_.role; }
  const std::string& model_id() const { return opts_.model_id; }
  void set_model_id(std::string m) { opts_.model_id = std::move(m); }
  Provider& provider() { return *provider_; }
  std::shared_ptr<CostLedger> ledger() const { return ledger_; }

  /// Number of transport-level retries performed so far.
  std::uint64_t retries() const { return retries_.load(); }
  std::uint64_t embed_cache_hits() const { return cache_hits_.load(); }

 private:
  template <class F>
  auto with_retries(F&& attempt) -> decltype(attempt());
  std::chrono::milliseconds backoff(int attempt, long retry_after_ms);
  std::string cache_key(const std::string& text) const;

  std::shared_ptr<Provider> provider_;
  std::shared_ptr<CostLedger> ledger_;
  GatewayOptions opts_;
  std::counting_semaphore<> slots_;
  std::atomic<std::uint64_t> retries_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  std::mutex cache_mu_;
  std::unordered_map<std::string, std::vector<double>> cache_;
};

/// Provider backed by a callable; convenient for tests.
class FunctionProvider : public Provider {
 public:
  using ChatFn = std::function<ChatResponse(const ChatRequest&)>;
  using EmbedFn = std::function<EmbedResponse(const std::vector<std::string>&, const std::string&)>;
  explicit FunctionProvider(ChatFn chat, EmbedFn embed = {}, std::string name = "function")
      : chat_(std::move(chat)), embed_(std::move(embed)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  ChatResponse chat(const ChatRequest& r) override { return chat_(r); }
  EmbedResponse embed(const std::vector<std::string>& t, const std::string& m) override;

 private:
  ChatFn chat_;
  EmbedFn embed_;
  std::string name_;
};

/// Configurable HTTP JSON chat/embedding protocol. Configuration keys:
/// name, base_url, path, auth_env_var, auth_header, auth_prefix, headers,
/// model_id, request_template, response_text_path, usage_paths{input,output},
/// timeout_s, supports_temperature, embedding{path, model_id,
/// request_template, vectors_path, item_path, usage_input_path}.
/// Template string values "${model}", "${messages}", "${system}",
/// "${user_messages}", "${temperature}", "${max_tokens}", "${texts}" are
/// replaced by JSON values; members whose variable is unset are dropped.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(Json config);
  std::string name() const override;
  ChatResponse chat(const ChatRequest& request) override;
  EmbedResponse embed(const std::vector<std::string>& texts, const std::string& model_id) override;

  /// Request body the provider would send; exposed for tests.
  Json build_chat_body(const ChatRequest& request) const;

 private:
  Json post(const std::string& path, const Json& body, const std::string& tag) const;
  Json cfg_;
};

/// Deterministic scripted provider. Script document:
///   {"chat": [{"tag": "<glob>", "responses": [<response>, ...]}, ...],
///    "embeddings": {"<text>": [..vector..]}, "embedding_dim": 256}
/// The first rule whose glob matches the request tag answers; the n-th call
/// with a given tag gets responses[n] (the last entry repeats). A response is
/// a string, {"text", "input_tokens", "output_tokens"}, {"json": doc},
/// {"error": "transport"|"fatal"}, {"status": 429}, or
/// {"echo_json": true, "replace": [[from, to], ...], "patch": {...}} which
/// returns the first JSON object found in the last user message, after
/// textual replacements and a JSON merge patch. "{tag}" and "{ordinal}" in
/// text responses expand to the request tag and per-tag call ordinal.
/// Texts without a scripted embedding get a hashed bag-of-words vector.
class MockProvider : public Provider {
 public:
  explicit MockProvider(Json script, std::string name = "mock");
  static std::shared_ptr<MockProvider> from_file(const std::filesystem::path& path);

  std::string name() const override { return name_; }
  ChatResponse chat(const ChatRequest& request) override;
  EmbedResponse embed(const std::vector<std::string>& texts, const std::string& model_id) override;

  /// Calls seen so far for an exact tag.
  std::size_t calls_for(const std::string& tag) const;
  std::vector<ChatRequest> history() const;

 private:
  Json script_;
  std::string name_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> ordinals_;
  std::vector<ChatRequest> history_;
};

/// Shell-style glob with `*` and `?`.
bool glob_match(std::string_view pattern, std::string_view text);

/// Deterministic unit vector from lower-cased word hashes.
std::vector<double> hashed_bag_of_words(std::string_view text, std::size_t dim);

}  // namespace benchforge
