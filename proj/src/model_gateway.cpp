#include "benchforge/model_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <thread>

#include "benchforge/error.hpp"
#include "benchforge/hashing.hpp"

namespace benchforge {

EmbedResponse Provider::embed(const std::vector<std::string>&, const std::string&) {
  throw TransportError("provider '" + name() + "' does not support embeddings", false);
}

// ---------------------------------------------------------------- pricing

PricingTable PricingTable::from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("pricing table must be an object keyed by model id");
  PricingTable t;
  for (const auto& [model, r] : doc.items()) {
    if (!r.is_object()) throw ValidationError("pricing for '" + model + "' must be an object");
    Rate rate;
    rate.usd_per_1m_input = r.value("usd_per_1m_input", 0.0);
    rate.usd_per_1m_output = r.value("usd_per_1m_output", 0.0);
    t.set(model, rate);
  }
  return t;
}

void PricingTable::set(const std::string& model_id, Rate rate) {
  if (!std::isfinite(rate.usd_per_1m_input) || !std::isfinite(rate.usd_per_1m_output) ||
      rate.usd_per_1m_input < 0 || rate.usd_per_1m_output < 0)
    throw ValidationError("pricing for '" + model_id + "' must be finite and non-negative");
  rates_[model_id] = rate;
}

Rate PricingTable::rate(const std::string& model_id) const {
  auto it = rates_.find(model_id);
  return it == rates_.end() ? Rate{} : it->second;
}

double cost_usd(std::uint64_t input_tokens, std::uint64_t output_tokens, Rate rate) {
  return static_cast<double>(input_tokens) / 1e6 * rate.usd_per_1m_input +
         static_cast<double>(output_tokens) / 1e6 * rate.usd_per_1m_output;
}

// ---------------------------------------------------------------- ledger

void CostLedger::record(const std::string& role, const std::string& model_id, std::uint64_t input_tokens,
                        std::uint64_t output_tokens) {
  std::lock_guard lock(mu_);
  auto& a = acc_[Key{role, model_id}];
  a.calls += 1;
  a.input_tokens += input_tokens;
  a.output_tokens += output_tokens;
}

std::vector<CostLedger::Row> CostLedger::rows() const {
  std::lock_guard lock(mu_);
  std::vector<Row> out;
  for (const auto& [k, a] : acc_) {
    Row r{k.role, k.model, a};
    r.usage.usd = cost_usd(a.input_tokens, a.output_tokens, pricing_.rate(k.model));
    out.push_back(std::move(r));
  }
  return out;
}

UsageTotals CostLedger::totals() const {
  UsageTotals t;
  for (const auto& r : rows()) {
    t.calls += r.usage.calls;
    t.input_tokens += r.usage.input_tokens;
    t.output_tokens += r.usage.output_tokens;
    t.usd += r.usage.usd;
  }
  return t;
}

void CostLedger::merge_report(const Json& report) {
  if (!report.is_object() || !report.contains("rows") || !report["rows"].is_array())
    throw ParseError("cost report must contain a rows array");
  std::lock_guard lock(mu_);
  for (const auto& r : report["rows"]) {
    auto& a = acc_[Key{r.value("role", ""), r.value("model_id", "")}];
    a.calls += r.value("calls", std::uint64_t{0});
    a.input_tokens += r.value("input_tokens", std::uint64_t{0});
    a.output_tokens += r.value("output_tokens", std::uint64_t{0});
  }
}

Json ledger_report(const CostLedger& ledger) {
  Json rows = Json::array();
  UsageTotals t;
  for (const auto& r : ledger.rows()) {
    rows.push_back({{"role", r.role},
                    {"model_id", r.model_id},
                    {"calls", r.usage.calls},
                    {"input_tokens", r.usage.input_tokens},
                    {"output_tokens", r.usage.output_tokens},
                    {"usd", r.usage.usd}});
    t.calls += r.usage.calls;
    t.input_tokens += r.usage.input_tokens;
    t.output_tokens += r.usage.output_tokens;
    t.usd += r.usage.usd;
  }
  return {{"rows", rows},
          {"total",
           {{"calls", t.calls}, {"input_tokens", t.input_tokens}, {"output_tokens", t.output_tokens}, {"usd", t.usd}}}};
}

// ---------------------------------------------------------------- gateway

namespace {

struct SlotGuard {
  std::counting_semaphore<>& s;
  explicit SlotGuard(std::counting_semaphore<>& sem) : s(sem) { s.acquire(); }
  ~SlotGuard() { s.release(); }
};

}  // namespace

Gateway::Gateway(std::shared_ptr<Provider> provider, std::shared_ptr<CostLedger> ledger, GatewayOptions options)
    : provider_(std::move(provider)),
      ledger_(ledger ? std::move(ledger) : std::make_shared<CostLedger>()),
      opts_(std::move(options)),
      slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, opts_.max_in_flight))),
      rng_(opts_.jitter_seed) {
  if (!provider_) throw ValidationError("gateway needs a provider");
  if (opts_.retry.max_attempts < 1) throw ValidationError("retry budget must allow at least one attempt");
  if (!opts_.sleeper) opts_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds Gateway::backoff(int attempt, long retry_after_ms) {
  long long cap = opts_.retry.base_delay.count();
  for (int i = 1; i < attempt && cap < opts_.retry.max_delay.count(); ++i) cap *= 2;
  cap = std::min<long long>(cap, opts_.retry.max_delay.count());
  long long d;
  {
    std::lock_guard lock(rng_mu_);
    d = cap > 0 ? static_cast<long long>(uniform_index(rng_, static_cast<std::uint64_t>(cap) + 1)) : 0;
  }
  if (retry_after_ms >= 0) d = std::min<long long>(std::max<long long>(d, retry_after_ms), opts_.retry.max_delay.count());
  return std::chrono::milliseconds(d);
}

template <class F>
auto Gateway::with_retries(F&& attempt) -> decltype(attempt()) {
  for (int i = 1;; ++i) {
    try {
      return attempt();
    } catch (const TransportError& e) {
      if (!e.retriable() || i >= opts_.retry.max_attempts) throw;
      retries_.fetch_add(1);
      opts_.sleeper(backoff(i, e.retry_after_ms()));
    }
  }
}

ChatResponse Gateway::chat(ChatRequest request) {
  if (request.messages.empty()) throw ValidationError("chat request needs at least one message");
  if (!(request.temperature >= 0)) throw ValidationError("temperature must be non-negative");
  if (request.model_id.empty()) request.model_id = opts_.model_id;
  SlotGuard slot(slots_);
  auto start = std::chrono::steady_clock::now();
  ChatResponse resp;
  try {
    resp = with_retries([&] { return provider_->chat(request); });
  } catch (...) {
    ledger_->record(opts_.role, request.model_id, 0, 0);
    throw;
  }
  ledger_->record(opts_.role, request.model_id, resp.input_tokens, resp.output_tokens);
  if (resp.provider_latency.count() == 0)
    resp.provider_latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return resp;
}

std::string Gateway::cache_key(const std::string& text) const {
  std::string material = provider_->name();
  material.push_back('\x1f');
  material += opts_.model_id;
  material.push_back('\x1f');
  material += text;
  return sha256_hex(material);
}

std::vector<std::vector<double>> Gateway::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ValidationError("embed needs at least one text");
  std::vector<std::string> keys;
  keys.reserve(texts.size());
  std::vector<std::optional<std::vector<double>>> found(texts.size());
  std::vector<std::string> miss_texts;
  std::map<std::string, std::size_t> miss_index;
  {
    std::lock_guard lock(cache_mu_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      keys.push_back(cache_key(texts[i]));
      const auto& key = keys.back();
      if (auto it = cache_.find(key); it != cache_.end()) {
        found[i] = it->second;
        cache_hits_.fetch_add(1);
        continue;
      }
      if (!opts_.embed_cache_dir.empty()) {
        auto p = opts_.embed_cache_dir / (key + ".json");
        if (std::filesystem::exists(p)) {
          Json rec = read_json_file(p);
          auto v = rec.at("vector").get<std::vector<double>>();
          cache_.emplace(key, v);
          found[i] = std::move(v);
          cache_hits_.fetch_add(1);
          continue;
        }
      }
      if (!miss_index.count(key)) {
        miss_index.emplace(key, miss_texts.size());
        miss_texts.push_back(texts[i]);
      }
    }
  }

  std::uint64_t in_tokens = 0;
  if (!miss_texts.empty()) {
    SlotGuard slot(slots_);
    EmbedResponse resp;
    try {
      resp = with_retries([&] { return provider_->embed(miss_texts, opts_.model_id); });
    } catch (...) {
      ledger_->record(opts_.role, opts_.model_id, 0, 0);
      throw;
    }
    in_tokens = resp.input_tokens;
    if (resp.vectors.size() != miss_texts.size()) {
      ledger_->record(opts_.role, opts_.model_id, in_tokens, 0);
      throw TransportError("embedding provider returned " + std::to_string(resp.vectors.size()) + " vectors for " +
                               std::to_string(miss_texts.size()) + " texts",
                           false);
    }
    std::lock_guard lock(cache_mu_);
    if (!opts_.embed_cache_dir.empty()) std::filesystem::create_directories(opts_.embed_cache_dir);
    for (const auto& [key, idx] : miss_index) {
      cache_.emplace(key, resp.vectors[idx]);
      if (!opts_.embed_cache_dir.empty())
        write_json_file(opts_.embed_cache_dir / (key + ".json"),
                        Json{{"provider", provider_->name()}, {"model_id", opts_.model_id}, {"vector", resp.vectors[idx]}});
    }
    for (std::size_t i = 0; i < texts.size(); ++i)
      if (!found[i]) found[i] = resp.vectors[miss_index.at(keys[i])];
  }
  ledger_->record(opts_.role, opts_.model_id, in_tokens, 0);

  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (auto& v : found) out.push_back(std::move(*v));
  for (const auto& v : out)
    if (v.size() != out.front().size())
      throw ValidationError("embedding dimension mismatch within a batch: " + std::to_string(out.front().size()) +
                            " vs " + std::to_string(v.size()));
  return out;
}

EmbedResponse FunctionProvider::embed(const std::vector<std::string>& t, const std::string& m) {
  if (!embed_) return Provider::embed(t, m);
  return embed_(t, m);
}

// ---------------------------------------------------------------- helpers

bool glob_match(std::string_view pattern, std::string_view text) {
  size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::vector<double> hashed_bag_of_words(std::string_view text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    std::string h = sha256_hex(word);
    std::uint64_t x = std::stoull(h.substr(0, 15), nullptr, 16);
    v[x % dim] += 1.0;
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    else flush();
  }
  flush();
  double n = 0;
  for (double x : v) n += x * x;
  if (n == 0) {
    v[0] = 1.0;
    return v;
  }
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace benchforge
