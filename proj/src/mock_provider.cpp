#include "benchforge/error.hpp"
#include "benchforge/model_gateway.hpp"
#include "benchforge/task_schema.hpp"

namespace benchforge {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  if (from.empty()) return;
  for (size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

const Message* last_user_message(const ChatRequest& r) {
  for (auto it = r.messages.rbegin(); it != r.messages.rend(); ++it)
    if (it->role == "user") return &*it;
  return nullptr;
}

}  // namespace

MockProvider::MockProvider(Json script, std::string name) : script_(std::move(script)), name_(std::move(name)) {
  if (!script_.is_object()) throw ValidationError("mock script must be a JSON object");
  if (script_.contains("chat") && !script_["chat"].is_array()) throw ValidationError("mock script 'chat' must be a list");
  for (const auto& rule : script_.value("chat", Json::array())) {
    if (!rule.is_object() || !rule.contains("tag") || !rule.contains("responses") || !rule["responses"].is_array() ||
        rule["responses"].empty())
      throw ValidationError("mock chat rule needs 'tag' and a non-empty 'responses' list");
  }
}

std::shared_ptr<MockProvider> MockProvider::from_file(const std::filesystem::path& path) {
  return std::make_shared<MockProvider>(read_json_file(path), "mock");
}

std::size_t MockProvider::calls_for(const std::string& tag) const {
  std::lock_guard lock(mu_);
  auto it = ordinals_.find(tag);
  return it == ordinals_.end() ? 0 : it->second;
}

std::vector<ChatRequest> MockProvider::history() const {
  std::lock_guard lock(mu_);
  return history_;
}

ChatResponse MockProvider::chat(const ChatRequest& request) {
  std::size_t ordinal;
  {
    std::lock_guard lock(mu_);
    ordinal = ordinals_[request.tag]++;
    history_.push_back(request);
  }
  const Json* rule = nullptr;
  if (script_.contains("chat")) {
    for (const auto& r : script_["chat"])
      if (glob_match(r["tag"].get<std::string>(), request.tag)) {
        rule = &r;
        break;
      }
  }
  if (!rule) throw TransportError("mock: no scripted response for tag '" + request.tag + "'", false);
  const Json& responses = (*rule)["responses"];
  const Json& resp = responses[std::min<std::size_t>(ordinal, responses.size() - 1)];

  ChatResponse out;
  auto expand = [&](std::string s) {
    replace_all(s, "{tag}", request.tag);
    replace_all(s, "{ordinal}", std::to_string(ordinal));
    return s;
  };
  if (resp.is_string()) {
    out.text = expand(resp.get<std::string>());
    return out;
  }
  if (!resp.is_object()) throw ValidationError("mock response must be a string or object (tag " + request.tag + ")");
  if (resp.contains("status")) {
    int status = resp["status"].get<int>();
    bool retriable = status == 429 || status == 408 || status >= 500;
    throw TransportError("mock: HTTP " + std::to_string(status) + " for " + request.tag, retriable, status);
  }
  if (resp.contains("error")) {
    bool retriable = resp["error"].get<std::string>() != "fatal";
    throw TransportError("mock: scripted transport failure for " + request.tag, retriable);
  }
  if (resp.contains("text")) {
    out.text = expand(resp["text"].get<std::string>());
  } else if (resp.contains("json")) {
    out.text = resp["json"].dump(2);
  } else if (resp.value("echo_json", false)) {
    const Message* user = last_user_message(request);
    if (!user) throw ValidationError("mock echo_json needs a user message (tag " + request.tag + ")");
    std::string body = user->content;
    for (const auto& pair : resp.value("replace", Json::array()))
      replace_all(body, pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    Json doc = extract_json(body);
    if (resp.contains("patch")) doc.merge_patch(resp["patch"]);
    out.text = doc.dump(2);
  } else {
    throw ValidationError("mock response object has no text/json/echo_json/error/status (tag " + request.tag + ")");
  }
  out.text = resp.value("prefix", std::string()) + out.text + resp.value("suffix", std::string());
  out.input_tokens = resp.value("input_tokens", std::uint64_t{0});
  out.output_tokens = resp.value("output_tokens", std::uint64_t{0});
  return out;
}

EmbedResponse MockProvider::embed(const std::vector<std::string>& texts, const std::string&) {
  EmbedResponse r;
  const std::size_t dim = script_.value("embedding_dim", std::size_t{256});
  const Json fixed = script_.value("embeddings", Json::object());
  for (const auto& t : texts) {
    if (fixed.contains(t)) r.vectors.push_back(fixed[t].get<std::vector<double>>());
    else r.vectors.push_back(hashed_bag_of_words(t, dim));
  }
  return r;
}

}  // namespace benchforge
