#include <cstdlib>

#include "benchforge/error.hpp"
#include "benchforge/model_gateway.hpp"
#include "httplib.h"

namespace benchforge {

namespace {

using Vars = std::map<std::string, Json>;

// Replaces "${name}" string leaves; members or elements whose variable is
// unset disappear.
std::optional<Json> fill_template(const Json& node, const Vars& vars) {
  if (node.is_string()) {
    const auto& s = node.get_ref<const std::string&>();
    if (s.size() > 3 && s.rfind("${", 0) == 0 && s.back() == '}') {
      auto it = vars.find(s.substr(2, s.size() - 3));
      if (it == vars.end() || it->second.is_null()) return std::nullopt;
      return it->second;
    }
    return node;
  }
  if (node.is_object()) {
    Json out = Json::object();
    for (const auto& [k, v] : node.items())
      if (auto filled = fill_template(v, vars)) out[k] = std::move(*filled);
    return out;
  }
  if (node.is_array()) {
    Json out = Json::array();
    for (const auto& v : node)
      if (auto filled = fill_template(v, vars)) out.push_back(std::move(*filled));
    return out;
  }
  return node;
}

const Json* at_pointer(const Json& doc, const std::string& pointer) {
  try {
    Json::json_pointer ptr(pointer);
    if (!doc.contains(ptr)) return nullptr;
    return &doc.at(ptr);
  } catch (const std::exception&) {
    return nullptr;
  }
}

std::uint64_t usage_at(const Json& doc, const Json& cfg, const char* key) {
  if (!cfg.is_object() || !cfg.contains(key)) return 0;
  const Json* v = at_pointer(doc, cfg[key].get<std::string>());
  if (!v || !v->is_number()) return 0;
  return v->get<std::uint64_t>();
}

struct Endpoint {
  std::string scheme_host_port;
  std::string prefix;
};

Endpoint split_base_url(const std::string& url) {
  size_t scheme = url.find("://");
  size_t slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  Endpoint e;
  e.scheme_host_port = slash == std::string::npos ? url : url.substr(0, slash);
  e.prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

const Json kDefaultChatTemplate = {{"model", "${model}"},
                                   {"messages", "${messages}"},
                                   {"temperature", "${temperature}"},
                                   {"max_tokens", "${max_tokens}"}};
const Json kDefaultEmbedTemplate = {{"model", "${model}"}, {"input", "${texts}"}};

}  // namespace

HttpProvider::HttpProvider(Json config) : cfg_(std::move(config)) {
  if (!cfg_.is_object()) throw ValidationError("provider config must be an object");
  if (!cfg_.contains("base_url") || !cfg_["base_url"].is_string())
    throw ValidationError("provider '" + cfg_.value("name", std::string("?")) + "' needs base_url");
}

std::string HttpProvider::name() const { return cfg_.value("name", std::string("http")); }

Json HttpProvider::build_chat_body(const ChatRequest& request) const {
  Json messages = Json::array(), user_messages = Json::array();
  std::string system;
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
    if (m.role == "system") {
      if (!system.empty()) system += "\n\n";
      system += m.content;
    } else {
      user_messages.push_back({{"role", m.role}, {"content", m.content}});
    }
  }
  Vars vars;
  vars["model"] = request.model_id.empty() ? cfg_.value("model_id", std::string()) : request.model_id;
  vars["messages"] = messages;
  vars["user_messages"] = user_messages;
  if (!system.empty()) vars["system"] = system;
  if (cfg_.value("supports_temperature", true)) vars["temperature"] = request.temperature;
  if (request.max_output_tokens) vars["max_tokens"] = *request.max_output_tokens;
  else if (cfg_.contains("default_max_tokens")) vars["max_tokens"] = cfg_["default_max_tokens"];
  const Json& tmpl = cfg_.contains("request_template") ? cfg_["request_template"] : kDefaultChatTemplate;
  return fill_template(tmpl, vars).value_or(Json::object());
}

Json HttpProvider::post(const std::string& path, const Json& body, const std::string& tag) const {
  Endpoint ep = split_base_url(cfg_["base_url"].get<std::string>());
  httplib::Client client(ep.scheme_host_port);
  int timeout = cfg_.value("timeout_s", 120);
  client.set_connection_timeout(timeout, 0);
  client.set_read_timeout(timeout, 0);
  client.set_write_timeout(timeout, 0);
  if (cfg_.contains("ca_cert_path")) client.set_ca_cert_path(cfg_["ca_cert_path"].get<std::string>().c_str());

  httplib::Headers headers;
  std::string env = cfg_.value("auth_env_var", std::string());
  if (!env.empty()) {
    const char* key = std::getenv(env.c_str());
    if (!key || !*key) throw TransportError("credential environment variable " + env + " is not set", false);
    headers.emplace(cfg_.value("auth_header", std::string("Authorization")),
                    cfg_.value("auth_prefix", std::string("Bearer ")) + key);
  }
  if (cfg_.contains("headers"))
    for (const auto& [k, v] : cfg_["headers"].items()) headers.emplace(k, v.get<std::string>());

  auto res = client.Post(ep.prefix + path, headers, body.dump(), "application/json");
  if (!res)
    throw TransportError(name() + ": connection failure (" + httplib::to_string(res.error()) + ") for " + tag, true);
  int status = res->status;
  if (status == 429 || status == 408 || status >= 500) {
    long retry_after = -1;
    if (res->has_header("Retry-After")) {
      try {
        retry_after = std::stol(res->get_header_value("Retry-After")) * 1000;
      } catch (const std::exception&) {
      }
    }
    throw TransportError(name() + ": HTTP " + std::to_string(status) + " for " + tag, true, status, retry_after);
  }
  if (status < 200 || status >= 300)
    throw TransportError(name() + ": HTTP " + std::to_string(status) + " for " + tag + ": " + res->body.substr(0, 500),
                         false, status);
  try {
    return Json::parse(res->body);
  } catch (const std::exception&) {
    throw TransportError(name() + ": malformed JSON payload for " + tag, false, status);
  }
}

ChatResponse HttpProvider::chat(const ChatRequest& request) {
  auto start = std::chrono::steady_clock::now();
  Json doc = post(cfg_.value("path", std::string("/v1/chat/completions")), build_chat_body(request), request.tag);
  std::string text_path = cfg_.value("response_text_path", std::string("/choices/0/message/content"));
  const Json* text = at_pointer(doc, text_path);
  if (!text || !text->is_string())
    throw TransportError(name() + ": response has no text at " + text_path + " for " + request.tag, false);
  ChatResponse r;
  r.text = text->get<std::string>();
  Json usage = cfg_.contains("usage_paths")
                   ? cfg_["usage_paths"]
                   : Json{{"input", "/usage/prompt_tokens"}, {"output", "/usage/completion_tokens"}};
  r.input_tokens = usage_at(doc, usage, "input");
  r.output_tokens = usage_at(doc, usage, "output");
  r.provider_latency =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return r;
}

EmbedResponse HttpProvider::embed(const std::vector<std::string>& texts, const std::string& model_id) {
  Json ecfg = cfg_.value("embedding", Json::object());
  Vars vars;
  vars["model"] = model_id.empty() ? ecfg.value("model_id", cfg_.value("model_id", std::string())) : model_id;
  vars["texts"] = texts;
  const Json& tmpl = ecfg.contains("request_template") ? ecfg["request_template"] : kDefaultEmbedTemplate;
  Json doc = post(ecfg.value("path", std::string("/v1/embeddings")), fill_template(tmpl, vars).value_or(Json::object()),
                  "embed");
  std::string vpath = ecfg.value("vectors_path", std::string("/data"));
  std::string ipath = ecfg.value("item_path", std::string("/embedding"));
  const Json* items = at_pointer(doc, vpath);
  if (!items || !items->is_array()) throw TransportError(name() + ": no embedding list at " + vpath, false);
  EmbedResponse r;
  for (const auto& item : *items) {
    const Json* vec = ipath.empty() ? &item : at_pointer(item, ipath);
    if (!vec || !vec->is_array()) throw TransportError(name() + ": malformed embedding item", false);
    r.vectors.push_back(vec->get<std::vector<double>>());
  }
  std::string upath = ecfg.value("usage_input_path", std::string("/usage/prompt_tokens"));
  if (const Json* u = at_pointer(doc, upath); u && u->is_number()) r.input_tokens = u->get<std::uint64_t>();
  return r;
}

}  // namespace benchforge
