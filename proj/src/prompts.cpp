#include "benchforge/prompts.hpp"

#include "benchforge/error.hpp"
#include "benchforge/json_util.hpp"

#ifndef BENCHFORGE_DEFAULT_PROMPTS_DIR
#define BENCHFORGE_DEFAULT_PROMPTS_DIR "prompts"
#endif

namespace benchforge {

std::string substitute(std::string_view tmpl, const PromptVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(tmpl.substr(i + 1, close - i - 1));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

PromptLibrary::PromptLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_))
    throw MissingArtifactError("prompt directory not found: " + dir_.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    templates_.emplace(entry.path().stem().string(), read_text_file(entry.path()));
  }
}

std::filesystem::path PromptLibrary::default_dir() { return BENCHFORGE_DEFAULT_PROMPTS_DIR; }

bool PromptLibrary::has(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const std::string& PromptLibrary::raw(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end())
    throw MissingArtifactError("prompt template missing: " + (dir_ / (std::string(name) + ".txt")).string());
  return it->second;
}

std::string PromptLibrary::render(std::string_view name, const PromptVars& vars) const {
  return substitute(raw(name), vars);
}

}  // namespace benchforge
