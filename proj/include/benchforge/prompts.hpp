#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace benchforge {

using PromptVars = std::map<std::string, std::string, std::less<>>;

/// Replaces every `{name}` whose name is a key of `vars`. Other braces are
/// left untouched, so JSON examples inside templates survive. Substituted
/// values are not rescanned.
std::string substitute(std::string_view tmpl, const PromptVars& vars);

/// Template files (`<name>.txt`) loaded from one directory.
class PromptLibrary {
 public:
  explicit PromptLibrary(std::filesystem::path dir);

  /// Directory baked in at build time.
  static std::filesystem::path default_dir();

  const std::filesystem::path& dir() const { return dir_; }
  bool has(std::string_view name) const;
  /// Throws MissingArtifactError naming the expected file.
  const std::string& raw(std::string_view name) const;
  std::string render(std::string_view name, const PromptVars& vars) const;

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace benchforge
