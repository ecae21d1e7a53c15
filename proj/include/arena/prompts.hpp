#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "arena/llm_gateway.hpp"

namespace arena {

/// A versioned prompt file `<role>.v<N>.txt` with `[system]` and `[user]`
/// sections and `{{name}}` placeholders.
struct PromptTemplate {
  std::string role;
  int version = 0;
  std::string system;
  std::string user;

  std::string id() const { return role + ".v" + std::to_string(version); }
  std::vector<std::string> placeholders() const;
};

PromptTemplate parse_prompt_template(std::string role, int version, std::string_view text);

/// Holds the newest version of each role found in a directory.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir);
  /// Directory compiled in at build time (the repo's prompts/).
  static std::filesystem::path default_dir();

  const PromptTemplate& get(const std::string& role) const;
  bool has(const std::string& role) const { return templates_.contains(role); }
  void add(PromptTemplate tmpl);

  /// Substitutes every placeholder; a missing value is BadConfig.
  ChatRequest render(const std::string& role, const std::map<std::string, std::string>& values) const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace arena
