#include "arena/prompts.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "arena/error.hpp"

#ifndef ARENA_PROMPTS_DIR
#define ARENA_PROMPTS_DIR "prompts"
#endif

namespace arena {
namespace {

std::string substitute(const std::string& text, const std::map<std::string, std::string>& values,
                       const std::string& template_id) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(text, pos, open - pos);
    const std::string name = text.substr(open + 2, close - open - 2);
    auto it = values.find(name);
    if (it == values.end()) fail(ErrorCode::BadConfig, "template " + template_id + " needs a value for {{" + name + "}}");
    out += it->second;
    pos = close + 2;
  }
  out.append(text, pos);
  return out;
}

void collect(const std::string& text, std::set<std::string>& names) {
  for (auto open = text.find("{{"); open != std::string::npos; open = text.find("{{", open + 2)) {
    const auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    names.insert(text.substr(open + 2, close - open - 2));
  }
}

std::string trim_newlines(std::string s) {
  while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.erase(s.begin());
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

std::vector<std::string> PromptTemplate::placeholders() const {
  std::set<std::string> names;
  collect(system, names);
  collect(user, names);
  return {names.begin(), names.end()};
}

PromptTemplate parse_prompt_template(std::string role, int version, std::string_view text) {
  const std::string body(text);
  const auto sys = body.find("[system]");
  const auto usr = body.find("[user]");
  if (sys == std::string::npos || usr == std::string::npos || usr < sys) {
    fail(ErrorCode::BadConfig, "prompt " + role + ".v" + std::to_string(version) + " needs [system] then [user]");
  }
  PromptTemplate t;
  t.role = std::move(role);
  t.version = version;
  t.system = trim_newlines(body.substr(sys + 8, usr - sys - 8));
  t.user = trim_newlines(body.substr(usr + 6));
  return t;
}

std::filesystem::path PromptLibrary::default_dir() { return ARENA_PROMPTS_DIR; }

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::BadConfig, "prompt directory not found: " + dir.string());
  static const std::regex name_re(R"(^([a-z_]+)\.v([0-9]+)\.txt$)");
  PromptLibrary lib;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, name_re)) continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    auto tmpl = parse_prompt_template(m[1].str(), std::stoi(m[2].str()), ss.str());
    auto it = lib.templates_.find(tmpl.role);
    if (it == lib.templates_.end() || it->second.version < tmpl.version) lib.templates_[tmpl.role] = std::move(tmpl);
  }
  return lib;
}

const PromptTemplate& PromptLibrary::get(const std::string& role) const {
  auto it = templates_.find(role);
  if (it == templates_.end()) fail(ErrorCode::BadConfig, "no prompt template for role " + role);
  return it->second;
}

void PromptLibrary::add(PromptTemplate tmpl) { templates_[tmpl.role] = std::move(tmpl); }

ChatRequest PromptLibrary::render(const std::string& role, const std::map<std::string, std::string>& values) const {
  const PromptTemplate& t = get(role);
  ChatRequest req;
  req.template_id = t.id();
  req.system = substitute(t.system, values, req.template_id);
  req.user = substitute(t.user, values, req.template_id);
  return req;
}

}  // namespace arena
