#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arena/llm_gateway.hpp"

namespace arena {

/// A response rule: the first rule whose non-empty selectors all match the
/// prompt header wins.
struct MockRule {
  std::optional<std::string> role;      // planner | analyst | manager
  std::optional<std::string> kind;      // analyst kind
  std::optional<std::string> ticker;
  std::optional<std::string> date;
  std::optional<std::string> contains;  // substring of the user prompt
  std::string response;
};

/// Deterministic offline model. Reads the `ROLE:`, `ANALYST:`, `TICKER:`,
/// `DATE:` and `STOCK_POOL:` header lines every prompt template carries.
/// Without a matching rule it answers with a heuristic: the planner assigns
/// every analyst to every ticker, analysts derive a stance from a hash of
/// their prompt, and the manager follows the majority stance.
class MockModel {
 public:
  explicit MockModel(std::vector<MockRule> rules = {}) : rules_(std::move(rules)) {}

  static MockModel from_json(const Json& script);
  static MockModel from_file(const std::filesystem::path& path);

  std::string respond(const ChatRequest& request) const;

 private:
  std::vector<MockRule> rules_;
};

/// Value of a `KEY: value` header line in a prompt, if present.
std::optional<std::string> prompt_header(std::string_view prompt, std::string_view key);

}  // namespace arena
