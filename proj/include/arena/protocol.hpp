#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "arena/canonical_json.hpp"
#include "arena/market_data.hpp"

namespace arena {

// Inter-agent protocol: the three payloads that cross agent boundaries and
// the strict-then-repair parser that admits them.

enum class AnalystKind { Technical, Fundamental, Insider, Media };
enum class Stance { Bullish, Bearish, Neutral };
enum class TradeAction { Buy, Sell, Hold };

inline constexpr AnalystKind kAllAnalysts[] = {AnalystKind::Technical, AnalystKind::Fundamental,
                                               AnalystKind::Insider, AnalystKind::Media};

std::string_view to_string(AnalystKind kind);
std::string_view to_string(Stance stance);
std::string_view to_string(TradeAction action);
std::optional<AnalystKind> analyst_kind_from(std::string_view text);
std::optional<Stance> stance_from(std::string_view text);
std::optional<TradeAction> trade_action_from(std::string_view text);

struct PlannerPlan {
  std::map<Ticker, std::set<AnalystKind>> assignments;
  std::string rationale;
};

struct AnalystSignal {
  AnalystKind kind = AnalystKind::Technical;
  Ticker ticker;
  Stance stance = Stance::Neutral;
  double confidence = 0.0;
  std::string rationale;
  std::vector<std::string> key_evidence;
};

struct ManagerDecision {
  Ticker ticker;
  TradeAction action = TradeAction::Hold;
  std::optional<std::int64_t> quantity;
  double confidence = 0.0;
  std::string rationale;
};

enum class SchemaId { Plan, Signal, Decision };

struct ParseFailure {
  std::string reason;
};

/// Parsed payload before the caller binds it to a ticker/kind.
struct SignalPayload {
  Stance stance = Stance::Neutral;
  double confidence = 0.0;
  std::string rationale;
  std::vector<std::string> key_evidence;
};

struct DecisionPayload {
  TradeAction action = TradeAction::Hold;
  std::optional<std::int64_t> quantity;
  double confidence = 0.0;
  std::string rationale;
};

using StructuredPayload = std::variant<PlannerPlan, SignalPayload, DecisionPayload>;

struct ParseOutcome {
  std::variant<StructuredPayload, ParseFailure> result;
  /// Every repair applied, in order ("extracted JSON from prose",
  /// "confidence 1.7 clamped to 1", ...). Empty for a strict parse.
  std::vector<std::string> repairs;

  bool ok() const { return result.index() == 0; }
  const StructuredPayload& payload() const { return std::get<0>(result); }
  const ParseFailure& failure() const { return std::get<1>(result); }
};

/// Strict parse first. On failure, exactly one repair pass: pull the first
/// well-formed JSON object out of surrounding prose, clamp numeric ranges,
/// upper-case enum strings. Never throws.
ParseOutcome parse_structured(std::string_view raw, SchemaId schema);

/// First balanced, parseable JSON object embedded in `text`.
std::optional<Json> extract_first_json_object(std::string_view text);

Json to_json(const PlannerPlan& plan);
Json to_json(const AnalystSignal& signal);
Json to_json(const ManagerDecision& decision);
AnalystSignal signal_from_json(const Json& obj);
ManagerDecision decision_from_json(const Json& obj);
PlannerPlan plan_from_json(const Json& obj);

}  // namespace arena
