#include "arena/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "arena/error.hpp"

namespace arena {
namespace {

std::string upper_trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Thrown inside this file only; converted to ParseFailure at the boundary.
struct Reject {
  std::string reason;
};

const Json* find(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

// ---- strict validation -------------------------------------------------

double strict_confidence(const Json& obj) {
  const Json* c = find(obj, "confidence");
  if (c == nullptr || !c->is_number()) throw Reject{"confidence must be a number"};
  const double v = c->get<double>();
  if (!(v >= 0.0 && v <= 1.0)) throw Reject{"confidence out of [0,1]"};
  return v;
}

std::string strict_string(const Json& obj, const char* key) {
  const Json* v = find(obj, key);
  if (v == nullptr || !v->is_string()) throw Reject{std::string(key) + " must be a string"};
  return v->get<std::string>();
}

StructuredPayload strict_parse(const Json& obj, SchemaId schema) {
  if (!obj.is_object()) throw Reject{"payload is not a JSON object"};
  switch (schema) {
    case SchemaId::Plan: {
      PlannerPlan plan;
      const Json* a = find(obj, "assignments");
      if (a == nullptr || !a->is_object()) throw Reject{"assignments must be an object"};
      for (const auto& [key, kinds] : a->items()) {
        if (!Ticker::is_valid(key)) throw Reject{"invalid ticker " + key};
        if (!kinds.is_array() || kinds.empty()) throw Reject{"analyst list for " + key + " must be non-empty"};
        auto& set = plan.assignments[Ticker(key)];
        for (const auto& k : kinds) {
          if (!k.is_string()) throw Reject{"analyst kind must be a string"};
          auto kind = analyst_kind_from(k.get<std::string>());
          if (!kind) throw Reject{"unknown analyst kind " + k.get<std::string>()};
          set.insert(*kind);
        }
      }
      plan.rationale = strict_string(obj, "rationale");
      return plan;
    }
    case SchemaId::Signal: {
      SignalPayload s;
      auto stance = stance_from(strict_string(obj, "stance"));
      if (!stance) throw Reject{"invalid stance"};
      s.stance = *stance;
      s.confidence = strict_confidence(obj);
      s.rationale = strict_string(obj, "rationale");
      const Json* ev = find(obj, "key_evidence");
      if (ev == nullptr || !ev->is_array()) throw Reject{"key_evidence must be an array"};
      for (const auto& e : *ev) {
        if (!e.is_string()) throw Reject{"key_evidence entries must be strings"};
        s.key_evidence.push_back(e.get<std::string>());
      }
      return s;
    }
    case SchemaId::Decision: {
      DecisionPayload d;
      auto action = trade_action_from(strict_string(obj, "action"));
      if (!action) throw Reject{"invalid action"};
      d.action = *action;
      const Json* q = find(obj, "quantity");
      if (q == nullptr) throw Reject{"quantity missing"};
      if (!q->is_null()) {
        if (!q->is_number_integer() || q->get<std::int64_t>() < 0) throw Reject{"quantity must be a non-negative int"};
        d.quantity = q->get<std::int64_t>();
      }
      d.confidence = strict_confidence(obj);
      d.rationale = strict_string(obj, "rationale");
      return d;
    }
  }
  throw Reject{"unknown schema"};
}

// ---- repair pass -------------------------------------------------------

double repair_confidence(const Json& obj, std::vector<std::string>& repairs) {
  const Json* c = find(obj, "confidence");
  if (c == nullptr || c->is_null()) {
    repairs.push_back("confidence missing, set to 0");
    return 0.0;
  }
  double v = 0.0;
  if (c->is_number()) {
    v = c->get<double>();
  } else if (c->is_string()) {
    try {
      std::size_t used = 0;
      v = std::stod(c->get<std::string>(), &used);
      repairs.push_back("confidence given as string");
    } catch (...) {
      throw Reject{"confidence is not numeric"};
    }
  } else {
    throw Reject{"confidence is not numeric"};
  }
  if (!std::isfinite(v)) throw Reject{"confidence is not finite"};
  if (v < 0.0 || v > 1.0) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    repairs.push_back("confidence " + format_number(v) + " clamped to " + format_number(clamped));
    v = clamped;
  }
  return v;
}

std::string repair_string(const Json& obj, const char* key, std::vector<std::string>& repairs) {
  const Json* v = find(obj, key);
  if (v == nullptr || v->is_null()) {
    repairs.push_back(std::string(key) + " missing, set to empty");
    return {};
  }
  if (v->is_string()) return v->get<std::string>();
  repairs.push_back(std::string(key) + " coerced to string");
  return v->dump();
}

template <class Enum, class Parse>
Enum repair_enum(const Json& obj, const char* key, Parse parse, std::vector<std::string>& repairs) {
  const Json* v = find(obj, key);
  if (v == nullptr || !v->is_string()) throw Reject{std::string(key) + " missing"};
  const std::string raw = v->get<std::string>();
  const std::string norm = upper_trim(raw);
  auto parsed = parse(norm);
  if (!parsed) throw Reject{"invalid " + std::string(key) + " '" + raw + "'"};
  if (norm != raw) repairs.push_back(std::string(key) + " '" + raw + "' normalized to " + norm);
  return *parsed;
}

StructuredPayload repair_parse(const Json& obj, SchemaId schema, std::vector<std::string>& repairs) {
  switch (schema) {
    case SchemaId::Plan: {
      PlannerPlan plan;
      const Json* a = find(obj, "assignments");
      const Json* source = a;
      if (a == nullptr || !a->is_object()) {
        // A bare {"AAPL": [...]} map is accepted as the assignment table.
        source = &obj;
        repairs.push_back("bare assignment map treated as assignments");
      }
      for (const auto& [raw_key, kinds] : source->items()) {
        if (source == &obj && raw_key == "rationale") continue;
        const std::string key = upper_trim(raw_key);
        if (!Ticker::is_valid(key)) {
          repairs.push_back("dropped invalid ticker '" + raw_key + "'");
          continue;
        }
        std::set<AnalystKind> set;
        const Json list = kinds.is_array() ? kinds : Json::array({kinds});
        for (const auto& k : list) {
          std::optional<AnalystKind> kind;
          if (k.is_string()) kind = analyst_kind_from(upper_trim(k.get<std::string>()));
          if (!kind) {
            repairs.push_back("dropped unknown analyst kind for " + key);
            continue;
          }
          set.insert(*kind);
        }
        if (set.empty()) {
          repairs.push_back("dropped " + key + " with no valid analysts");
          continue;
        }
        plan.assignments[Ticker(key)].insert(set.begin(), set.end());
      }
      plan.rationale = repair_string(obj, "rationale", repairs);
      return plan;
    }
    case SchemaId::Signal: {
      SignalPayload s;
      s.stance = repair_enum<Stance>(obj, "stance", stance_from, repairs);
      s.confidence = repair_confidence(obj, repairs);
      s.rationale = repair_string(obj, "rationale", repairs);
      const Json* ev = find(obj, "key_evidence");
      if (ev == nullptr || ev->is_null()) {
        repairs.push_back("key_evidence missing, set to empty");
      } else if (ev->is_string()) {
        repairs.push_back("key_evidence string wrapped in list");
        s.key_evidence.push_back(ev->get<std::string>());
      } else if (ev->is_array()) {
        for (const auto& e : *ev) s.key_evidence.push_back(e.is_string() ? e.get<std::string>() : e.dump());
      } else {
        repairs.push_back("key_evidence of wrong type dropped");
      }
      return s;
    }
    case SchemaId::Decision: {
      DecisionPayload d;
      d.action = repair_enum<TradeAction>(obj, "action", trade_action_from, repairs);
      const Json* q = find(obj, "quantity");
      if (q != nullptr && !q->is_null()) {
        double v = 0.0;
        bool numeric = true;
        if (q->is_number()) {
          v = q->get<double>();
        } else if (q->is_string()) {
          try {
            v = std::stod(q->get<std::string>());
          } catch (...) {
            numeric = false;
          }
        } else {
          numeric = false;
        }
        if (!numeric || !std::isfinite(v)) {
          repairs.push_back("non-numeric quantity dropped");
        } else {
          if (v < 0) {
            repairs.push_back("negative quantity clamped to 0");
            v = 0;
          }
          if (v > 1e12) {
            repairs.push_back("quantity clamped to 1e12");
            v = 1e12;
          }
          if (!q->is_number_integer()) repairs.push_back("quantity rounded down to an integer");
          d.quantity = static_cast<std::int64_t>(std::floor(v));
        }
      }
      d.confidence = repair_confidence(obj, repairs);
      d.rationale = repair_string(obj, "rationale", repairs);
      return d;
    }
  }
  throw Reject{"unknown schema"};
}

}  // namespace

std::string_view to_string(AnalystKind kind) {
  switch (kind) {
    case AnalystKind::Technical: return "TECHNICAL";
    case AnalystKind::Fundamental: return "FUNDAMENTAL";
    case AnalystKind::Insider: return "INSIDER";
    case AnalystKind::Media: return "MEDIA";
  }
  return "TECHNICAL";
}

std::string_view to_string(Stance stance) {
  switch (stance) {
    case Stance::Bullish: return "BULLISH";
    case Stance::Bearish: return "BEARISH";
    case Stance::Neutral: return "NEUTRAL";
  }
  return "NEUTRAL";
}

std::string_view to_string(TradeAction action) {
  switch (action) {
    case TradeAction::Buy: return "BUY";
    case TradeAction::Sell: return "SELL";
    case TradeAction::Hold: return "HOLD";
  }
  return "HOLD";
}

std::optional<AnalystKind> analyst_kind_from(std::string_view text) {
  for (auto k : kAllAnalysts)
    if (to_string(k) == text) return k;
  return std::nullopt;
}

std::optional<Stance> stance_from(std::string_view text) {
  for (auto s : {Stance::Bullish, Stance::Bearish, Stance::Neutral})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

std::optional<TradeAction> trade_action_from(std::string_view text) {
  for (auto a : {TradeAction::Buy, TradeAction::Sell, TradeAction::Hold})
    if (to_string(a) == text) return a;
  return std::nullopt;
}

std::optional<Json> extract_first_json_object(std::string_view text) {
  // Each candidate scans to its matching brace, so bound the candidates to
  // keep adversarial replies ("{{{{...") linear in practice.
  constexpr int kMaxCandidates = 64;
  int candidates = 0;
  for (std::size_t start = text.find('{'); start != std::string_view::npos && candidates++ < kMaxCandidates;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        Json parsed = Json::parse(text.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

ParseOutcome parse_structured(std::string_view raw, SchemaId schema) {
  ParseOutcome out{ParseFailure{"unparsed"}, {}};
  std::string strict_reason;
  try {
    Json whole = Json::parse(raw, nullptr, false);
    if (whole.is_discarded()) {
      strict_reason = "not valid JSON";
    } else {
      try {
        out.result = strict_parse(whole, schema);
        return out;
      } catch (const Reject& r) {
        strict_reason = r.reason;
      }
    }

    out.repairs.push_back("strict parse failed: " + strict_reason);
    std::optional<Json> obj;
    if (!whole.is_discarded() && whole.is_object()) {
      obj = std::move(whole);
    } else {
      obj = extract_first_json_object(raw);
      if (!obj) {
        out.result = ParseFailure{"no JSON object"};
        return out;
      }
      out.repairs.push_back("extracted JSON object from surrounding text");
    }
    out.result = repair_parse(*obj, schema, out.repairs);
  } catch (const Reject& r) {
    out.result = ParseFailure{r.reason};
  } catch (const std::exception& e) {
    out.result = ParseFailure{std::string("unexpected: ") + e.what()};
  }
  return out;
}

Json to_json(const PlannerPlan& plan) {
  Json assignments = Json::object();
  for (const auto& [ticker, kinds] : plan.assignments) {
    Json list = Json::array();
    for (auto k : kinds) list.push_back(std::string(to_string(k)));
    assignments[ticker.str()] = list;
  }
  return Json{{"assignments", assignments}, {"rationale", plan.rationale}};
}

Json to_json(const AnalystSignal& s) {
  return Json{{"kind", std::string(to_string(s.kind))},
              {"ticker", s.ticker.str()},
              {"stance", std::string(to_string(s.stance))},
              {"confidence", s.confidence},
              {"rationale", s.rationale},
              {"key_evidence", s.key_evidence}};
}

Json to_json(const ManagerDecision& d) {
  return Json{{"ticker", d.ticker.str()},
              {"action", std::string(to_string(d.action))},
              {"quantity", d.quantity ? Json(*d.quantity) : Json(nullptr)},
              {"confidence", d.confidence},
              {"rationale", d.rationale}};
}

AnalystSignal signal_from_json(const Json& obj) {
  AnalystSignal s;
  auto kind = analyst_kind_from(require_string(obj, "kind"));
  auto stance = stance_from(require_string(obj, "stance"));
  if (!kind || !stance) fail(ErrorCode::ValidationFailed, "bad signal enum");
  s.kind = *kind;
  s.stance = *stance;
  s.ticker = Ticker(require_string(obj, "ticker"));
  s.confidence = require(obj, "confidence").get<double>();
  s.rationale = obj.value("rationale", "");
  s.key_evidence = obj.value("key_evidence", std::vector<std::string>{});
  return s;
}

ManagerDecision decision_from_json(const Json& obj) {
  ManagerDecision d;
  d.ticker = Ticker(require_string(obj, "ticker"));
  auto action = trade_action_from(require_string(obj, "action"));
  if (!action) fail(ErrorCode::ValidationFailed, "bad decision action");
  d.action = *action;
  if (auto q = obj.find("quantity"); q != obj.end() && !q->is_null()) d.quantity = q->get<std::int64_t>();
  d.confidence = obj.value("confidence", 0.0);
  d.rationale = obj.value("rationale", "");
  return d;
}

PlannerPlan plan_from_json(const Json& obj) {
  auto parsed = parse_structured(obj.dump(), SchemaId::Plan);
  if (!parsed.ok()) fail(ErrorCode::ValidationFailed, "bad plan: " + parsed.failure().reason);
  return std::get<PlannerPlan>(parsed.payload());
}

}  // namespace arena
