#include "arena/portfolio.hpp"

#include <algorithm>

#include "arena/error.hpp"

namespace arena {
namespace {

using i128 = __int128;

// Largest q in [0, hi] with pred(q) true, assuming pred is monotone
// (true then false).
template <class Pred>
std::int64_t largest_satisfying(std::int64_t hi, Pred pred) {
  std::int64_t lo = 0;
  if (hi <= 0) return 0;
  if (pred(hi)) return hi;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (pred(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

std::string_view to_string(ExecutionPolicy policy) { return policy == ExecutionPolicy::Close ? "CLOSE" : "NEXT_OPEN"; }

ExecutionPolicy execution_policy_from(std::string_view text) {
  if (text == "CLOSE") return ExecutionPolicy::Close;
  if (text == "NEXT_OPEN") return ExecutionPolicy::NextOpen;
  fail(ErrorCode::ValidationFailed, "execution_policy must be CLOSE or NEXT_OPEN");
}

void FundConfig::validate() const {
  if (!max_position_weight.is_positive() || max_position_weight > Decimal::from_int(1)) {
    fail(ErrorCode::ValidationFailed, "max_position_weight must be in (0, 1]");
  }
  if (fee_bps < 0 || fee_bps > 10000) fail(ErrorCode::ValidationFailed, "fee_bps must be in [0, 10000]");
  if (memory_window <= 0) fail(ErrorCode::ValidationFailed, "memory_window must be positive");
  if (allow_short) fail(ErrorCode::ValidationFailed, "short selling is not supported");
}

Decimal trade_fee(Decimal price, std::int64_t quantity, std::int64_t fee_bps) {
  const i128 num = static_cast<i128>(price.micros()) * quantity * fee_bps;
  return Decimal::from_micros(static_cast<std::int64_t>(div_round_half_even(num, 10000)));
}

Decimal reference_nav(const Fund& fund, const Ticker& ticker, Decimal price) {
  Decimal nav = fund.cash;
  for (const auto& [t, pos] : fund.positions) {
    Decimal px = pos.avg_cost;
    if (t == ticker) {
      px = price;
    } else if (auto m = fund.marks.find(t); m != fund.marks.end()) {
      px = m->second;
    }
    nav += px.times(pos.quantity);
  }
  return nav;
}

ExecutionResult execute_decision(const Fund& fund, const ManagerDecision& decision, Decimal fill_price,
                                 const AsOf& as_of) {
  if (!fill_price.is_positive()) fail(ErrorCode::InvalidPrice, "fill price must be positive");
  if (!fund.stock_pool.contains(decision.ticker)) {
    fail(ErrorCode::TickerOutsidePool, decision.ticker.str() + " is not in the stock pool of " + fund.fund_id);
  }

  ExecutionResult out{fund, std::nullopt, std::nullopt, std::nullopt};
  if (decision.action == TradeAction::Hold) return out;

  const std::int64_t requested = decision.quantity.value_or(0);
  auto skip = [&](std::string reason) {
    out.skipped = SkippedDecision{decision.ticker, decision.action, requested, std::move(reason)};
    return out;
  };
  if (requested <= 0) return skip("zero quantity requested");

  const auto held_it = fund.positions.find(decision.ticker);
  const std::int64_t held = held_it == fund.positions.end() ? 0 : held_it->second.quantity;
  const std::int64_t bps = fund.config.fee_bps;

  std::int64_t quantity = requested;
  if (decision.action == TradeAction::Buy) {
    const i128 p = fill_price.micros();
    const i128 cash = fund.cash.micros();
    auto affordable = [&](std::int64_t q) {
      return static_cast<i128>(q) * p + trade_fee(fill_price, q, bps).micros() <= cash;
    };
    const std::int64_t cash_hi = cash <= 0 ? 0 : static_cast<std::int64_t>(std::min<i128>(cash / p, requested));
    const std::int64_t by_cash = largest_satisfying(cash_hi, affordable);

    const Decimal nav = reference_nav(fund, decision.ticker, fill_price);
    const i128 weight = fund.config.max_position_weight.micros();
    // (held + q) * price <= weight * (nav - fee(q)), all in micro-units.
    auto within_weight = [&](std::int64_t q) {
      const i128 lhs = (static_cast<i128>(held) + q) * p * Decimal::kScale;
      const i128 rhs = weight * (static_cast<i128>(nav.micros()) - trade_fee(fill_price, q, bps).micros());
      return lhs <= rhs;
    };
    std::int64_t weight_hi = 0;
    if (nav.is_positive()) {
      const i128 max_total = weight * nav.micros() / (p * Decimal::kScale);
      weight_hi = static_cast<std::int64_t>(std::clamp<i128>(max_total - held, 0, requested));
    }
    const std::int64_t by_weight = largest_satisfying(weight_hi, within_weight);

    quantity = std::min({requested, by_cash, by_weight});
    if (quantity == 0) return skip(by_cash == 0 ? "insufficient cash" : "position weight cap reached");
    if (quantity < requested) {
      out.clamp_reason = quantity == by_cash && by_cash < by_weight ? "clamped by cash" : "clamped by weight cap";
    }
  } else {
    if (held == 0) return skip("no position to sell");
    if (requested > held) {
      quantity = held;
      out.clamp_reason = "clamped to held shares";
    }
  }

  TradeFill fill{decision.ticker, decision.action, quantity, fill_price, trade_fee(fill_price, quantity, bps), as_of};
  apply_fill(out.fund, fill);
  out.fill = fill;
  return out;
}

void apply_fill(Fund& fund, const TradeFill& fill) {
  if (fill.quantity <= 0) fail(ErrorCode::ValidationFailed, "fill quantity must be positive");
  const Decimal notional = fill.price.times(fill.quantity);
  if (fill.action == TradeAction::Buy) {
    const Decimal cost = notional + fill.fee;
    if (cost > fund.cash) fail(ErrorCode::Internal, "fill would overdraw cash");
    fund.cash -= cost;
    auto [it, inserted] = fund.positions.try_emplace(fill.ticker, Position{fill.ticker, 0, Decimal{}});
    Position& pos = it->second;
    const i128 total_cost = static_cast<i128>(pos.avg_cost.micros()) * pos.quantity +
                            static_cast<i128>(fill.price.micros()) * fill.quantity;
    pos.quantity += fill.quantity;
    pos.avg_cost = Decimal::from_micros(static_cast<std::int64_t>(div_round_half_even(total_cost, pos.quantity)));
  } else if (fill.action == TradeAction::Sell) {
    auto it = fund.positions.find(fill.ticker);
    if (it == fund.positions.end() || it->second.quantity < fill.quantity) {
      fail(ErrorCode::Internal, "fill would sell more than held");
    }
    fund.cash += notional - fill.fee;
    it->second.quantity -= fill.quantity;
    if (it->second.quantity == 0) fund.positions.erase(it);
  } else {
    fail(ErrorCode::ValidationFailed, "HOLD cannot be filled");
  }
  fund.marks[fill.ticker] = fill.price;
  if (!fund.positions.contains(fill.ticker)) fund.marks.erase(fill.ticker);
}

NavSnapshot mark_to_market(const Fund& fund, const std::map<Ticker, Decimal>& closes, const AsOf& as_of) {
  Decimal holdings;
  for (const auto& [ticker, pos] : fund.positions) {
    auto it = closes.find(ticker);
    if (it == closes.end()) fail(ErrorCode::MissingPrice, "no close for held ticker " + ticker.str());
    holdings += it->second.times(pos.quantity);
  }
  return {as_of, fund.cash, holdings, fund.cash + holdings};
}

void record_marks(Fund& fund, const std::map<Ticker, Decimal>& closes) {
  for (const auto& [ticker, pos] : fund.positions) {
    if (auto it = closes.find(ticker); it != closes.end()) fund.marks[ticker] = it->second;
  }
}

Fund append_memory(const Fund& fund, MemoryEntry entry) {
  const auto& entries = fund.memory.entries;
  if (!entries.empty() && entry.trading_date <= entries.back().trading_date) {
    fail(ErrorCode::OutOfOrder, "memory entry " + format_date(entry.trading_date) + " is not after " +
                                    format_date(entries.back().trading_date));
  }
  Fund out = fund;
  out.memory.entries.push_back(std::move(entry));
  while (static_cast<int>(out.memory.entries.size()) > fund.config.memory_window) out.memory.entries.pop_front();
  return out;
}

// ---- serialization -----------------------------------------------------

Json to_json(const AsOf& as_of) {
  return Json{{"instant", format_instant(as_of.instant)}, {"trading_date", format_date(as_of.trading_date)}};
}

AsOf as_of_from_json(const Json& obj) { return {require_instant(obj, "instant"), require_date(obj, "trading_date")}; }

Json to_json(const FundConfig& c) {
  return Json{{"max_position_weight", to_json(c.max_position_weight)},
              {"fee_bps", c.fee_bps},
              {"execution_policy", std::string(to_string(c.execution_policy))},
              {"memory_window", c.memory_window},
              {"allow_short", c.allow_short}};
}

FundConfig fund_config_from_json(const Json& obj) {
  FundConfig c;
  if (obj.is_null()) return c;
  if (!obj.is_object()) fail(ErrorCode::ValidationFailed, "config must be an object");
  if (obj.contains("max_position_weight")) c.max_position_weight = require_decimal(obj, "max_position_weight");
  if (obj.contains("fee_bps")) c.fee_bps = require_int(obj, "fee_bps");
  if (obj.contains("execution_policy")) c.execution_policy = execution_policy_from(require_string(obj, "execution_policy"));
  if (obj.contains("memory_window")) c.memory_window = static_cast<int>(require_int(obj, "memory_window"));
  if (obj.contains("allow_short")) {
    if (!obj["allow_short"].is_boolean()) fail(ErrorCode::ValidationFailed, "allow_short must be boolean");
    c.allow_short = obj["allow_short"].get<bool>();
  }
  c.validate();
  return c;
}

Json to_json(const MemoryEntry& e) {
  Json actions = Json::object();
  for (const auto& [t, a] : e.actions) actions[t.str()] = a;
  return Json{{"trading_date", format_date(e.trading_date)},
              {"actions", actions},
              {"fill_summary", e.fill_summary},
              {"nav", to_json(e.nav)},
              {"rationale", e.rationale}};
}

MemoryEntry memory_entry_from_json(const Json& obj) {
  MemoryEntry e;
  e.trading_date = require_date(obj, "trading_date");
  for (const auto& [t, a] : require(obj, "actions").items()) e.actions[Ticker(t)] = a.get<std::string>();
  e.fill_summary = obj.value("fill_summary", "");
  e.nav = require_decimal(obj, "nav");
  e.rationale = obj.value("rationale", "");
  return e;
}

Json to_json(const Fund& f) {
  Json pool = Json::array();
  for (const auto& t : f.stock_pool) pool.push_back(t.str());
  Json positions = Json::object();
  for (const auto& [t, p] : f.positions) {
    positions[t.str()] = Json{{"quantity", p.quantity}, {"avg_cost", to_json(p.avg_cost)}};
  }
  Json memory = Json::array();
  for (const auto& e : f.memory.entries) memory.push_back(to_json(e));
  Json marks = Json::object();
  for (const auto& [t, m] : f.marks) marks[t.str()] = to_json(m);
  Json pending = Json::array();
  for (const auto& p : f.pending) {
    pending.push_back(Json{{"decided_on", format_date(p.decided_on)}, {"decision", to_json(p.decision)}});
  }
  return Json{{"fund_id", f.fund_id},   {"name", f.name},          {"model_spec_id", f.model_spec_id},
              {"stock_pool", pool},     {"cash", to_json(f.cash)}, {"positions", positions},
              {"inception", to_json(f.inception)}, {"config", to_json(f.config)}, {"memory", memory},
              {"marks", marks},         {"pending", pending}};
}

Fund fund_from_json(const Json& obj) {
  Fund f;
  f.fund_id = require_string(obj, "fund_id");
  f.name = require_string(obj, "name");
  f.model_spec_id = require_string(obj, "model_spec_id");
  for (const auto& t : require(obj, "stock_pool")) f.stock_pool.insert(Ticker(t.get<std::string>()));
  f.cash = require_decimal(obj, "cash");
  if (auto it = obj.find("positions"); it != obj.end()) {
    for (const auto& [t, p] : it->items()) {
      f.positions[Ticker(t)] = Position{Ticker(t), require_int(p, "quantity"), require_decimal(p, "avg_cost")};
    }
  }
  f.inception = as_of_from_json(require(obj, "inception"));
  f.config = fund_config_from_json(obj.value("config", Json::object()));
  if (auto it = obj.find("memory"); it != obj.end()) {
    for (const auto& e : *it) f.memory.entries.push_back(memory_entry_from_json(e));
  }
  if (auto it = obj.find("marks"); it != obj.end()) {
    for (const auto& [t, m] : it->items()) f.marks[Ticker(t)] = decimal_from_json(m, "marks");
  }
  if (auto it = obj.find("pending"); it != obj.end()) {
    for (const auto& p : *it) {
      f.pending.push_back({require_date(p, "decided_on"), decision_from_json(require(p, "decision"))});
    }
  }
  return f;
}

Json to_json(const TradeFill& f) {
  return Json{{"ticker", f.ticker.str()},
              {"action", std::string(to_string(f.action))},
              {"quantity", f.quantity},
              {"price", to_json(f.price)},
              {"fee", to_json(f.fee)},
              {"executed_at", to_json(f.executed_at)}};
}

TradeFill fill_from_json(const Json& obj) {
  TradeFill f;
  f.ticker = Ticker(require_string(obj, "ticker"));
  auto action = trade_action_from(require_string(obj, "action"));
  if (!action || *action == TradeAction::Hold) fail(ErrorCode::ValidationFailed, "fill action must be BUY or SELL");
  f.action = *action;
  f.quantity = require_int(obj, "quantity");
  f.price = require_decimal(obj, "price");
  f.fee = require_decimal(obj, "fee");
  f.executed_at = as_of_from_json(require(obj, "executed_at"));
  return f;
}

Json to_json(const SkippedDecision& s) {
  return Json{{"ticker", s.ticker.str()},
              {"action", std::string(to_string(s.action))},
              {"requested", s.requested},
              {"reason", s.reason}};
}

Json to_json(const NavSnapshot& n) {
  return Json{{"as_of", to_json(n.as_of)},
              {"cash", to_json(n.cash)},
              {"holdings_value", to_json(n.holdings_value)},
              {"nav", to_json(n.nav)}};
}

NavSnapshot nav_from_json(const Json& obj) {
  return {as_of_from_json(require(obj, "as_of")), require_decimal(obj, "cash"), require_decimal(obj, "holdings_value"),
          require_decimal(obj, "nav")};
}

}  // namespace arena
