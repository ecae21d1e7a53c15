#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "arena/canonical_json.hpp"
#include "arena/decimal.hpp"
#include "arena/market_data.hpp"
#include "arena/protocol.hpp"

namespace arena {

enum class ExecutionPolicy { Close, NextOpen };

std::string_view to_string(ExecutionPolicy policy);
ExecutionPolicy execution_policy_from(std::string_view text);

struct FundConfig {
  Decimal max_position_weight = Decimal::parse("0.2");
  std::int64_t fee_bps = 0;
  ExecutionPolicy execution_policy = ExecutionPolicy::Close;
  int memory_window = 10;
  bool allow_short = false;

  void validate() const;
};

struct Position {
  Ticker ticker;
  std::int64_t quantity = 0;
  Decimal avg_cost;
};

struct MemoryEntry {
  Date trading_date;
  std::map<Ticker, std::string> actions;
  std::string fill_summary;
  Decimal nav;
  std::string rationale;
};

struct TradingMemory {
  std::deque<MemoryEntry> entries;
};

/// A decision awaiting the next session's open (NEXT_OPEN policy).
struct PendingOrder {
  Date decided_on;
  ManagerDecision decision;
};

struct Fund {
  std::string fund_id;
  std::string name;
  std::string model_spec_id;
  std::set<Ticker> stock_pool;
  Decimal cash;
  std::map<Ticker, Position> positions;
  AsOf inception;
  FundConfig config;
  TradingMemory memory;
  /// Last price seen per held ticker; values the rest of the book when
  /// sizing an order against the weight cap.
  std::map<Ticker, Decimal> marks;
  std::vector<PendingOrder> pending;
};

struct TradeFill {
  Ticker ticker;
  TradeAction action = TradeAction::Buy;
  std::int64_t quantity = 0;
  Decimal price;
  Decimal fee;
  AsOf executed_at;
};

struct SkippedDecision {
  Ticker ticker;
  TradeAction action = TradeAction::Hold;
  std::int64_t requested = 0;
  std::string reason;
};

struct NavSnapshot {
  AsOf as_of;
  Decimal cash;
  Decimal holdings_value;
  Decimal nav;
};

struct ExecutionResult {
  Fund fund;
  std::optional<TradeFill> fill;
  std::optional<SkippedDecision> skipped;
  /// Set when the fill is smaller than requested, naming the binding limit.
  std::optional<std::string> clamp_reason;
};

/// Fee in currency: price * quantity * bps / 10000, rounded half-even.
Decimal trade_fee(Decimal price, std::int64_t quantity, std::int64_t fee_bps);

/// Cash + holdings, valuing `ticker` at `price` and other holdings at their
/// last mark (average cost if never marked).
Decimal reference_nav(const Fund& fund, const Ticker& ticker, Decimal price);

/// BUY/SELL/HOLD against the fund with clamping: BUY is limited by cash
/// (cost + fee) and by max_position_weight; SELL by held shares. A clamp to
/// zero produces a SkippedDecision instead of a fill.
ExecutionResult execute_decision(const Fund& fund, const ManagerDecision& decision, Decimal fill_price,
                                 const AsOf& as_of);

/// Applies an already-sized fill. This is the only place cash and positions
/// change, shared by live execution and log folding.
void apply_fill(Fund& fund, const TradeFill& fill);

NavSnapshot mark_to_market(const Fund& fund, const std::map<Ticker, Decimal>& closes, const AsOf& as_of);
/// Records the closes of held tickers as their latest marks.
void record_marks(Fund& fund, const std::map<Ticker, Decimal>& closes);

Fund append_memory(const Fund& fund, MemoryEntry entry);

Json to_json(const FundConfig& config);
FundConfig fund_config_from_json(const Json& obj);
Json to_json(const Fund& fund);
Fund fund_from_json(const Json& obj);
Json to_json(const TradeFill& fill);
TradeFill fill_from_json(const Json& obj);
Json to_json(const SkippedDecision& skip);
Json to_json(const NavSnapshot& nav);
NavSnapshot nav_from_json(const Json& obj);
Json to_json(const MemoryEntry& entry);
MemoryEntry memory_entry_from_json(const Json& obj);
Json to_json(const AsOf& as_of);
AsOf as_of_from_json(const Json& obj);

}  // namespace arena
