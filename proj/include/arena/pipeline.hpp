#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "arena/indicators.hpp"
#include "arena/llm_gateway.hpp"
#include "arena/market_data.hpp"
#include "arena/portfolio.hpp"
#include "arena/prompts.hpp"
#include "arena/protocol.hpp"

namespace arena {

struct ContextWindows {
  int price_lookback = 60;
  int news_window_days = 7;
  int insider_window_days = 90;
};

/// Everything one ticker's analysts may see, already gated at `as_of`.
struct TickerContext {
  Ticker ticker;
  std::vector<PriceBar> bars;
  IndicatorSet indicators;
  std::optional<FundamentalSnapshot> fundamentals;
  std::vector<InsiderTransaction> insiders;
  std::vector<NewsItem> news;
  /// Close of the as-of trading date, when that bar exists.
  std::optional<Decimal> close;
  std::optional<Decimal> open;
};

struct CycleContext {
  AsOf as_of;
  std::map<Ticker, TickerContext> tickers;

  /// Flattened facts, for leakage audits.
  std::vector<Fact> all_facts() const;
};

CycleContext gather_context(const MarketDataStore& store, const std::set<Ticker>& pool, const AsOf& as_of,
                            const ContextWindows& windows = {});

/// How one agent call went, as recorded in the event log.
struct AgentCall {
  std::string template_id;
  std::string request_hash;
  std::vector<std::string> repairs;
  /// Set when the reply was unusable and a fallback was substituted.
  std::optional<std::string> fallback;
};

Json to_json(const AgentCall& call);

struct PlanningContext {
  Date date;
  std::set<Ticker> stock_pool;
  std::map<Ticker, Position> positions;
  TradingMemory memory;
  Decimal nav;
  std::optional<double> last_return;
};

struct ManagerContext {
  Date date;
  std::optional<Position> position;
  Decimal cash;
  Decimal nav;
  Decimal close;
  Decimal max_position_weight;
  TradingMemory memory;
};

struct PlanResult {
  PlannerPlan plan;
  AgentCall call;
};

struct SignalResult {
  AnalystSignal signal;
  AgentCall call;
};

struct DecisionResult {
  ManagerDecision decision;
  AgentCall call;
  /// True when the quantity came from confidence-scaled sizing.
  bool fallback_sized = false;
};

/// Confidence-scaled sizing for decisions without a quantity. BUY:
/// floor(confidence * max_weight * nav / close). SELL: floor(confidence *
/// held). Confidence is taken at six decimal digits.
std::int64_t fallback_quantity(TradeAction action, double confidence, Decimal max_weight, Decimal nav, Decimal close,
                               std::int64_t held);

/// Planner -> analysts -> manager. Holds no state between calls; every
/// output is a function of the gated context and the model's replies.
class AgentPipeline {
 public:
  AgentPipeline(const PromptLibrary& prompts, ChatClient& client) : prompts_(prompts), client_(client) {}

  PlanResult plan(const PlanningContext& context);
  SignalResult run_analyst(AnalystKind kind, const TickerContext& context, Date date);
  /// Runs every assignment of `plan` concurrently; results come back in
  /// (ticker, kind) order.
  std::vector<SignalResult> run_analysts(const PlannerPlan& plan, const CycleContext& context);
  DecisionResult manage(const Ticker& ticker, std::span<const AnalystSignal> signals, const ManagerContext& context);

  /// The request `run_analyst` would send, for inspection.
  ChatRequest analyst_request(AnalystKind kind, const TickerContext& context, Date date) const;

 private:
  const PromptLibrary& prompts_;
  ChatClient& client_;
};

struct TickerReport {
  Ticker ticker;
  std::set<AnalystKind> assigned;
  std::vector<AnalystSignal> signals;
  std::optional<ManagerDecision> decision;
  std::optional<TradeFill> fill;
  std::optional<SkippedDecision> skipped;
};

struct DecisionReport {
  Date trading_date;
  std::string plan_rationale;
  bool no_action_day = false;
  std::vector<TickerReport> tickers;
};

/// Lossless assembly of one cycle's outputs; every signal lands in exactly
/// one ticker section.
DecisionReport render_report(Date trading_date, const PlannerPlan& plan, std::span<const AnalystSignal> signals,
                             std::span<const ManagerDecision> decisions, std::span<const TradeFill> fills,
                             std::span<const SkippedDecision> skips);

Json to_json(const DecisionReport& report);

}  // namespace arena
