#include "arena/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>

#include "arena/error.hpp"

namespace arena {
namespace {

constexpr std::size_t kBarsInPrompt = 20;

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt_fixed(const std::optional<double>& v) { return v ? fixed(*v) : "n/a"; }

std::string render_memory(const TradingMemory& memory) {
  if (memory.entries.empty()) return "(no previous cycles)";
  std::ostringstream os;
  for (const auto& e : memory.entries) {
    os << format_date(e.trading_date) << ":";
    for (const auto& [t, a] : e.actions) os << " " << t.str() << "=" << a;
    os << "; fills: " << (e.fill_summary.empty() ? "none" : e.fill_summary) << "; nav " << e.nav.to_string();
    if (!e.rationale.empty()) os << "; " << e.rationale;
    os << "\n";
  }
  std::string s = os.str();
  s.pop_back();
  return s;
}

std::string render_position(const std::optional<Position>& p) {
  if (!p) return "none";
  return std::to_string(p->quantity) + " shares at average cost " + p->avg_cost.to_string();
}

std::string render_bars(const std::vector<PriceBar>& bars) {
  if (bars.empty()) return "no price history available";
  std::ostringstream os;
  const std::size_t start = bars.size() > kBarsInPrompt ? bars.size() - kBarsInPrompt : 0;
  for (std::size_t i = start; i < bars.size(); ++i) {
    const auto& b = bars[i];
    os << format_date(b.date) << ", " << b.open.to_string() << ", " << b.high.to_string() << ", "
       << b.low.to_string() << ", " << b.close.to_string() << ", " << b.volume;
    if (i + 1 < bars.size()) os << "\n";
  }
  return os.str();
}

std::string render_indicators(const IndicatorSet& s) {
  std::ostringstream os;
  os << "sma_20 " << opt_fixed(s.sma_20) << "\nema_12 " << opt_fixed(s.ema_12) << "\nema_26 " << opt_fixed(s.ema_26)
     << "\nmacd " << opt_fixed(s.macd) << "\nmacd_signal " << opt_fixed(s.macd_signal) << "\nrsi_14 "
     << opt_fixed(s.rsi_14) << "\nreturn_5d " << opt_fixed(s.return_5d) << "\nreturn_20d " << opt_fixed(s.return_20d)
     << "\nvolatility_20d " << opt_fixed(s.volatility_20d);
  return os.str();
}

std::string render_fundamentals(const std::optional<FundamentalSnapshot>& f) {
  if (!f) return "no filings available";
  std::ostringstream os;
  os << "report period " << format_date(f->report_period) << ", filed " << format_instant(f->filed_at);
  for (const auto& [k, v] : f->figures) os << "\n" << k << " " << v.to_string();
  return os.str();
}

std::string render_insiders(const std::vector<InsiderTransaction>& txs) {
  if (txs.empty()) return "no insider transactions available";
  std::ostringstream os;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    const auto& t = txs[i];
    os << format_instant(t.filed_at) << ", " << t.insider_role << ", "
       << (t.direction == TradeDirection::Buy ? "BUY" : "SELL") << ", " << t.shares << ", " << t.price.to_string();
    if (i + 1 < txs.size()) os << "\n";
  }
  return os.str();
}

std::string render_news(const std::vector<NewsItem>& news) {
  if (news.empty()) return "no news available";
  std::ostringstream os;
  for (std::size_t i = 0; i < news.size(); ++i) {
    const auto& n = news[i];
    os << "[" << format_instant(n.published_at) << "] (" << n.source << ") " << n.headline;
    if (!n.body.empty()) os << "\n  " << n.body;
    if (i + 1 < news.size()) os << "\n";
  }
  return os.str();
}

std::string analyst_role(AnalystKind kind) {
  switch (kind) {
    case AnalystKind::Technical: return "analyst_technical";
    case AnalystKind::Fundamental: return "analyst_fundamental";
    case AnalystKind::Insider: return "analyst_insider";
    case AnalystKind::Media: return "analyst_media";
  }
  return "analyst_technical";
}

AgentCall call_info(const ChatExchange& x, std::vector<std::string> repairs) {
  return {x.request.template_id, x.request_hash, std::move(repairs), std::nullopt};
}

}  // namespace

std::vector<Fact> CycleContext::all_facts() const {
  std::vector<Fact> out;
  for (const auto& [t, c] : tickers) {
    for (const auto& b : c.bars) out.emplace_back(b);
    if (c.fundamentals) out.emplace_back(*c.fundamentals);
    for (const auto& x : c.insiders) out.emplace_back(x);
    for (const auto& n : c.news) out.emplace_back(n);
  }
  return out;
}

CycleContext gather_context(const MarketDataStore& store, const std::set<Ticker>& pool, const AsOf& as_of,
                            const ContextWindows& windows) {
  CycleContext ctx{as_of, {}};
  for (const auto& ticker : pool) {
    TickerContext tc;
    tc.ticker = ticker;
    if (store.knows(ticker)) {
      tc.bars = store.get_price_bars(ticker, windows.price_lookback, as_of);
      tc.indicators = compute_indicators(tc.bars);
      tc.fundamentals = store.get_fundamentals(ticker, as_of);
      tc.insiders = store.get_insider_transactions(ticker, windows.insider_window_days, as_of);
      tc.news = store.get_news(ticker, windows.news_window_days, as_of);
      if (!tc.bars.empty() && tc.bars.back().date == as_of.trading_date) {
        tc.close = tc.bars.back().close;
        tc.open = tc.bars.back().open;
      }
    }
    ctx.tickers.emplace(ticker, std::move(tc));
  }
  return ctx;
}

Json to_json(const AgentCall& call) {
  return Json{{"template_id", call.template_id},
              {"request_hash", call.request_hash},
              {"repairs", call.repairs},
              {"fallback", call.fallback ? Json(*call.fallback) : Json(nullptr)}};
}

std::int64_t fallback_quantity(TradeAction action, double confidence, Decimal max_weight, Decimal nav, Decimal close,
                               std::int64_t held) {
  if (!std::isfinite(confidence)) return 0;
  const Decimal conf = Decimal::from_double(std::clamp(confidence, 0.0, 1.0));
  if (action == TradeAction::Buy) {
    if (!close.is_positive() || !nav.is_positive() || max_weight.is_negative()) return 0;
    // Exact: conf * weight * nav / close, floored, with no intermediate rounding.
    const __int128 num = static_cast<__int128>(conf.micros()) * max_weight.micros() * nav.micros();
    const __int128 den = static_cast<__int128>(Decimal::kScale) * Decimal::kScale * close.micros();
    return static_cast<std::int64_t>(num / den);
  }
  if (action == TradeAction::Sell) {
    return static_cast<std::int64_t>(static_cast<__int128>(conf.micros()) * held / Decimal::kScale);
  }
  return 0;
}

PlanResult AgentPipeline::plan(const PlanningContext& context) {
  std::string pool;
  for (const auto& t : context.stock_pool) pool += (pool.empty() ? "" : ", ") + t.str();
  std::string positions;
  for (const auto& [t, p] : context.positions) {
    positions += t.str() + ": " + std::to_string(p.quantity) + " shares at average cost " + p.avg_cost.to_string() + "\n";
  }
  if (positions.empty()) {
    positions = "(no open positions)";
  } else {
    positions.pop_back();
  }

  ChatRequest req = prompts_.render(
      "planner", {{"date", format_date(context.date)},
                  {"stock_pool", pool},
                  {"positions", positions},
                  {"memory", render_memory(context.memory)},
                  {"nav", context.nav.to_string()},
                  {"last_return", context.last_return ? fixed(*context.last_return) : "n/a"}});
  const ChatExchange x = client_.complete(req);
  ParseOutcome parsed = parse_structured(x.response.text, SchemaId::Plan);

  PlanResult out{{}, call_info(x, parsed.repairs)};
  if (parsed.ok()) {
    out.plan = std::get<PlannerPlan>(parsed.payload());
    for (auto it = out.plan.assignments.begin(); it != out.plan.assignments.end();) {
      if (!context.stock_pool.contains(it->first)) {
        out.call.repairs.push_back("dropped " + it->first.str() + " outside the stock pool");
        it = out.plan.assignments.erase(it);
      } else {
        ++it;
      }
    }
    return out;
  }

  out.call.fallback = "FallbackPlan: " + parsed.failure().reason;
  spdlog::warn("planner reply unusable ({}), covering every ticker with every analyst", parsed.failure().reason);
  for (const auto& t : context.stock_pool) out.plan.assignments[t] = {std::begin(kAllAnalysts), std::end(kAllAnalysts)};
  out.plan.rationale = "fallback: every ticker, every analyst";
  return out;
}

ChatRequest AgentPipeline::analyst_request(AnalystKind kind, const TickerContext& context, Date date) const {
  std::map<std::string, std::string> values{{"ticker", context.ticker.str()}, {"date", format_date(date)}};
  // Each analyst sees only its own data class.
  switch (kind) {
    case AnalystKind::Technical:
      values["bars"] = render_bars(context.bars);
      values["indicators"] = render_indicators(context.indicators);
      break;
    case AnalystKind::Fundamental:
      values["fundamentals"] = render_fundamentals(context.fundamentals);
      break;
    case AnalystKind::Insider:
      values["insider_transactions"] = render_insiders(context.insiders);
      break;
    case AnalystKind::Media:
      values["news"] = render_news(context.news);
      break;
  }
  return prompts_.render(analyst_role(kind), values);
}

SignalResult AgentPipeline::run_analyst(AnalystKind kind, const TickerContext& context, Date date) {
  const ChatExchange x = client_.complete(analyst_request(kind, context, date));
  ParseOutcome parsed = parse_structured(x.response.text, SchemaId::Signal);
  SignalResult out{{kind, context.ticker, Stance::Neutral, 0.0, "parse-failure", {}}, call_info(x, parsed.repairs)};
  if (parsed.ok()) {
    const auto& p = std::get<SignalPayload>(parsed.payload());
    out.signal.stance = p.stance;
    out.signal.confidence = p.confidence;
    out.signal.rationale = p.rationale;
    out.signal.key_evidence = p.key_evidence;
  } else {
    out.call.fallback = "NEUTRAL: " + parsed.failure().reason;
    spdlog::warn("{} analyst reply for {} unusable: {}", to_string(kind), context.ticker.str(),
                 parsed.failure().reason);
  }
  return out;
}

std::vector<SignalResult> AgentPipeline::run_analysts(const PlannerPlan& plan, const CycleContext& context) {
  std::vector<std::future<SignalResult>> futures;
  for (const auto& [ticker, kinds] : plan.assignments) {
    auto ctx = context.tickers.find(ticker);
    if (ctx == context.tickers.end()) continue;
    for (auto kind : kinds) {
      futures.push_back(std::async(std::launch::async, [this, kind, &tc = ctx->second, &context] {
        return run_analyst(kind, tc, context.as_of.trading_date);
      }));
    }
  }
  std::vector<SignalResult> out;
  out.reserve(futures.size());
  // get() in submission order; the first failure is rethrown after every
  // task has finished so no thread outlives the context it reads.
  std::exception_ptr first_error;
  for (auto& f : futures) {
    try {
      out.push_back(f.get());
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

DecisionResult AgentPipeline::manage(const Ticker& ticker, std::span<const AnalystSignal> signals,
                                     const ManagerContext& context) {
  Json signal_list = Json::array();
  for (const auto& s : signals) {
    if (s.ticker != ticker) fail(ErrorCode::ValidationFailed, "manager received a signal for another ticker");
    signal_list.push_back(Json{{"analyst", std::string(to_string(s.kind))},
                               {"stance", std::string(to_string(s.stance))},
                               {"confidence", fixed(s.confidence, 4)},
                               {"rationale", s.rationale},
                               {"key_evidence", s.key_evidence}});
  }
  ChatRequest req = prompts_.render("manager", {{"ticker", ticker.str()},
                                                {"date", format_date(context.date)},
                                                {"close", context.close.to_string()},
                                                {"position", render_position(context.position)},
                                                {"cash", context.cash.to_string()},
                                                {"nav", context.nav.to_string()},
                                                {"max_weight", context.max_position_weight.to_string()},
                                                {"memory", render_memory(context.memory)},
                                                {"signals", signals.empty() ? "(none)" : signal_list.dump(1)}});
  const ChatExchange x = client_.complete(req);
  ParseOutcome parsed = parse_structured(x.response.text, SchemaId::Decision);

  DecisionResult out{{ticker, TradeAction::Hold, std::nullopt, 0.0, "parse-failure"}, call_info(x, parsed.repairs)};
  if (!parsed.ok()) {
    out.call.fallback = "HOLD: " + parsed.failure().reason;
    spdlog::warn("manager reply for {} unusable: {}", ticker.str(), parsed.failure().reason);
    return out;
  }
  const auto& p = std::get<DecisionPayload>(parsed.payload());
  out.decision.action = p.action;
  out.decision.quantity = p.quantity;
  out.decision.confidence = p.confidence;
  out.decision.rationale = p.rationale;
  if (p.action == TradeAction::Hold) {
    out.decision.quantity.reset();
  } else if (!p.quantity) {
    const std::int64_t held = context.position ? context.position->quantity : 0;
    out.decision.quantity = fallback_quantity(p.action, p.confidence, context.max_position_weight, context.nav,
                                              context.close, held);
    out.fallback_sized = true;
  }
  return out;
}

DecisionReport render_report(Date trading_date, const PlannerPlan& plan, std::span<const AnalystSignal> signals,
                             std::span<const ManagerDecision> decisions, std::span<const TradeFill> fills,
                             std::span<const SkippedDecision> skips) {
  std::map<Ticker, TickerReport> sections;
  auto section = [&](const Ticker& t) -> TickerReport& {
    auto [it, inserted] = sections.try_emplace(t);
    it->second.ticker = t;
    return it->second;
  };
  for (const auto& [t, kinds] : plan.assignments) section(t).assigned = kinds;
  for (const auto& s : signals) section(s.ticker).signals.push_back(s);
  for (const auto& d : decisions) section(d.ticker).decision = d;
  for (const auto& f : fills) section(f.ticker).fill = f;
  for (const auto& s : skips) section(s.ticker).skipped = s;

  DecisionReport report;
  report.trading_date = trading_date;
  report.plan_rationale = plan.rationale;
  report.no_action_day = plan.assignments.empty();
  for (auto& [t, r] : sections) report.tickers.push_back(std::move(r));
  return report;
}

Json to_json(const DecisionReport& report) {
  Json tickers = Json::array();
  for (const auto& r : report.tickers) {
    Json assigned = Json::array();
    for (auto k : r.assigned) assigned.push_back(std::string(to_string(k)));
    Json signals = Json::array();
    for (const auto& s : r.signals) signals.push_back(to_json(s));
    tickers.push_back(Json{{"ticker", r.ticker.str()},
                           {"assigned", assigned},
                           {"signals", signals},
                           {"decision", r.decision ? to_json(*r.decision) : Json(nullptr)},
                           {"fill", r.fill ? to_json(*r.fill) : Json(nullptr)},
                           {"skipped", r.skipped ? to_json(*r.skipped) : Json(nullptr)}});
  }
  return Json{{"trading_date", format_date(report.trading_date)},
              {"plan_rationale", report.plan_rationale},
              {"no_action_day", report.no_action_day},
              {"tickers", tickers}};
}

}  // namespace arena
