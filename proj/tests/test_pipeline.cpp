#include <gtest/gtest.h>

#include <random>

#include "arena/config.hpp"
#include "arena/mock_model.hpp"
#include "arena/pipeline.hpp"
#include "arena/prompts.hpp"
#include "support.hpp"

using namespace arena;
using namespace arena::testing;

namespace {

const PromptLibrary& library() {
  static const PromptLibrary lib = PromptLibrary::load(PromptLibrary::default_dir());
  return lib;
}

std::string role_of(const ChatRequest& r) { return prompt_header(r.user, "ROLE").value_or(""); }

const char* kSignal = R"({"stance":"BULLISH","confidence":0.7,"rationale":"r","key_evidence":["e"]})";

ManagerContext manager_context(const char* nav = "10000", const char* close = "100") {
  ManagerContext c;
  c.date = D("2025-03-05");
  c.cash = M(nav);
  c.nav = M(nav);
  c.close = M(close);
  c.max_position_weight = M("0.2");
  return c;
}

PlanningContext planning_context(std::vector<std::string> pool) {
  PlanningContext c;
  c.date = D("2025-03-05");
  for (auto& t : pool) c.stock_pool.insert(Ticker(t));
  c.nav = M("100000");
  return c;
}

// floor(c * w * nav / close) over exact rationals, all inputs in micro-units.
std::int64_t sizing_oracle(std::int64_t c, std::int64_t w, std::int64_t nav, std::int64_t close) {
  const __int128 num = static_cast<__int128>(c) * w * nav;
  const __int128 den = static_cast<__int128>(close) * 1'000'000 * 1'000'000;
  __int128 q = 0;
  while ((q + 1) * den <= num) {
    // Gallop, then settle, so huge quotients stay cheap.
    __int128 step = 1;
    while ((q + step * 2) * den <= num) step *= 2;
    q += step;
  }
  return static_cast<std::int64_t>(q);
}

}  // namespace

TEST(Planner, AcceptsAssignment) {
  ScriptedClient client([](const ChatRequest&) { return R"({"AAPL": ["TECHNICAL","MEDIA"]})"; });
  AgentPipeline p(library(), client);
  const auto r = p.plan(planning_context({"AAPL", "MSFT"}));
  EXPECT_FALSE(r.call.fallback);
  ASSERT_EQ(r.plan.assignments.size(), 1u);
  EXPECT_EQ(r.plan.assignments.at(Ticker("AAPL")),
            (std::set<AnalystKind>{AnalystKind::Technical, AnalystKind::Media}));
  EXPECT_EQ(r.call.template_id, "planner.v1");
}

TEST(Planner, MalformedFallsBackToEverything) {
  ScriptedClient client([](const ChatRequest&) { return "let me think about it"; });
  AgentPipeline p(library(), client);
  const auto r = p.plan(planning_context({"AAPL", "MSFT"}));
  ASSERT_TRUE(r.call.fallback);
  ASSERT_EQ(r.plan.assignments.size(), 2u);
  for (const auto& [t, kinds] : r.plan.assignments) EXPECT_EQ(kinds.size(), 4u);
}

TEST(Planner, DropsTickersOutsidePool) {
  ScriptedClient client([](const ChatRequest&) {
    return R"({"assignments":{"AAPL":["TECHNICAL"],"GME":["MEDIA"]},"rationale":"r"})";
  });
  AgentPipeline p(library(), client);
  const auto r = p.plan(planning_context({"AAPL"}));
  EXPECT_EQ(r.plan.assignments.size(), 1u);
  EXPECT_FALSE(r.call.repairs.empty());
}

TEST(Planner, SeesPoolPositionsMemoryAndNav) {
  ScriptedClient client([](const ChatRequest&) { return R"({"assignments":{},"rationale":"quiet"})"; });
  AgentPipeline p(library(), client);
  auto ctx = planning_context({"AAPL", "MSFT"});
  ctx.positions[Ticker("AAPL")] = Position{Ticker("AAPL"), 12, M("99")};
  ctx.memory.entries.push_back(MemoryEntry{D("2025-03-04"), {{Ticker("AAPL"), "BUY 12"}}, "", M("100000"), "why"});
  ctx.last_return = 0.0125;
  p.plan(ctx);
  const std::string user = client.requests().at(0).user;
  EXPECT_NE(user.find("AAPL, MSFT"), std::string::npos);
  EXPECT_NE(user.find("12 shares"), std::string::npos);
  EXPECT_NE(user.find("2025-03-04"), std::string::npos);
  EXPECT_NE(user.find("100000.000000"), std::string::npos);
}

TEST(Analyst, MediaWithoutNews) {
  ScriptedClient client([](const ChatRequest&) { return kSignal; });
  AgentPipeline p(library(), client);
  TickerContext ctx;
  ctx.ticker = Ticker("AAPL");
  const auto r = p.run_analyst(AnalystKind::Media, ctx, D("2025-03-05"));
  EXPECT_NE(client.requests().at(0).user.find("no news available"), std::string::npos);
  EXPECT_EQ(r.signal.kind, AnalystKind::Media);
  EXPECT_EQ(r.signal.stance, Stance::Bullish);
  EXPECT_EQ(r.call.template_id, "analyst_media.v1");
}

TEST(Analyst, ScriptedReplyIsDeterministic) {
  ScriptedClient client([](const ChatRequest&) { return kSignal; });
  AgentPipeline p(library(), client);
  TickerContext ctx;
  ctx.ticker = Ticker("AAPL");
  const auto a = p.run_analyst(AnalystKind::Insider, ctx, D("2025-03-05"));
  const auto b = p.run_analyst(AnalystKind::Insider, ctx, D("2025-03-05"));
  EXPECT_EQ(canonical(to_json(a.signal)), canonical(to_json(b.signal)));
  EXPECT_EQ(a.call.request_hash, b.call.request_hash);
}

TEST(Analyst, ConfidenceClampIsLogged) {
  ScriptedClient client([](const ChatRequest&) {
    return R"({"stance":"BEARISH","confidence":1.7,"rationale":"r","key_evidence":[]})";
  });
  AgentPipeline p(library(), client);
  TickerContext ctx;
  ctx.ticker = Ticker("AAPL");
  const auto r = p.run_analyst(AnalystKind::Technical, ctx, D("2025-03-05"));
  EXPECT_DOUBLE_EQ(r.signal.confidence, 1.0);
  EXPECT_NE(canonical(to_json(r.call)).find("clamped"), std::string::npos);
}

TEST(Analyst, UnusableReplyIsNeutral) {
  ScriptedClient client([](const ChatRequest&) { return "no idea"; });
  AgentPipeline p(library(), client);
  TickerContext ctx;
  ctx.ticker = Ticker("AAPL");
  const auto r = p.run_analyst(AnalystKind::Fundamental, ctx, D("2025-03-05"));
  EXPECT_EQ(r.signal.stance, Stance::Neutral);
  EXPECT_DOUBLE_EQ(r.signal.confidence, 0.0);
  EXPECT_TRUE(r.call.fallback);
}

TEST(Manager, HoldHasNoSizing) {
  ScriptedClient client([](const ChatRequest&) { return R"({"action":"HOLD"})"; });
  AgentPipeline p(library(), client);
  const auto r = p.manage(Ticker("AAPL"), {}, manager_context());
  EXPECT_EQ(r.decision.action, TradeAction::Hold);
  EXPECT_FALSE(r.decision.quantity);
  EXPECT_FALSE(r.fallback_sized);
}

TEST(Manager, ConfidenceScaledSizing) {
  ScriptedClient client([](const ChatRequest&) { return R"({"action":"BUY","confidence":0.5,"rationale":"r"})"; });
  AgentPipeline p(library(), client);
  const auto r = p.manage(Ticker("AAPL"), {}, manager_context("10000", "100"));
  EXPECT_EQ(r.decision.action, TradeAction::Buy);
  ASSERT_TRUE(r.decision.quantity);
  EXPECT_EQ(*r.decision.quantity, 10);
  EXPECT_EQ(*r.decision.quantity, sizing_oracle(500'000, 200'000, 10'000'000'000, 100'000'000));
  EXPECT_TRUE(r.fallback_sized);
}

TEST(Manager, UnparseableIsHoldWithZeroConfidence) {
  ScriptedClient client([](const ChatRequest&) { return "I cannot decide."; });
  AgentPipeline p(library(), client);
  const auto r = p.manage(Ticker("AAPL"), {}, manager_context());
  EXPECT_EQ(r.decision.action, TradeAction::Hold);
  EXPECT_DOUBLE_EQ(r.decision.confidence, 0.0);
  EXPECT_TRUE(r.call.fallback);
}

TEST(Manager, RejectsSignalsForOtherTickers) {
  ScriptedClient client([](const ChatRequest&) { return R"({"action":"HOLD"})"; });
  AgentPipeline p(library(), client);
  std::vector<AnalystSignal> signals{{AnalystKind::Media, Ticker("MSFT"), Stance::Bullish, 0.5, "r", {}}};
  EXPECT_THROW(p.manage(Ticker("AAPL"), signals, manager_context()), Error);
}

TEST(Sizing, MatchesExactOracle) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5000; ++i) {
    const std::int64_t c = static_cast<std::int64_t>(rng() % 1'000'001);
    const std::int64_t w = static_cast<std::int64_t>(rng() % 1'000'001);
    const std::int64_t nav = 1 + static_cast<std::int64_t>(rng() % 1'000'000'000'000'000ULL);
    const std::int64_t close = 1 + static_cast<std::int64_t>(rng() % 1'000'000'000ULL);
    ASSERT_EQ(fallback_quantity(TradeAction::Buy, static_cast<double>(c) / 1e6, Decimal::from_micros(w),
                                Decimal::from_micros(nav), Decimal::from_micros(close), 0),
              sizing_oracle(c, w, nav, close));
  }
  EXPECT_EQ(fallback_quantity(TradeAction::Sell, 0.5, M("0.2"), M("1"), M("1"), 31), 15);
  EXPECT_EQ(fallback_quantity(TradeAction::Hold, 0.5, M("0.2"), M("1"), M("1"), 31), 0);
  EXPECT_EQ(fallback_quantity(TradeAction::Buy, std::nan(""), M("0.2"), M("1"), M("1"), 0), 0);
}

// Every fact that reaches a prompt comes from the gated context, and the
// gated context passes the leakage audit; the dataset itself does contain
// future facts, so the gate is doing work.
TEST(Gating, PromptInputsPassTheAudit) {
  const Dataset ds = make_sample_dataset();
  MarketDataStore store(ds.meta.clock);
  store.ingest_records("sample", ds.facts);
  const std::set<Ticker> pool{Ticker("AAPL"), Ticker("MSFT"), Ticker("TSLA")};
  for (Date d : store.trading_days(D("2025-03-03"), D("2025-04-11"))) {
    const AsOf at = store.clock().as_of(d);
    ASSERT_FALSE(audit_leakage(at, ds.facts).empty());
    const CycleContext ctx = gather_context(store, pool, at);
    ASSERT_TRUE(audit_leakage(at, ctx.all_facts()).empty()) << format_date(d);
    for (const auto& [t, tc] : ctx.tickers) {
      ASSERT_TRUE(tc.close);
      ASSERT_EQ(tc.bars.back().date, d);
    }
  }
}

TEST(Gating, AnalystSlicesAreDisjoint) {
  const AsOf at = as_of("2025-03-05");
  TickerContext ctx;
  ctx.ticker = Ticker("AAPL");
  ctx.bars.push_back(bar("AAPL", D("2025-03-05"), M("123.45")));
  ctx.news.push_back(news("n1", {"AAPL"}, at.instant - std::chrono::hours{2}, "HEADLINE-MARKER"));
  ctx.insiders.push_back(insider("AAPL", at.instant - std::chrono::hours{3}, TradeDirection::Sell, 4242));
  ctx.fundamentals = fundamentals("AAPL", D("2024-12-31"), T("2025-02-01T00:00:00Z"), "987654");
  ScriptedClient client([](const ChatRequest&) { return kSignal; });
  AgentPipeline p(library(), client);
  auto user = [&](AnalystKind k) { return p.analyst_request(k, ctx, D("2025-03-05")).user; };
  const std::string tech = user(AnalystKind::Technical), fund = user(AnalystKind::Fundamental),
                    ins = user(AnalystKind::Insider), media = user(AnalystKind::Media);
  EXPECT_NE(media.find("HEADLINE-MARKER"), std::string::npos);
  EXPECT_EQ(tech.find("HEADLINE-MARKER"), std::string::npos);
  EXPECT_NE(ins.find("4242"), std::string::npos);
  EXPECT_EQ(media.find("4242"), std::string::npos);
  EXPECT_NE(fund.find("987654"), std::string::npos);
  EXPECT_EQ(ins.find("987654"), std::string::npos);
  EXPECT_NE(tech.find("123.45"), std::string::npos);
  EXPECT_EQ(fund.find("123.45"), std::string::npos);
}

TEST(Report, Examples) {
  PlannerPlan plan{{{Ticker("AAPL"), {std::begin(kAllAnalysts), std::end(kAllAnalysts)}}}, "r"};
  std::vector<AnalystSignal> signals;
  for (auto k : kAllAnalysts) signals.push_back({k, Ticker("AAPL"), Stance::Neutral, 0.1, "r", {}});
  std::vector<ManagerDecision> decisions{{Ticker("AAPL"), TradeAction::Buy, 5, 0.4, "r"}};
  std::vector<SkippedDecision> skips{{Ticker("AAPL"), TradeAction::Buy, 5, "insufficient cash"}};
  const auto report = render_report(D("2025-03-05"), plan, signals, decisions, {}, skips);
  ASSERT_EQ(report.tickers.size(), 1u);
  EXPECT_EQ(report.tickers[0].signals.size(), 4u);
  ASSERT_TRUE(report.tickers[0].skipped);
  EXPECT_EQ(report.tickers[0].skipped->reason, "insufficient cash");
  EXPECT_FALSE(report.no_action_day);
  EXPECT_TRUE(render_report(D("2025-03-05"), PlannerPlan{}, {}, {}, {}, {}).no_action_day);
}

TEST(Prompts, TemplatesAreVersionedAndComplete) {
  for (const char* role : {"planner", "manager", "analyst_technical", "analyst_fundamental", "analyst_insider",
                           "analyst_media"}) {
    ASSERT_TRUE(library().has(role)) << role;
    EXPECT_GE(library().get(role).version, 1);
  }
  EXPECT_THROW(library().render("planner", {}), Error);
  const auto t = parse_prompt_template("x", 2, "[system]\nhello\n[user]\nROLE: x\n{{a}} and {{b}}\n");
  EXPECT_EQ(t.placeholders(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.id(), "x.v2");
}

TEST(MockModel, HeuristicAndRules) {
  const MockModel mock = MockModel::from_json(Json::array({rule("manager", "AAPL", "scripted")}));
  ChatRequest r;
  r.user = "ROLE: manager\nTICKER: AAPL\n";
  EXPECT_EQ(mock.respond(r), "scripted");
  r.user = "ROLE: planner\nSTOCK_POOL: AAPL, MSFT\n";
  const auto plan = parse_structured(mock.respond(r), SchemaId::Plan);
  ASSERT_TRUE(plan.ok());
  EXPECT_EQ(std::get<PlannerPlan>(plan.payload()).assignments.size(), 2u);
  r.user = "ROLE: analyst\nTICKER: MSFT\nsome context";
  EXPECT_EQ(mock.respond(r), mock.respond(r));
  EXPECT_TRUE(parse_structured(mock.respond(r), SchemaId::Signal).ok());
}
