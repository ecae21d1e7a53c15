#include <gtest/gtest.h>

#include <random>

#include "arena/error.hpp"
#include "arena/event_store.hpp"
#include "support.hpp"

using namespace arena;
using namespace arena::testing;

namespace {

Fund base_fund(const char* cash = "100000") {
  Fund f;
  f.fund_id = "fund-0001";
  f.name = "t";
  f.model_spec_id = "mock-v1";
  for (const char* t : {"AAPL", "MSFT", "NVDA"}) f.stock_pool.insert(Ticker(t));
  f.cash = M(cash);
  f.inception = as_of("2025-03-03");
  return f;
}

ModelSpec mock_model() {
  ModelSpec m;
  m.spec_id = "mock-v1";
  m.provider = "mock";
  m.model_name = "mock";
  return m;
}

// Builds events with consecutive seq numbers.
class LogBuilder {
 public:
  ArenaEvent& add(EventType type, Json payload, Instant ts = T("2025-03-03T21:00:00Z")) {
    events.push_back(ArenaEvent{static_cast<std::int64_t>(events.size()) + 1, ts, type, std::move(payload)});
    return events.back();
  }
  void created(const Fund& f) { add(EventType::FundCreated, Json{{"fund", to_json(f)}, {"model_spec", to_json(mock_model())}}); }
  std::vector<ArenaEvent> events;
};

std::vector<ArenaEvent> creation_only() {
  LogBuilder b;
  b.created(base_fund());
  return b.events;
}

}  // namespace

TEST(EventStore, AppendFiveToEmptyLog) {
  TempDir dir;
  EventStore store(dir.path());
  LogBuilder b;
  b.created(base_fund());
  for (int i = 0; i < 4; ++i) b.add(EventType::RunControl, Json{{"action", "noop"}});
  EXPECT_EQ(store.append("fund-0001", b.events), 5);
  EXPECT_EQ(store.last_seq("fund-0001"), 5);
  EXPECT_EQ(read_lines(store.log_path("fund-0001")).size(), 5u);
  EXPECT_EQ(read_lines(store.log_path("fund-0001"))[0], canonical(to_json(b.events[0])));
}

TEST(EventStore, WrongStartingSeqLeavesLogUnchanged) {
  TempDir dir;
  EventStore store(dir.path());
  store.append("fund-0001", creation_only());
  const std::string before = read_file(store.log_path("fund-0001"));
  std::vector<ArenaEvent> bad{ArenaEvent{3, T("2025-03-03T21:00:00Z"), EventType::RunControl, Json::object()}};
  try {
    store.append("fund-0001", bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeqConflict);
  }
  bad[0].seq = 1;
  EXPECT_THROW(store.append("fund-0001", bad), Error);
  EXPECT_EQ(read_file(store.log_path("fund-0001")), before);
  EXPECT_EQ(store.last_seq("fund-0001"), 1);
}

TEST(EventStore, EmptyAppendIsNoOp) {
  TempDir dir;
  EventStore store(dir.path());
  store.append("fund-0001", creation_only());
  EXPECT_EQ(store.append("fund-0001", std::vector<ArenaEvent>{}), 1);
  EXPECT_EQ(read_lines(store.log_path("fund-0001")).size(), 1u);
}

TEST(EventStore, CreationOnlyFoldsToInception) {
  TempDir dir;
  EventStore store(dir.path());
  store.append("fund-0001", creation_only());
  const FundState s = store.fold_fund("fund-0001");
  EXPECT_EQ(canonical(to_json(s.fund)), canonical(to_json(base_fund())));
  EXPECT_TRUE(s.nav_series.points.empty());
  EXPECT_FALSE(s.last_cycle_date);
  EXPECT_EQ(s.last_seq, 1);
}

TEST(EventStore, TruncatedLastLineIsCorrupt) {
  TempDir dir;
  {
    EventStore store(dir.path());
    LogBuilder b;
    b.created(base_fund());
    b.add(EventType::RunControl, Json{{"action", "noop"}});
    b.add(EventType::RunControl, Json{{"action", "noop"}});
    store.append("fund-0001", b.events);
  }
  const fs::path log = dir.path() / "funds" / "fund-0001" / "events.jsonl";
  const std::string text = read_file(log);
  write_file(log, text.substr(0, text.size() - 5));
  EventStore store(dir.path());
  try {
    store.fold_fund("fund-0001");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CorruptLog);
    EXPECT_NE(std::string(e.what()).find("seq 3"), std::string::npos) << e.what();
  }
}

TEST(EventStore, GapInSeqIsCorrupt) {
  auto events = creation_only();
  events.push_back(ArenaEvent{3, T("2025-03-03T21:00:00Z"), EventType::RunControl, Json::object()});
  EXPECT_THROW(fold_events(events), Error);
}

TEST(EventStore, UnknownFund) {
  TempDir dir;
  EventStore store(dir.path());
  for (const char* id : {"fund-9999", "../etc", ""}) {
    try {
      store.query(id, {});
      FAIL() << id;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::UnknownFund);
    }
  }
  EXPECT_FALSE(store.exists("fund-9999"));
}

TEST(EventStore, QueryFiltersAndPages) {
  TempDir dir;
  EventStore store(dir.path());
  LogBuilder b;
  b.created(base_fund());
  for (const char* day : {"2025-03-03T21:00:00Z", "2025-03-04T21:00:00Z"}) {
    b.add(EventType::CycleStarted, Json{{"trading_date", std::string(day, 10)}}, T(day));
    for (const char* kind : {"TECHNICAL", "FUNDAMENTAL", "MEDIA", "INSIDER"}) {
      b.add(EventType::SignalEmitted, Json{{"ticker", "AAPL"}, {"kind", kind}}, T(day));
    }
    b.add(EventType::SignalEmitted, Json{{"ticker", "MSFT"}, {"kind", "MEDIA"}}, T(day));
    b.add(EventType::CycleFailed, Json{{"trading_date", std::string(day, 10)}}, T(day));
  }
  store.append("fund-0001", b.events);

  EventFilter f;
  f.types = {EventType::SignalEmitted};
  f.from = f.to = D("2025-03-04");
  f.ticker = Ticker("AAPL");
  auto page = store.query("fund-0001", f);
  EXPECT_EQ(page.total, 4u);
  ASSERT_EQ(page.events.size(), 4u);
  for (std::size_t i = 1; i < page.events.size(); ++i) EXPECT_LT(page.events[i - 1].seq, page.events[i].seq);

  page = store.query("fund-0001", EventFilter{});
  EXPECT_EQ(page.total, b.events.size());
  EventFilter paged;
  paged.limit = 5;
  paged.offset = 10;
  page = store.query("fund-0001", paged);
  ASSERT_EQ(page.events.size(), 5u);
  EXPECT_EQ(page.events[0].seq, 11);
}

TEST(EventStore, InjectedFaultRollsBack) {
  TempDir dir;
  EventStore store(dir.path());
  store.append("fund-0001", creation_only());
  const std::string before = read_file(store.log_path("fund-0001"));
  store.set_write_fault_hook([](const std::string&, std::span<const ArenaEvent>) { return std::optional<std::size_t>(37); });
  LogBuilder b;
  b.created(base_fund());
  b.add(EventType::CycleStarted, Json{{"trading_date", "2025-03-03"}});
  b.add(EventType::CycleFailed, Json{{"trading_date", "2025-03-03"}});
  try {
    store.append("fund-0001", std::span(b.events).subspan(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StorageFailure);
  }
  EXPECT_EQ(read_file(store.log_path("fund-0001")), before);
  EXPECT_EQ(store.last_seq("fund-0001"), 1);
  store.set_write_fault_hook(nullptr);
  EXPECT_EQ(store.append("fund-0001", std::span(b.events).subspan(1)), 3);
  store.reset_index();
  EXPECT_EQ(store.events("fund-0001").size(), 3u);
}

TEST(EventStore, ReloadsFromDisk) {
  TempDir dir;
  {
    EventStore store(dir.path());
    store.append("fund-0001", creation_only());
    auto other = creation_only();
    other[0].payload["fund"]["fund_id"] = "fund-0002";
    store.append("fund-0002", other);
  }
  EventStore store(dir.path());
  EXPECT_EQ(store.fund_ids(), (std::vector<std::string>{"fund-0001", "fund-0002"}));
  EXPECT_EQ(store.fold_fund("fund-0002").fund.fund_id, "fund-0002");
}

// A long random log of cycles (some failed) folded back and compared with a
// ledger that only commits completed cycles.
TEST(EventStoreProperty, RandomLogFoldsToTrackedState) {
  std::mt19937_64 rng(77);
  const std::vector<std::string> tickers{"AAPL", "MSFT", "NVDA"};
  LogBuilder b;
  b.created(base_fund());
  oracle::Ledger committed;
  committed.cash = M("100000").micros();
  std::vector<std::int64_t> nav_committed;
  std::map<std::string, std::int64_t> closes{{"AAPL", 100'000'000}, {"MSFT", 200'000'000}, {"NVDA", 50'000'000}};
  Date day = D("2025-03-03");
  std::size_t fills_committed = 0;

  while (b.events.size() < 1000) {
    const AsOf at = kClock.as_of(day);
    const Instant ts = at.instant;
    oracle::Ledger staged = committed;
    std::size_t staged_fills = 0;
    b.add(EventType::CycleStarted, Json{{"trading_date", format_date(day)}}, ts);
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      const std::string t = tickers[rng() % tickers.size()];
      closes[t] = std::max<std::int64_t>(1'000'000, closes[t] + static_cast<std::int64_t>(rng() % 10'000'001) - 5'000'000);
      const std::int64_t held = staged.shares[t];
      TradeFill fill{Ticker(t), TradeAction::Buy, 0, Decimal::from_micros(closes[t]), Decimal::from_micros(0), at};
      if (held > 0 && rng() % 2 == 0) {
        fill.action = TradeAction::Sell;
        fill.quantity = 1 + static_cast<std::int64_t>(rng() % held);
      } else {
        fill.quantity = 1 + static_cast<std::int64_t>(rng() % 5);
      }
      const std::int64_t fee = oracle::fee(closes[t], fill.quantity, 5);
      fill.fee = Decimal::from_micros(fee);
      if (fill.action == TradeAction::Buy) {
        if (static_cast<__int128>(closes[t]) * fill.quantity + fee > staged.cash) continue;
        staged.buy(t, fill.quantity, closes[t], fee);
      } else {
        staged.sell(t, fill.quantity, closes[t], fee);
      }
      ++staged_fills;
      b.add(EventType::OrderFilled, Json{{"ticker", t}, {"fill", to_json(fill)}}, ts);
    }
    const std::int64_t nav = staged.nav(closes);
    std::int64_t holdings = nav - staged.cash;
    Json marks = Json::object();
    for (const auto& [t, q] : staged.shares) {
      if (q > 0) marks[t] = to_json(Decimal::from_micros(closes[t]));
    }
    b.add(EventType::NavMarked,
          Json{{"nav", to_json(NavSnapshot{at, Decimal::from_micros(staged.cash), Decimal::from_micros(holdings),
                                           Decimal::from_micros(nav)})},
               {"closes", marks}},
          ts);
    if (rng() % 5 == 0) {
      b.add(EventType::CycleFailed, Json{{"trading_date", format_date(day)}}, ts);
    } else {
      b.add(EventType::CycleCompleted, Json{{"trading_date", format_date(day)}}, ts);
      committed = staged;
      fills_committed += staged_fills;
      nav_committed.push_back(nav);
    }
    day = weekdays(day + std::chrono::days{1}, 1)[0];
  }

  TempDir dir;
  EventStore store(dir.path());
  // Several batches, like cycles would write them.
  for (std::size_t i = 0; i < b.events.size(); i += 97) {
    const std::size_t end = std::min(b.events.size(), i + 97);
    store.append("fund-0001", std::span(b.events).subspan(i, end - i));
  }
  store.reset_index();
  const FundState s = store.fold_fund("fund-0001");
  EXPECT_EQ(s.last_seq, static_cast<std::int64_t>(b.events.size()));
  EXPECT_EQ(s.fund.cash.micros(), committed.cash);
  for (const auto& [t, q] : committed.shares) {
    const auto it = s.fund.positions.find(Ticker(t));
    EXPECT_EQ(it == s.fund.positions.end() ? 0 : it->second.quantity, q) << t;
  }
  EXPECT_EQ(s.fills.size(), fills_committed);
  ASSERT_EQ(s.nav_series.points.size(), nav_committed.size());
  for (std::size_t i = 0; i < nav_committed.size(); ++i) EXPECT_EQ(s.nav_series.points[i].nav.micros(), nav_committed[i]);

  // Replay is deterministic down to the byte.
  EXPECT_EQ(canonical(to_json(fold_events(b.events))), canonical(to_json(s)));
  // Seq density.
  const auto lines = read_lines(store.log_path("fund-0001"));
  for (std::size_t i = 0; i < lines.size(); ++i) ASSERT_EQ(Json::parse(lines[i])["seq"], static_cast<std::int64_t>(i) + 1);
}
