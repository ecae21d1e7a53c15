#include "arena/orchestrator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "arena/error.hpp"
#include "arena/fixture.hpp"

namespace arena {
namespace fs = std::filesystem;
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ms(Clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - since).count();
}

std::string numbered(std::string_view prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*s-%04d", static_cast<int>(prefix.size()), prefix.data(), n);
  return buf;
}

int number_of(const std::string& id) {
  const auto dash = id.rfind('-');
  if (dash == std::string::npos) return 0;
  try {
    return std::stoi(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

std::string action_label(const ManagerDecision& d) {
  std::string out(to_string(d.action));
  if (d.action != TradeAction::Hold && d.quantity) out += " " + std::to_string(*d.quantity);
  return out;
}

std::string fill_line(const TradeFill& f) {
  return std::string(to_string(f.action)) + " " + std::to_string(f.quantity) + " " + f.ticker.str() + " @ " +
         f.price.to_string();
}

bool defers_cycle(ErrorCode code) {
  return code == ErrorCode::ProviderUnavailable || code == ErrorCode::LlmUnavailable ||
         code == ErrorCode::MissingPrice;
}

Json date_or_null(const std::optional<Date>& d) { return d ? Json(format_date(*d)) : Json(nullptr); }

}  // namespace

FundSpec fund_spec_from_json(const Json& obj) {
  if (!obj.is_object()) fail(ErrorCode::ValidationFailed, "fund body must be a JSON object");
  FundSpec s;
  s.name = require_string(obj, "name");
  if (s.name.empty()) fail(ErrorCode::ValidationFailed, "name must not be empty");
  s.model_spec_id = require_string(obj, "model_spec");
  const Json& pool = require(obj, "stock_pool");
  if (!pool.is_array() || pool.empty()) fail(ErrorCode::ValidationFailed, "stock_pool must be a non-empty array");
  for (const auto& t : pool) {
    if (!t.is_string()) fail(ErrorCode::ValidationFailed, "stock_pool entries must be strings");
    s.stock_pool.insert(Ticker(t.get<std::string>()));
  }
  s.initial_cash = require_decimal(obj, "initial_cash");
  if (auto c = obj.find("config"); c != obj.end() && !c->is_null()) s.config = fund_config_from_json(*c);
  if (obj.contains("inception") && !obj.at("inception").is_null()) s.inception = require_date(obj, "inception");
  return s;
}

Json to_json(const CycleRecord& r, bool with_timings) {
  Json signals = Json::array();
  for (const auto& s : r.signals) signals.push_back(to_json(s));
  Json decisions = Json::array();
  for (const auto& d : r.decisions) decisions.push_back(to_json(d));
  Json fills = Json::array();
  for (const auto& f : r.fills) fills.push_back(to_json(f));
  Json skipped = Json::array();
  for (const auto& s : r.skipped) skipped.push_back(to_json(s));
  Json out{{"fund_id", r.fund_id},
           {"run_id", r.run_id},
           {"trading_date", format_date(r.trading_date)},
           {"as_of", to_json(r.as_of)},
           {"plan", to_json(r.plan)},
           {"signals", signals},
           {"decisions", decisions},
           {"fills", fills},
           {"skipped", skipped},
           {"nav_snapshot", to_json(r.nav_snapshot)},
           {"llm_call_ids", r.llm_call_ids}};
  if (with_timings) out["timings_ms"] = r.timings_ms;
  return out;
}

std::string_view to_string(RunMode mode) { return mode == RunMode::Live ? "LIVE" : "REPLAY"; }

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Created: return "CREATED";
    case RunStatus::Running: return "RUNNING";
    case RunStatus::Paused: return "PAUSED";
    case RunStatus::Completed: return "COMPLETED";
    case RunStatus::Failed: return "FAILED";
  }
  return "FAILED";
}

std::string_view to_string(RunCommand command) {
  switch (command) {
    case RunCommand::Pause: return "PAUSE";
    case RunCommand::Resume: return "RESUME";
    case RunCommand::Abort: return "ABORT";
  }
  return "ABORT";
}

RunCommand run_command_from(std::string_view text) {
  if (text == "PAUSE") return RunCommand::Pause;
  if (text == "RESUME") return RunCommand::Resume;
  if (text == "ABORT") return RunCommand::Abort;
  fail(ErrorCode::ValidationFailed, "command must be PAUSE, RESUME or ABORT");
}

namespace {

RunStatus run_status_from(std::string_view text) {
  for (auto s : {RunStatus::Created, RunStatus::Running, RunStatus::Paused, RunStatus::Completed, RunStatus::Failed}) {
    if (to_string(s) == text) return s;
  }
  fail(ErrorCode::ValidationFailed, "unknown run status " + std::string(text));
}

}  // namespace

Json to_json(const ArenaRun& r) {
  return Json{{"run_id", r.run_id},
              {"fund_id", r.fund_id},
              {"mode", std::string(to_string(r.mode))},
              {"status", std::string(to_string(r.status))},
              {"clock", r.clock ? to_json(*r.clock) : Json(nullptr)},
              {"from", date_or_null(r.from)},
              {"to", date_or_null(r.to)},
              {"contaminated", r.contaminated},
              {"cycles_completed", r.cycles_completed},
              {"cause", r.cause ? Json(*r.cause) : Json(nullptr)},
              {"error_code", r.error_code ? Json(*r.error_code) : Json(nullptr)}};
}

ArenaRun run_from_json(const Json& obj) {
  ArenaRun r;
  r.run_id = require_string(obj, "run_id");
  r.fund_id = require_string(obj, "fund_id");
  r.mode = require_string(obj, "mode") == "LIVE" ? RunMode::Live : RunMode::Replay;
  r.status = run_status_from(require_string(obj, "status"));
  if (auto c = obj.find("clock"); c != obj.end() && !c->is_null()) r.clock = as_of_from_json(*c);
  if (obj.contains("from") && !obj.at("from").is_null()) r.from = require_date(obj, "from");
  if (obj.contains("to") && !obj.at("to").is_null()) r.to = require_date(obj, "to");
  r.contaminated = obj.value("contaminated", false);
  r.cycles_completed = obj.value("cycles_completed", std::int64_t{0});
  if (auto c = obj.find("cause"); c != obj.end() && c->is_string()) r.cause = c->get<std::string>();
  if (auto c = obj.find("error_code"); c != obj.end() && c->is_string()) r.error_code = c->get<std::string>();
  return r;
}

RunStatus next_status(RunStatus current, RunCommand command) {
  const auto illegal = [&]() -> RunStatus {
    fail(ErrorCode::IllegalTransition,
         "cannot " + std::string(to_string(command)) + " a run that is " + std::string(to_string(current)));
  };
  switch (command) {
    case RunCommand::Pause: return current == RunStatus::Running ? RunStatus::Paused : illegal();
    case RunCommand::Resume: return current == RunStatus::Paused ? RunStatus::Running : illegal();
    case RunCommand::Abort:
      return current == RunStatus::Created || current == RunStatus::Running || current == RunStatus::Paused
                 ? RunStatus::Failed
                 : illegal();
  }
  return illegal();
}

// ---------------------------------------------------------------------------

Arena::Arena(ArenaConfig config, std::shared_ptr<LlmGateway> gateway)
    : config_(std::move(config)), store_(config_.data_dir) {
  MarketClock clock;
  std::vector<Fact> facts;
  if (fs::exists(config_.dataset_dir)) {
    Dataset ds = load_dataset(config_.dataset_dir);
    clock = ds.meta.clock;
    facts = std::move(ds.facts);
  }
  market_ = std::make_shared<MarketDataStore>(clock);
  if (!facts.empty()) market_->ingest_records("dataset", facts);

  prompts_ = PromptLibrary::load(fs::exists(config_.prompts_dir) ? config_.prompts_dir : PromptLibrary::default_dir());

  if (gateway) {
    gateway_ = std::move(gateway);
  } else {
    gateway_ = std::make_shared<LlmGateway>(config_.llm);
    for (const auto& p : config_.providers) gateway_->register_provider(p);
  }
  for (const auto& m : config_.models) {
    if (!gateway_->has_model(m.spec_id)) gateway_->register_model(m);
  }

  const fs::path runs_dir = config_.data_dir / "runs";
  fs::create_directories(runs_dir);
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.path().extension() != ".json") continue;
    try {
      std::ifstream in(entry.path());
      ArenaRun run = run_from_json(Json::parse(in));
      if (run.status == RunStatus::Created || run.status == RunStatus::Running || run.status == RunStatus::Paused) {
        run.status = RunStatus::Failed;
        run.cause = "interrupted";
        persist_run(run);
      }
      auto slot = std::make_unique<RunSlot>();
      slot->run = std::move(run);
      runs_.emplace(slot->run.run_id, std::move(slot));
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable run record {}: {}", entry.path().string(), e.what());
    }
  }
}

Arena::~Arena() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(runs_mu_);
    shutting_down_ = true;
    for (auto& [id, slot] : runs_) {
      slot->cv.notify_all();
      if (slot->worker.joinable()) workers.push_back(std::move(slot->worker));
    }
  }
  for (auto& w : workers) w.join();
}

std::mutex& Arena::fund_mutex(const std::string& fund_id) {
  std::lock_guard lock(funds_mu_);
  auto& m = fund_mutexes_[fund_id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

FundState Arena::cached_state(const std::string& fund_id) const {
  std::lock_guard lock(funds_mu_);
  if (auto it = states_.find(fund_id); it != states_.end()) return it->second;
  FundState state = store_.fold_fund(fund_id);
  states_.emplace(fund_id, state);
  return state;
}

FundState Arena::fund_state(const std::string& fund_id) const { return cached_state(fund_id); }

std::vector<std::string> Arena::fund_ids() const { return store_.fund_ids(); }

std::string Arena::create_fund(const FundSpec& spec) {
  if (spec.name.empty()) fail(ErrorCode::ValidationFailed, "name must not be empty");
  if (spec.stock_pool.empty()) fail(ErrorCode::ValidationFailed, "stock_pool must not be empty");
  if (!spec.initial_cash.is_positive()) fail(ErrorCode::ValidationFailed, "initial_cash must be positive");
  spec.config.validate();
  if (!gateway_->has_model(spec.model_spec_id)) fail(ErrorCode::UnknownModel, "unknown model " + spec.model_spec_id);
  if (market_->size() > 0) {
    for (const auto& t : spec.stock_pool) {
      if (!market_->knows(t)) fail(ErrorCode::UnknownTicker, "no market data for " + t.str());
    }
  }
  const Date inception = spec.inception ? *spec.inception
                                        : market_->first_bar_date().value_or(date_of(now_utc()));

  std::lock_guard lock(funds_mu_);
  int next = 0;
  for (const auto& id : store_.fund_ids()) next = std::max(next, number_of(id));
  const std::string fund_id = numbered("fund", next + 1);

  Fund fund;
  fund.fund_id = fund_id;
  fund.name = spec.name;
  fund.model_spec_id = spec.model_spec_id;
  fund.stock_pool = spec.stock_pool;
  fund.cash = spec.initial_cash;
  fund.inception = market_->clock().as_of(inception);
  fund.config = spec.config;

  ArenaEvent created;
  created.seq = 1;
  created.ts = fund.inception.instant;
  created.type = EventType::FundCreated;
  created.payload = Json{{"fund", to_json(fund)}, {"model_spec", to_json(gateway_->model(spec.model_spec_id))}};
  store_.append(fund_id, std::span<const ArenaEvent>(&created, 1));
  states_.erase(fund_id);
  spdlog::info("created {} ({}) on {}", fund_id, spec.name, spec.model_spec_id);
  return fund_id;
}

MetricsReport Arena::metrics(const std::string& fund_id) const {
  const FundState state = cached_state(fund_id);
  return compute_metrics(state.nav_series, state.fills);
}

std::vector<LeaderboardRow> Arena::leaderboard(std::string_view rank_key) const {
  std::map<std::string, MetricsReport> reports;
  for (const auto& id : fund_ids()) reports.emplace(id, metrics(id));
  return arena::leaderboard(reports, rank_key);
}

std::int64_t Arena::append_locked(const std::string& fund_id, Instant ts,
                                  std::vector<std::pair<EventType, Json>> events) {
  std::int64_t seq = store_.last_seq(fund_id);
  std::vector<ArenaEvent> batch;
  batch.reserve(events.size());
  for (auto& [type, payload] : events) batch.push_back({++seq, ts, type, std::move(payload)});
  try {
    return store_.append(fund_id, batch);
  } catch (...) {
    std::lock_guard lock(funds_mu_);
    states_.erase(fund_id);
    throw;
  }
}

void Arena::check_cycle_preconditions(const FundState& state, Date trading_date) const {
  const std::string date = format_date(trading_date);
  if (state.last_cycle_date && trading_date <= *state.last_cycle_date) {
    fail(ErrorCode::OutOfOrder, date + " is not after the last completed cycle " + format_date(*state.last_cycle_date));
  }
  if (trading_date < state.fund.inception.trading_date) {
    fail(ErrorCode::OutOfOrder, date + " is before the fund's inception");
  }
  if (!market_->is_trading_day(trading_date)) fail(ErrorCode::NotTradingDay, date + " is not a trading day");
}

CycleRecord Arena::run_cycle(const std::string& fund_id, Date trading_date, const std::string& run_id) {
  (void)cached_state(fund_id);  // UnknownFund before anything else
  std::unique_lock lock(fund_mutex(fund_id), std::try_to_lock);
  if (!lock.owns_lock()) fail(ErrorCode::FundBusy, fund_id + " is running another cycle");
  return cycle_locked(fund_id, trading_date, run_id);
}

CycleRecord Arena::cycle_locked(const std::string& fund_id, Date trading_date, const std::string& run_id) {
  const FundState before = cached_state(fund_id);
  check_cycle_preconditions(before, trading_date);

  const AsOf as_of = market_->clock().as_of(trading_date);
  const std::string date = format_date(trading_date);
  CycleRecord record;
  record.fund_id = fund_id;
  record.run_id = run_id;
  record.trading_date = trading_date;
  record.as_of = as_of;

  std::vector<std::pair<EventType, Json>> events;
  events.emplace_back(EventType::CycleStarted,
                      Json{{"trading_date", date}, {"as_of", to_json(as_of)}, {"run_id", run_id}});
  auto event = [&](EventType type, Json payload) {
    payload["trading_date"] = date;
    events.emplace_back(type, std::move(payload));
  };

  FundState after = before;
  Fund& fund = after.fund;
  try {
    // Phase 1: gated context.
    auto t0 = Clock::now();
    const CycleContext context = gather_context(*market_, fund.stock_pool, as_of, config_.windows);
    const auto facts = context.all_facts();
    if (auto leaks = audit_leakage(as_of, facts); !leaks.empty()) {
      fail(ErrorCode::LeakageDetected, std::to_string(leaks.size()) + " fact(s) from after " +
                                           format_instant(as_of.instant) + " reached the context, first: " +
                                           leaks.front().fact);
    }
    std::map<Ticker, Decimal> closes;
    for (const auto& [ticker, tc] : context.tickers) {
      if (!tc.close) fail(ErrorCode::MissingPrice, "no close for " + ticker.str() + " on " + date);
      closes.emplace(ticker, *tc.close);
    }
    record.timings_ms["context"] = elapsed_ms(t0);

    // Orders decided yesterday fill at today's open.
    std::vector<PendingOrder> pending;
    pending.swap(fund.pending);
    for (const auto& order : pending) {
      const auto& tc = context.tickers.at(order.decision.ticker);
      if (!tc.open) fail(ErrorCode::MissingPrice, "no open for " + order.decision.ticker.str() + " on " + date);
      ExecutionResult r = execute_decision(fund, order.decision, *tc.open, as_of);
      fund = std::move(r.fund);
      const Json from = format_date(order.decided_on);
      if (r.fill) {
        event(EventType::OrderFilled, Json{{"ticker", order.decision.ticker.str()},
                                           {"fill", to_json(*r.fill)},
                                           {"requested", order.decision.quantity.value_or(0)},
                                           {"clamp_reason", r.clamp_reason ? Json(*r.clamp_reason) : Json(nullptr)},
                                           {"pending_from", from}});
        record.fills.push_back(*r.fill);
      } else if (r.skipped) {
        event(EventType::OrderSkipped,
              Json{{"ticker", order.decision.ticker.str()}, {"skip", to_json(*r.skipped)}, {"pending_from", from}});
        record.skipped.push_back(*r.skipped);
      }
    }

    // Phase 2: plan, then analysts.
    const ModelSpec& model = before.model;
    auto client = gateway_->session(model, run_id);
    AgentPipeline pipeline(prompts_, *client);

    t0 = Clock::now();
    PlanningContext pc;
    pc.date = trading_date;
    pc.stock_pool = fund.stock_pool;
    pc.positions = fund.positions;
    pc.memory = fund.memory;
    pc.nav = mark_to_market(fund, closes, as_of).nav;
    const auto& navs = before.nav_series.points;
    if (navs.size() >= 2) {
      pc.last_return = static_cast<double>(navs.back().nav.micros()) /
                           static_cast<double>(navs[navs.size() - 2].nav.micros()) -
                       1.0;
    }
    PlanResult plan = pipeline.plan(pc);
    record.plan = plan.plan;
    record.llm_call_ids.push_back(plan.call.request_hash);
    event(EventType::PlanMade, Json{{"plan", to_json(plan.plan)}, {"call", to_json(plan.call)}});
    record.timings_ms["plan"] = elapsed_ms(t0);

    t0 = Clock::now();
    const auto signals = pipeline.run_analysts(plan.plan, context);
    for (const auto& s : signals) {
      record.signals.push_back(s.signal);
      record.llm_call_ids.push_back(s.call.request_hash);
      event(EventType::SignalEmitted, Json{{"ticker", s.signal.ticker.str()},
                                           {"analyst", std::string(to_string(s.signal.kind))},
                                           {"signal", to_json(s.signal)},
                                           {"call", to_json(s.call)}});
    }
    record.timings_ms["analysts"] = elapsed_ms(t0);

    // Phase 3: decide and execute per ticker, then mark and remember.
    t0 = Clock::now();
    MemoryEntry memory;
    memory.trading_date = trading_date;
    memory.rationale = plan.plan.rationale;
    std::vector<std::string> fill_lines;
    for (const auto& [ticker, kinds] : plan.plan.assignments) {
      std::vector<AnalystSignal> mine;
      for (const auto& s : record.signals) {
        if (s.ticker == ticker) mine.push_back(s);
      }
      ManagerContext mc;
      mc.date = trading_date;
      if (auto p = fund.positions.find(ticker); p != fund.positions.end()) mc.position = p->second;
      mc.cash = fund.cash;
      mc.nav = mark_to_market(fund, closes, as_of).nav;
      mc.close = closes.at(ticker);
      mc.max_position_weight = fund.config.max_position_weight;
      mc.memory = fund.memory;
      DecisionResult d = pipeline.manage(ticker, mine, mc);
      record.decisions.push_back(d.decision);
      record.llm_call_ids.push_back(d.call.request_hash);

      const bool deferred =
          fund.config.execution_policy == ExecutionPolicy::NextOpen && d.decision.action != TradeAction::Hold;
      event(EventType::DecisionMade, Json{{"ticker", ticker.str()},
                                          {"decision", to_json(d.decision)},
                                          {"call", to_json(d.call)},
                                          {"fallback_sized", d.fallback_sized},
                                          {"deferred", deferred}});
      memory.actions[ticker] = action_label(d.decision) + (deferred ? " at next open" : "");
      if (deferred) {
        fund.pending.push_back({trading_date, d.decision});
        continue;
      }
      ExecutionResult r = execute_decision(fund, d.decision, closes.at(ticker), as_of);
      fund = std::move(r.fund);
      if (r.fill) {
        event(EventType::OrderFilled, Json{{"ticker", ticker.str()},
                                           {"fill", to_json(*r.fill)},
                                           {"requested", d.decision.quantity.value_or(0)},
                                           {"clamp_reason", r.clamp_reason ? Json(*r.clamp_reason) : Json(nullptr)},
                                           {"pending_from", nullptr}});
        record.fills.push_back(*r.fill);
      } else if (r.skipped) {
        event(EventType::OrderSkipped,
              Json{{"ticker", ticker.str()}, {"skip", to_json(*r.skipped)}, {"pending_from", nullptr}});
        record.skipped.push_back(*r.skipped);
      }
    }
    for (const auto& f : record.fills) fill_lines.push_back(fill_line(f));
    for (const auto& k : record.skipped) fill_lines.push_back("skipped " + k.ticker.str() + ": " + k.reason);

    record.nav_snapshot = mark_to_market(fund, closes, as_of);
    record_marks(fund, closes);
    Json closes_json = Json::object();
    for (const auto& [t, c] : closes) closes_json[t.str()] = to_json(c);
    event(EventType::NavMarked, Json{{"nav", to_json(record.nav_snapshot)}, {"closes", closes_json}});

    memory.nav = record.nav_snapshot.nav;
    memory.fill_summary = fill_lines.empty() ? "no trades" : "";
    for (std::size_t i = 0; i < fill_lines.size(); ++i) memory.fill_summary += (i ? "; " : "") + fill_lines[i];
    fund = append_memory(fund, memory);
    event(EventType::MemoryAppended, Json{{"entry", to_json(memory)}});
    event(EventType::CycleCompleted, Json{{"run_id", run_id},
                                          {"nav", to_json(record.nav_snapshot.nav)},
                                          {"llm_call_ids", record.llm_call_ids}});
    record.timings_ms["decide"] = elapsed_ms(t0);
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    const ErrorCode code = err ? err->code() : ErrorCode::Internal;
    spdlog::warn("cycle {} {} failed: {}", fund_id, date, e.what());
    std::vector<std::pair<EventType, Json>> failed;
    failed.push_back(std::move(events.front()));
    failed.emplace_back(EventType::CycleFailed, Json{{"trading_date", date},
                                                     {"run_id", run_id},
                                                     {"code", std::string(to_string(code))},
                                                     {"reason", e.what()}});
    append_locked(fund_id, as_of.instant, std::move(failed));
    {
      std::lock_guard lock(funds_mu_);
      if (auto it = states_.find(fund_id); it != states_.end()) it->second.last_seq = store_.last_seq(fund_id);
    }
    if (err) throw;
    fail(ErrorCode::Internal, e.what());
  }

  auto t0 = Clock::now();
  const std::int64_t last = append_locked(fund_id, as_of.instant, std::move(events));
  record.timings_ms["persist"] = elapsed_ms(t0);

  after.nav_series.points.push_back({trading_date, record.nav_snapshot.nav});
  after.nav_snapshots.push_back(record.nav_snapshot);
  after.fills.insert(after.fills.end(), record.fills.begin(), record.fills.end());
  after.last_cycle_date = trading_date;
  after.last_seq = last;
  {
    std::lock_guard lock(funds_mu_);
    states_[fund_id] = std::move(after);
  }
  if (!run_id.empty()) {
    update_run(run_id, [&](ArenaRun& r) {
      r.clock = as_of;
      ++r.cycles_completed;
    });
  }
  spdlog::info("{} {} nav {} ({} fills)", fund_id, date, record.nav_snapshot.nav.to_string(), record.fills.size());
  return record;
}

// --- runs ------------------------------------------------------------------

std::string Arena::allocate_run_id() {
  int next = 0;
  for (const auto& [id, slot] : runs_) next = std::max(next, number_of(id));
  return numbered("run", next + 1);
}

void Arena::persist_run(const ArenaRun& run) const {
  const fs::path dir = config_.data_dir / "runs";
  fs::create_directories(dir);
  const fs::path tmp = dir / (run.run_id + ".json.tmp");
  {
    std::ofstream out(tmp);
    out << canonical(to_json(run)) << "\n";
    if (!out) fail(ErrorCode::StorageFailure, "cannot write run record " + run.run_id);
  }
  fs::rename(tmp, dir / (run.run_id + ".json"));
}

void Arena::update_run(const std::string& run_id, const std::function<void(ArenaRun&)>& change) {
  std::lock_guard lock(runs_mu_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) return;
  change(it->second->run);
  persist_run(it->second->run);
  it->second->cv.notify_all();
}

ArenaRun Arena::run(const std::string& run_id) const {
  std::lock_guard lock(runs_mu_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) fail(ErrorCode::UnknownRun, "unknown run " + run_id);
  return it->second->run;
}

std::vector<ArenaRun> Arena::runs() const {
  std::lock_guard lock(runs_mu_);
  std::vector<ArenaRun> out;
  for (const auto& [id, slot] : runs_) out.push_back(slot->run);
  return out;
}

ArenaRun Arena::wait(const std::string& run_id) {
  std::unique_lock lock(runs_mu_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) fail(ErrorCode::UnknownRun, "unknown run " + run_id);
  RunSlot& slot = *it->second;
  slot.cv.wait(lock, [&] {
    return !slot.worker_active && (slot.run.status == RunStatus::Completed || slot.run.status == RunStatus::Failed);
  });
  return slot.run;
}

void Arena::worker_done(const std::string& run_id) {
  std::lock_guard lock(runs_mu_);
  RunSlot& slot = *runs_.at(run_id);
  slot.worker_active = false;
  slot.cv.notify_all();
}

ArenaRun Arena::control(const std::string& run_id, RunCommand command) {
  std::lock_guard lock(runs_mu_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) fail(ErrorCode::UnknownRun, "unknown run " + run_id);
  RunSlot& slot = *it->second;
  slot.run.status = next_status(slot.run.status, command);
  switch (command) {
    case RunCommand::Pause: slot.pause_requested = true; break;
    case RunCommand::Resume: slot.pause_requested = false; break;
    case RunCommand::Abort:
      slot.abort_requested = true;
      slot.run.cause = "aborted";
      break;
  }
  persist_run(slot.run);
  slot.cv.notify_all();
  return slot.run;
}

void Arena::record_control(const ArenaRun& run, std::string_view command, Instant ts) {
  std::lock_guard lock(fund_mutex(run.fund_id));
  append_locked(run.fund_id, ts,
                {{EventType::RunControl, Json{{"run_id", run.run_id},
                                              {"command", std::string(command)},
                                              {"status", std::string(to_string(run.status))},
                                              {"mode", std::string(to_string(run.mode))},
                                              {"llm_mode", std::string(to_string(gateway_->mode()))},
                                              {"from", date_or_null(run.from)},
                                              {"to", date_or_null(run.to)},
                                              {"contaminated", run.contaminated},
                                              {"cause", run.cause ? Json(*run.cause) : Json(nullptr)}}}});
  std::lock_guard cache(funds_mu_);
  if (auto it = states_.find(run.fund_id); it != states_.end()) {
    it->second.last_seq = store_.last_seq(run.fund_id);
    if (run.contaminated) it->second.contaminated = true;
  }
}

bool Arena::await_boundary(const std::string& run_id) {
  std::unique_lock lock(runs_mu_);
  RunSlot& slot = *runs_.at(run_id);
  if (slot.abort_requested || shutting_down_) return false;
  if (!slot.pause_requested) return true;
  ArenaRun snapshot = slot.run;
  lock.unlock();
  const Instant ts = snapshot.clock ? snapshot.clock->instant : market_->clock().as_of(*snapshot.from).instant;
  record_control(snapshot, "PAUSE", ts);
  lock.lock();
  slot.cv.wait(lock, [&] { return !slot.pause_requested || slot.abort_requested || shutting_down_; });
  if (slot.abort_requested || shutting_down_) return false;
  snapshot = slot.run;
  lock.unlock();
  record_control(snapshot, "RESUME", ts);
  return true;
}

ArenaRun Arena::prepare_replay(const std::string& fund_id, Date from, Date to, const ReplayOptions& options) {
  const FundState state = cached_state(fund_id);
  if (to < from) fail(ErrorCode::ValidationFailed, "from must not be after to");

  bool contaminated = false;
  if (state.model.knowledge_cutoff && *state.model.knowledge_cutoff >= from) {
    if (!options.allow_contaminated) {
      fail(ErrorCode::CutoffViolation, "model " + state.model.spec_id + " has knowledge cutoff " +
                                           format_date(*state.model.knowledge_cutoff) +
                                           ", on or after the replay start " + format_date(from));
    }
    contaminated = true;
  }

  if (options.single_cycle) {
    check_cycle_preconditions(state, from);
  } else {
    const auto days = market_->trading_days(from, to);
    const auto first = market_->first_bar_date();
    const auto all = first ? market_->trading_days(*first, to) : std::vector<Date>{};
    // Weekdays outside the data's span count as gaps; inside it, a weekday no
    // ticker traded is a holiday.
    for (Date d = from; d <= to; d += std::chrono::days{1}) {
      if (is_weekend(d)) continue;
      const bool before_data = !first || d < *first;
      const bool after_data = all.empty() || d > all.back();
      if (before_data || after_data) fail(ErrorCode::DatasetGap, "dataset has no bars on " + format_date(d));
    }
    for (Date d : days) {
      for (const auto& t : state.fund.stock_pool) {
        if (!market_->has_bar(t, d)) {
          fail(ErrorCode::DatasetGap, "dataset has no bar for " + t.str() + " on " + format_date(d));
        }
      }
    }
    if (days.empty()) fail(ErrorCode::DatasetGap, "no trading days between " + format_date(from) + " and " + format_date(to));
    check_cycle_preconditions(state, days.front());
  }

  std::lock_guard lock(runs_mu_);
  for (const auto& [id, slot] : runs_) {
    const auto s = slot->run.status;
    if (slot->run.fund_id == fund_id &&
        (s == RunStatus::Created || s == RunStatus::Running || s == RunStatus::Paused)) {
      fail(ErrorCode::FundBusy, fund_id + " already has active run " + id);
    }
  }
  auto slot = std::make_unique<RunSlot>();
  slot->run.run_id = allocate_run_id();
  slot->run.fund_id = fund_id;
  slot->run.mode = RunMode::Replay;
  slot->run.from = from;
  slot->run.to = to;
  slot->run.contaminated = contaminated;
  persist_run(slot->run);
  ArenaRun out = slot->run;
  runs_.emplace(out.run_id, std::move(slot));
  return out;
}

void Arena::execute_replay(const std::string& run_id, std::vector<CycleRecord>* records) {
  ArenaRun run;
  // An ABORT may already have landed while the run was still CREATED.
  update_run(run_id, [&](ArenaRun& r) {
    if (r.status == RunStatus::Created) r.status = RunStatus::Running;
    run = r;
  });
  const Instant start_ts = market_->clock().as_of(*run.from).instant;
  auto finish = [&](RunStatus status, std::string_view command, std::optional<std::string> cause,
                    std::optional<std::string> code) {
    ArenaRun final_run;
    update_run(run_id, [&](ArenaRun& r) {
      if (r.status != RunStatus::Failed || !r.cause) {
        r.status = status;
        r.cause = std::move(cause);
        r.error_code = std::move(code);
      }
      final_run = r;
    });
    if (final_run.cause == "aborted") command = "ABORT";
    const Instant ts = final_run.clock ? final_run.clock->instant : start_ts;
    try {
      record_control(final_run, command, ts);
    } catch (const std::exception& e) {
      spdlog::error("could not record {} for {}: {}", command, run_id, e.what());
    }
  };

  try {
    record_control(run, "START", start_ts);
  } catch (const Error& e) {
    finish(RunStatus::Failed, "FAIL", std::string(e.what()), std::string(to_string(e.code())));
    return;
  }

  const std::vector<Date> days = market_->trading_days(*run.from, *run.to);
  for (Date d : days) {
    if (!await_boundary(run_id)) {
      bool shutdown;
      {
        std::lock_guard lock(runs_mu_);
        shutdown = shutting_down_ && !runs_.at(run_id)->abort_requested;
      }
      if (shutdown) {
        update_run(run_id, [](ArenaRun& r) {
          r.status = RunStatus::Failed;
          r.cause = "interrupted";
        });
      } else {
        finish(RunStatus::Failed, "ABORT", "aborted", std::nullopt);
      }
      return;
    }
    try {
      std::lock_guard lock(fund_mutex(run.fund_id));
      CycleRecord rec = cycle_locked(run.fund_id, d, run_id);
      if (records) records->push_back(std::move(rec));
    } catch (const Error& e) {
      finish(RunStatus::Failed, "FAIL", std::string(e.what()), std::string(to_string(e.code())));
      return;
    }
  }
  if (!await_boundary(run_id)) {
    finish(RunStatus::Failed, "ABORT", "aborted", std::nullopt);
    return;
  }
  finish(RunStatus::Completed, "COMPLETE", std::nullopt, std::nullopt);
}

ReplayResult Arena::run_replay(const std::string& fund_id, Date from, Date to, const ReplayOptions& options) {
  const ArenaRun prepared = prepare_replay(fund_id, from, to, options);
  ReplayResult result;
  execute_replay(prepared.run_id, &result.records);
  result.run = run(prepared.run_id);
  return result;
}

ArenaRun Arena::start_replay(const std::string& fund_id, Date from, Date to, const ReplayOptions& options) {
  const ArenaRun prepared = prepare_replay(fund_id, from, to, options);
  std::lock_guard lock(runs_mu_);
  RunSlot& slot = *runs_.at(prepared.run_id);
  slot.worker_active = true;
  slot.worker = std::thread([this, id = prepared.run_id] {
    execute_replay(id, nullptr);
    worker_done(id);
  });
  return prepared;
}

ArenaRun Arena::start_live(const std::string& fund_id, std::shared_ptr<MarketProvider> provider,
                           std::chrono::milliseconds poll) {
  const FundState state = cached_state(fund_id);
  ArenaRun run;
  {
    std::lock_guard lock(runs_mu_);
    for (const auto& [id, slot] : runs_) {
      const auto s = slot->run.status;
      if (slot->run.fund_id == fund_id &&
          (s == RunStatus::Created || s == RunStatus::Running || s == RunStatus::Paused)) {
        fail(ErrorCode::FundBusy, fund_id + " already has active run " + id);
      }
    }
    auto slot = std::make_unique<RunSlot>();
    slot->run.run_id = allocate_run_id();
    slot->run.fund_id = fund_id;
    slot->run.mode = RunMode::Live;
    slot->run.status = RunStatus::Running;
    slot->run.from = state.last_cycle_date ? *state.last_cycle_date + std::chrono::days{1}
                                           : state.fund.inception.trading_date;
    persist_run(slot->run);
    run = slot->run;
    runs_.emplace(run.run_id, std::move(slot));
  }
  record_control(run, "START", market_->clock().as_of(*run.from).instant);

  std::lock_guard lock(runs_mu_);
  RunSlot& slot = *runs_.at(run.run_id);
  slot.worker_active = true;
  slot.worker = std::thread([this, run, provider, poll] {
    live_loop(run, provider, poll);
    worker_done(run.run_id);
  });
  return run;
}

void Arena::live_loop(const ArenaRun& run, const std::shared_ptr<MarketProvider>& provider,
                      std::chrono::milliseconds poll) {
  LiveScheduler scheduler(*this, run.fund_id, provider, LiveOptions{}, run.run_id);
  while (await_boundary(run.run_id)) {
    try {
      const TickResult r = scheduler.tick(now_utc());
      if (r.deferred_reason) spdlog::warn("live {} deferred: {}", run.run_id, *r.deferred_reason);
    } catch (const Error& e) {
      update_run(run.run_id, [&](ArenaRun& a) {
        a.status = RunStatus::Failed;
        a.cause = e.what();
        a.error_code = std::string(to_string(e.code()));
      });
      return;
    }
    std::unique_lock wait_lock(runs_mu_);
    RunSlot& slot = *runs_.at(run.run_id);
    slot.cv.wait_for(wait_lock, poll, [&] { return slot.abort_requested || slot.pause_requested || shutting_down_; });
  }
  ArenaRun final_run = this->run(run.run_id);
  if (final_run.status == RunStatus::Failed && final_run.cause == "aborted") {
    record_control(final_run, "ABORT", final_run.clock ? final_run.clock->instant : now_utc());
  } else {
    update_run(run.run_id, [](ArenaRun& a) {
      a.status = RunStatus::Failed;
      a.cause = "interrupted";
    });
  }
}

std::vector<fs::path> Arena::cassette_files(const std::string& fund_id) const {
  std::vector<fs::path> out;
  for (const auto& r : runs()) {
    if (r.fund_id != fund_id) continue;
    const fs::path p = config_.data_dir / "cassettes" / (r.run_id + ".jsonl");
    if (fs::exists(p)) out.push_back(p);
  }
  return out;
}

// --- live scheduling ---------------------------------------------------------

LiveScheduler::LiveScheduler(Arena& arena, std::string fund_id, std::shared_ptr<MarketProvider> provider,
                             LiveOptions options, std::string run_id)
    : arena_(arena),
      fund_id_(std::move(fund_id)),
      provider_(std::move(provider)),
      options_(std::move(options)),
      run_id_(std::move(run_id)) {
  const FundState state = arena_.fund_state(fund_id_);
  cursor_ = state.last_cycle_date ? *state.last_cycle_date + std::chrono::days{1} : state.fund.inception.trading_date;
}

TickResult LiveScheduler::tick(Instant now) {
  TickResult result;
  if (paused_) return result;
  if (retry_at_ && now < *retry_at_) {
    result.retry_at = retry_at_;
    return result;
  }
  retry_at_.reset();

  const MarketClock& clock = arena_.market().clock();
  const auto trigger = options_.trigger_time.value_or(clock.sample_time);
  const FundState state = arena_.fund_state(fund_id_);
  const std::vector<Ticker> pool(state.fund.stock_pool.begin(), state.fund.stock_pool.end());

  auto defer = [&](const std::string& reason) {
    const auto& backoff = options_.retry_backoff;
    const auto wait = backoff.empty() ? std::chrono::seconds{0} : backoff[std::min(failures_, backoff.size() - 1)];
    ++failures_;
    retry_at_ = now + wait;
    result.retry_at = retry_at_;
    result.deferred_reason = reason;
  };

  while (at_time(cursor_, trigger) <= now) {
    const Date d = cursor_;
    if (is_weekend(d)) {
      cursor_ += std::chrono::days{1};
      continue;
    }
    if (provider_) {
      try {
        const Date from = d - std::chrono::days{arena_.config().windows.insider_window_days};
        refresh_from_provider(arena_.market(), *provider_, pool, from, d, arena_.config().dataset_dir);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ProviderUnavailable) throw;
        defer(e.what());
        return result;
      }
    }
    if (!arena_.market().is_trading_day(d)) {
      result.holidays.push_back(d);
      cursor_ += std::chrono::days{1};
      continue;
    }
    try {
      arena_.run_cycle(fund_id_, d, run_id_);
      result.completed.push_back(d);
      failures_ = 0;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OutOfOrder) {
        cursor_ += std::chrono::days{1};
        continue;
      }
      if (!defers_cycle(e.code())) throw;
      defer(e.what());
      return result;
    }
    cursor_ += std::chrono::days{1};
  }
  return result;
}

}  // namespace arena
