#pragma once

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "arena/config.hpp"
#include "arena/event_store.hpp"
#include "arena/llm_gateway.hpp"
#include "arena/market_data.hpp"
#include "arena/market_provider.hpp"
#include "arena/metrics.hpp"
#include "arena/pipeline.hpp"
#include "arena/prompts.hpp"

namespace arena {

/// Request body for a new fund.
struct FundSpec {
  std::string name;
  std::string model_spec_id;
  std::set<Ticker> stock_pool;
  Decimal initial_cash;
  FundConfig config;
  /// Defaults to the first trading day of the dataset.
  std::optional<Date> inception;
};

FundSpec fund_spec_from_json(const Json& obj);

/// One completed trading day.
struct CycleRecord {
  std::string fund_id;
  std::string run_id;
  Date trading_date;
  AsOf as_of;
  PlannerPlan plan;
  std::vector<AnalystSignal> signals;
  std::vector<ManagerDecision> decisions;
  std::vector<TradeFill> fills;
  std::vector<SkippedDecision> skipped;
  NavSnapshot nav_snapshot;
  /// Wall-clock phase durations; never persisted in the event log.
  std::map<std::string, std::int64_t> timings_ms;
  std::vector<std::string> llm_call_ids;
};

/// Without timings this is the canonical, comparable form.
Json to_json(const CycleRecord& record, bool with_timings = false);

enum class RunMode { Live, Replay };
enum class RunStatus { Created, Running, Paused, Completed, Failed };
enum class RunCommand { Pause, Resume, Abort };

std::string_view to_string(RunMode mode);
std::string_view to_string(RunStatus status);
std::string_view to_string(RunCommand command);
RunCommand run_command_from(std::string_view text);

struct ArenaRun {
  std::string run_id;
  std::string fund_id;
  RunMode mode = RunMode::Replay;
  RunStatus status = RunStatus::Created;
  /// Latest as-of a cycle of this run ran at; never decreases.
  std::optional<AsOf> clock;
  std::optional<Date> from;
  std::optional<Date> to;
  bool contaminated = false;
  std::int64_t cycles_completed = 0;
  /// Error code and message of the failure, or "aborted" / "interrupted".
  std::optional<std::string> cause;
  std::optional<std::string> error_code;
};

Json to_json(const ArenaRun& run);
ArenaRun run_from_json(const Json& obj);

/// CREATED→RUNNING↔PAUSED→COMPLETED/FAILED, with ABORT failing any live run.
/// Throws IllegalTransition.
RunStatus next_status(RunStatus current, RunCommand command);

struct ReplayOptions {
  bool allow_contaminated = false;
  /// Validate and check only the single date given as `from` (cycle run).
  bool single_cycle = false;
};

struct ReplayResult {
  ArenaRun run;
  std::vector<CycleRecord> records;
};

/// Owns every fund of one data directory: market data, the gateway, the
/// event store and the run registry. Cycles of one fund are serialized;
/// distinct funds run concurrently.
class Arena {
 public:
  /// `gateway` may be supplied by tests; otherwise one is built from config.
  explicit Arena(ArenaConfig config, std::shared_ptr<LlmGateway> gateway = nullptr);
  ~Arena();

  Arena(const Arena&) = delete;
  Arena& operator=(const Arena&) = delete;

  std::string create_fund(const FundSpec& spec);
  std::vector<std::string> fund_ids() const;
  /// Committed state of the fund (UnknownFund if absent).
  FundState fund_state(const std::string& fund_id) const;
  MetricsReport metrics(const std::string& fund_id) const;
  std::vector<LeaderboardRow> leaderboard(std::string_view rank_key = "sharpe") const;

  /// One trading day. Preconditions are checked before anything is written;
  /// after CycleStarted any failure is logged as CycleFailed and rethrown,
  /// leaving the fund as it was.
  CycleRecord run_cycle(const std::string& fund_id, Date trading_date, const std::string& run_id = "");

  /// Synchronous replay; the run stops at the first failed cycle.
  ReplayResult run_replay(const std::string& fund_id, Date from, Date to, const ReplayOptions& options = {});
  /// Same checks as run_replay, then runs in the background.
  ArenaRun start_replay(const std::string& fund_id, Date from, Date to, const ReplayOptions& options = {});
  /// Starts a background live run that ticks every `poll` against the wall
  /// clock and `provider` (which may be null when data arrives otherwise).
  ArenaRun start_live(const std::string& fund_id, std::shared_ptr<MarketProvider> provider,
                      std::chrono::milliseconds poll);

  ArenaRun control(const std::string& run_id, RunCommand command);
  ArenaRun run(const std::string& run_id) const;
  std::vector<ArenaRun> runs() const;
  /// Blocks until the run reaches COMPLETED or FAILED and its worker is done.
  ArenaRun wait(const std::string& run_id);

  EventStore& events() { return store_; }
  const EventStore& events() const { return store_; }
  MarketDataStore& market() { return *market_; }
  const MarketDataStore& market() const { return *market_; }
  LlmGateway& gateway() { return *gateway_; }
  const ArenaConfig& config() const { return config_; }
  const PromptLibrary& prompts() const { return prompts_; }

  /// Cassette files written for the fund's runs, in run order.
  std::vector<std::filesystem::path> cassette_files(const std::string& fund_id) const;

 private:
  friend class LiveScheduler;

  struct RunSlot {
    ArenaRun run;
    bool pause_requested = false;
    bool abort_requested = false;
    /// A background worker still owns the run (it may be finishing a cycle
    /// or writing the final RunControl after the status turned terminal).
    bool worker_active = false;
    std::condition_variable cv;
    std::thread worker;
  };

  std::mutex& fund_mutex(const std::string& fund_id);
  FundState cached_state(const std::string& fund_id) const;
  std::int64_t append_locked(const std::string& fund_id, Instant ts,
                             std::vector<std::pair<EventType, Json>> events);
  CycleRecord cycle_locked(const std::string& fund_id, Date trading_date, const std::string& run_id);
  void check_cycle_preconditions(const FundState& state, Date trading_date) const;
  ArenaRun prepare_replay(const std::string& fund_id, Date from, Date to, const ReplayOptions& options);
  void execute_replay(const std::string& run_id, std::vector<CycleRecord>* records);

  std::string allocate_run_id();
  void persist_run(const ArenaRun& run) const;
  void update_run(const std::string& run_id, const std::function<void(ArenaRun&)>& change);
  /// Blocks while paused; false once the run must stop.
  bool await_boundary(const std::string& run_id);
  void record_control(const ArenaRun& run, std::string_view command, Instant ts);
  void worker_done(const std::string& run_id);
  void live_loop(const ArenaRun& run, const std::shared_ptr<MarketProvider>& provider, std::chrono::milliseconds poll);

  ArenaConfig config_;
  std::shared_ptr<MarketDataStore> market_;
  std::shared_ptr<LlmGateway> gateway_;
  PromptLibrary prompts_;
  EventStore store_;

  mutable std::mutex funds_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> fund_mutexes_;
  mutable std::map<std::string, FundState> states_;

  mutable std::mutex runs_mu_;
  std::map<std::string, std::unique_ptr<RunSlot>> runs_;
  bool shutting_down_ = false;
};

struct LiveOptions {
  /// Time of day (UTC) after which a date's cycle is due. Defaults to the
  /// market clock's sample time.
  std::optional<std::chrono::seconds> trigger_time;
  /// Waits after a provider failure, the last one repeating.
  std::vector<std::chrono::seconds> retry_backoff{std::chrono::seconds{60}, std::chrono::seconds{300},
                                                  std::chrono::seconds{900}};
};

struct TickResult {
  std::vector<Date> completed;
  std::vector<Date> holidays;
  /// Set when the due cycle was deferred; retried at or after this time.
  std::optional<Instant> retry_at;
  std::optional<std::string> deferred_reason;
};

/// Day-by-day live driver with an injectable clock: each tick runs every due
/// weekday in order with its own historical as-of, so downtime turns into
/// catch-up cycles. Weekdays without bars after a refresh are holidays.
class LiveScheduler {
 public:
  LiveScheduler(Arena& arena, std::string fund_id, std::shared_ptr<MarketProvider> provider, LiveOptions options,
                std::string run_id = "");

  TickResult tick(Instant now);
  void pause() { paused_ = true; }
  void resume() { paused_ = false; }
  bool paused() const { return paused_; }
  /// Next date the scheduler will consider.
  Date cursor() const { return cursor_; }

 private:
  Arena& arena_;
  std::string fund_id_;
  std::shared_ptr<MarketProvider> provider_;
  LiveOptions options_;
  std::string run_id_;
  Date cursor_;
  bool paused_ = false;
  std::size_t failures_ = 0;
  std::optional<Instant> retry_at_;
};

}  // namespace arena
