#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "arena/canonical_json.hpp"
#include "arena/llm_gateway.hpp"
#include "arena/metrics.hpp"
#include "arena/portfolio.hpp"

namespace arena {

enum class EventType {
  FundCreated,
  CycleStarted,
  PlanMade,
  SignalEmitted,
  DecisionMade,
  OrderFilled,
  OrderSkipped,
  NavMarked,
  MemoryAppended,
  CycleCompleted,
  CycleFailed,
  RunControl,
};

std::string_view to_string(EventType type);
std::optional<EventType> event_type_from(std::string_view text);

struct ArenaEvent {
  std::int64_t seq = 0;
  /// Arena (logical) time of the event, not wall-clock time.
  Instant ts;
  EventType type = EventType::FundCreated;
  Json payload = Json::object();
};

Json to_json(const ArenaEvent& event);
ArenaEvent event_from_json(const Json& obj);

struct EventFilter {
  std::set<EventType> types;
  std::optional<Date> from;
  std::optional<Date> to;
  std::optional<Ticker> ticker;
  std::size_t limit = 100;
  std::size_t offset = 0;
};

struct EventPage {
  std::vector<ArenaEvent> events;
  std::size_t total = 0;
  std::size_t limit = 0;
  std::size_t offset = 0;
};

/// Everything derivable from one fund's log.
struct FundState {
  Fund fund;
  ModelSpec model;
  NavSeries nav_series;
  std::vector<NavSnapshot> nav_snapshots;
  std::vector<TradeFill> fills;
  std::optional<Date> last_cycle_date;
  std::int64_t last_seq = 0;
  bool contaminated = false;
};

/// Canonical form used for byte-level equality of fund states.
Json to_json(const FundState& state);

/// Left fold of an event sequence. CorruptLog on a malformed or out-of-order
/// event. Cycle events are staged and committed only at CycleCompleted.
FundState fold_events(std::span<const ArenaEvent> events);

/// Test hook: given the batch about to be written, return how many bytes to
/// write before simulating a device failure (nullopt = no failure).
using WriteFaultHook = std::function<std::optional<std::size_t>(const std::string& fund_id,
                                                                std::span<const ArenaEvent> batch)>;

/// Append-only JSONL log per fund at <data_dir>/funds/<fund_id>/events.jsonl,
/// with an in-process index. One writer per fund; readers only ever see
/// fully appended batches.
class EventStore {
 public:
  explicit EventStore(std::filesystem::path data_dir);

  /// All-or-nothing: either the whole batch is durable or the file is
  /// restored to its previous length. Returns the last seq.
  std::int64_t append(const std::string& fund_id, std::span<const ArenaEvent> events);

  bool exists(const std::string& fund_id) const;
  std::vector<std::string> fund_ids() const;
  std::int64_t last_seq(const std::string& fund_id) const;
  std::vector<ArenaEvent> events(const std::string& fund_id) const;
  EventPage query(const std::string& fund_id, const EventFilter& filter) const;
  FundState fold_fund(const std::string& fund_id) const;

  std::filesystem::path log_path(const std::string& fund_id) const;
  const std::filesystem::path& data_dir() const { return data_dir_; }

  void set_write_fault_hook(WriteFaultHook hook);
  /// Drops the in-memory index so the next read reloads from disk.
  void reset_index();

 private:
  const std::vector<ArenaEvent>& load_locked(const std::string& fund_id) const;

  std::filesystem::path data_dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::vector<ArenaEvent>> index_;
  WriteFaultHook fault_hook_;
};

}  // namespace arena
