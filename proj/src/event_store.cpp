#include "arena/event_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "arena/error.hpp"

namespace arena {
namespace fs = std::filesystem;
namespace {

constexpr std::pair<EventType, std::string_view> kEventNames[] = {
    {EventType::FundCreated, "FundCreated"},       {EventType::CycleStarted, "CycleStarted"},
    {EventType::PlanMade, "PlanMade"},             {EventType::SignalEmitted, "SignalEmitted"},
    {EventType::DecisionMade, "DecisionMade"},     {EventType::OrderFilled, "OrderFilled"},
    {EventType::OrderSkipped, "OrderSkipped"},     {EventType::NavMarked, "NavMarked"},
    {EventType::MemoryAppended, "MemoryAppended"}, {EventType::CycleCompleted, "CycleCompleted"},
    {EventType::CycleFailed, "CycleFailed"},       {EventType::RunControl, "RunControl"},
};

void check_fund_id(const std::string& fund_id) {
  const bool ok = !fund_id.empty() && fund_id.size() <= 64 &&
                  std::all_of(fund_id.begin(), fund_id.end(), [](char c) {
                    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
                  });
  if (!ok) fail(ErrorCode::UnknownFund, "invalid fund id '" + fund_id + "'");
}

void remove_pending(Fund& fund, const Json& payload) {
  auto it = payload.find("pending_from");
  if (it == payload.end() || it->is_null()) return;
  const Date decided = parse_date(it->get<std::string>());
  const Ticker ticker(payload.at("ticker").get<std::string>());
  auto p = std::find_if(fund.pending.begin(), fund.pending.end(), [&](const PendingOrder& o) {
    return o.decided_on == decided && o.decision.ticker == ticker;
  });
  if (p == fund.pending.end()) fail(ErrorCode::CorruptLog, "pending order not found for " + ticker.str());
  fund.pending.erase(p);
}

void write_all(int fd, const std::string& data, std::size_t limit) {
  std::size_t done = 0;
  const std::size_t total = std::min(limit, data.size());
  while (done < total) {
    const ssize_t n = ::write(fd, data.data() + done, total - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::system_error(errno, std::generic_category(), "write");
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string_view to_string(EventType type) {
  for (const auto& [t, name] : kEventNames)
    if (t == type) return name;
  return "FundCreated";
}

std::optional<EventType> event_type_from(std::string_view text) {
  for (const auto& [t, name] : kEventNames)
    if (name == text) return t;
  return std::nullopt;
}

Json to_json(const ArenaEvent& e) {
  return Json{{"seq", e.seq}, {"ts", format_instant(e.ts)}, {"type", std::string(to_string(e.type))}, {"payload", e.payload}};
}

ArenaEvent event_from_json(const Json& obj) {
  ArenaEvent e;
  e.seq = require_int(obj, "seq");
  e.ts = require_instant(obj, "ts");
  auto type = event_type_from(require_string(obj, "type"));
  if (!type) fail(ErrorCode::ValidationFailed, "unknown event type");
  e.type = *type;
  e.payload = require(obj, "payload");
  if (!e.payload.is_object()) fail(ErrorCode::ValidationFailed, "payload must be an object");
  return e;
}

Json to_json(const FundState& s) {
  Json fills = Json::array();
  for (const auto& f : s.fills) fills.push_back(to_json(f));
  Json navs = Json::array();
  for (const auto& n : s.nav_snapshots) navs.push_back(to_json(n));
  return Json{{"fund", to_json(s.fund)},
              {"model_spec", to_json(s.model)},
              {"nav_series", to_json(s.nav_series)},
              {"nav_snapshots", navs},
              {"fills", fills},
              {"last_cycle_date", s.last_cycle_date ? Json(format_date(*s.last_cycle_date)) : Json(nullptr)},
              {"contaminated", s.contaminated}};
}

FundState fold_events(std::span<const ArenaEvent> events) {
  FundState committed;
  std::optional<FundState> staged;
  bool created = false;

  for (std::size_t i = 0; i < events.size(); ++i) {
    const ArenaEvent& e = events[i];
    const std::int64_t expected = static_cast<std::int64_t>(i) + 1;
    if (e.seq != expected) fail(ErrorCode::CorruptLog, "corrupt log at seq " + std::to_string(expected));
    try {
      if (!created && e.type != EventType::FundCreated) fail(ErrorCode::CorruptLog, "log does not start with FundCreated");
      FundState& s = staged ? *staged : committed;
      const Json& p = e.payload;
      switch (e.type) {
        case EventType::FundCreated:
          if (created) fail(ErrorCode::CorruptLog, "duplicate FundCreated");
          committed.fund = fund_from_json(p.at("fund"));
          committed.model = model_spec_from_json(p.at("model_spec"));
          created = true;
          break;
        case EventType::CycleStarted:
          if (staged) fail(ErrorCode::CorruptLog, "nested CycleStarted");
          staged = committed;
          break;
        case EventType::PlanMade:
        case EventType::SignalEmitted:
          break;
        case EventType::DecisionMade:
          if (p.value("deferred", false)) {
            s.fund.pending.push_back({parse_date(p.at("trading_date").get<std::string>()), decision_from_json(p.at("decision"))});
          }
          break;
        case EventType::OrderFilled: {
          remove_pending(s.fund, p);
          TradeFill fill = fill_from_json(p.at("fill"));
          apply_fill(s.fund, fill);
          s.fills.push_back(std::move(fill));
          break;
        }
        case EventType::OrderSkipped:
          remove_pending(s.fund, p);
          break;
        case EventType::NavMarked: {
          NavSnapshot nav = nav_from_json(p.at("nav"));
          std::map<Ticker, Decimal> closes;
          for (const auto& [t, v] : p.at("closes").items()) closes[Ticker(t)] = decimal_from_json(v, "closes");
          record_marks(s.fund, closes);
          s.nav_series.points.push_back({nav.as_of.trading_date, nav.nav});
          s.nav_snapshots.push_back(nav);
          break;
        }
        case EventType::MemoryAppended:
          s.fund = append_memory(s.fund, memory_entry_from_json(p.at("entry")));
          break;
        case EventType::CycleCompleted:
          if (!staged) fail(ErrorCode::CorruptLog, "CycleCompleted without CycleStarted");
          staged->last_cycle_date = parse_date(p.at("trading_date").get<std::string>());
          committed = std::move(*staged);
          staged.reset();
          break;
        case EventType::CycleFailed:
          if (!staged) fail(ErrorCode::CorruptLog, "CycleFailed without CycleStarted");
          staged.reset();
          break;
        case EventType::RunControl:
          if (p.value("contaminated", false)) s.contaminated = true;
          break;
      }
    } catch (const Error& err) {
      if (err.code() == ErrorCode::CorruptLog) throw;
      fail(ErrorCode::CorruptLog, "corrupt log at seq " + std::to_string(e.seq) + ": " + err.what());
    } catch (const std::exception& ex) {
      fail(ErrorCode::CorruptLog, "corrupt log at seq " + std::to_string(e.seq) + ": " + ex.what());
    }
  }
  if (!created) fail(ErrorCode::CorruptLog, "empty log");
  committed.last_seq = static_cast<std::int64_t>(events.size());
  return committed;
}

EventStore::EventStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  fs::create_directories(data_dir_ / "funds");
}

fs::path EventStore::log_path(const std::string& fund_id) const {
  check_fund_id(fund_id);
  return data_dir_ / "funds" / fund_id / "events.jsonl";
}

void EventStore::set_write_fault_hook(WriteFaultHook hook) {
  std::lock_guard lock(mu_);
  fault_hook_ = std::move(hook);
}

void EventStore::reset_index() {
  std::lock_guard lock(mu_);
  index_.clear();
}

const std::vector<ArenaEvent>& EventStore::load_locked(const std::string& fund_id) const {
  if (auto it = index_.find(fund_id); it != index_.end()) return it->second;
  const fs::path path = log_path(fund_id);
  if (!fs::exists(path)) fail(ErrorCode::UnknownFund, "unknown fund " + fund_id);
  std::ifstream in(path, std::ios::binary);
  std::vector<ArenaEvent> events;
  std::string line;
  std::int64_t expected = 1;
  while (std::getline(in, line)) {
    // A final line without its newline is a torn write.
    const bool torn = in.eof();
    try {
      if (torn) throw std::runtime_error("truncated line");
      ArenaEvent e = event_from_json(Json::parse(line));
      if (e.seq != expected) throw std::runtime_error("sequence gap");
      events.push_back(std::move(e));
    } catch (const std::exception& ex) {
      fail(ErrorCode::CorruptLog, "corrupt log for " + fund_id + " at seq " + std::to_string(expected) + ": " + ex.what());
    }
    ++expected;
  }
  return index_.emplace(fund_id, std::move(events)).first->second;
}

std::int64_t EventStore::append(const std::string& fund_id, std::span<const ArenaEvent> events) {
  check_fund_id(fund_id);
  std::lock_guard lock(mu_);
  const fs::path path = log_path(fund_id);
  const bool is_new = !fs::exists(path);
  std::int64_t last = 0;
  if (!is_new) {
    const auto& existing = load_locked(fund_id);
    last = existing.empty() ? 0 : existing.back().seq;
  }
  if (events.empty()) return last;

  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].seq != last + 1 + static_cast<std::int64_t>(i)) {
      fail(ErrorCode::SeqConflict, "expected seq " + std::to_string(last + 1 + static_cast<std::int64_t>(i)) +
                                       " for " + fund_id + ", got " + std::to_string(events[i].seq));
    }
  }

  std::string buffer;
  for (const auto& e : events) {
    buffer += canonical(to_json(e));
    buffer += '\n';
  }

  fs::create_directories(path.parent_path());
  const auto previous_size = is_new ? 0 : fs::file_size(path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) fail(ErrorCode::StorageFailure, "cannot open " + path.string() + ": " + std::strerror(errno));
  try {
    std::optional<std::size_t> fault;
    if (fault_hook_) fault = fault_hook_(fund_id, events);
    write_all(fd, buffer, fault.value_or(buffer.size()));
    if (fault) throw std::runtime_error("injected write failure");
    if (::fsync(fd) != 0) throw std::system_error(errno, std::generic_category(), "fsync");
    ::close(fd);
  } catch (const std::exception& ex) {
    ::close(fd);
    std::error_code ec;
    if (is_new) {
      fs::remove(path, ec);
    } else {
      fs::resize_file(path, previous_size, ec);
    }
    fail(ErrorCode::StorageFailure, "append to " + fund_id + " failed: " + ex.what());
  }

  auto& cached = index_[fund_id];
  cached.insert(cached.end(), events.begin(), events.end());
  return events.back().seq;
}

bool EventStore::exists(const std::string& fund_id) const {
  try {
    return fs::exists(log_path(fund_id));
  } catch (const Error&) {
    return false;
  }
}

std::vector<std::string> EventStore::fund_ids() const {
  std::vector<std::string> out;
  const fs::path dir = data_dir_ / "funds";
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (fs::exists(entry.path() / "events.jsonl")) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::int64_t EventStore::last_seq(const std::string& fund_id) const {
  std::lock_guard lock(mu_);
  const auto& events = load_locked(fund_id);
  return events.empty() ? 0 : events.back().seq;
}

std::vector<ArenaEvent> EventStore::events(const std::string& fund_id) const {
  std::lock_guard lock(mu_);
  return load_locked(fund_id);
}

EventPage EventStore::query(const std::string& fund_id, const EventFilter& filter) const {
  const auto all = events(fund_id);
  std::vector<const ArenaEvent*> matching;
  for (const auto& e : all) {
    if (!filter.types.empty() && !filter.types.contains(e.type)) continue;
    const Date day = date_of(e.ts);
    if (filter.from && day < *filter.from) continue;
    if (filter.to && day > *filter.to) continue;
    if (filter.ticker) {
      auto t = e.payload.find("ticker");
      if (t == e.payload.end() || !t->is_string() || t->get<std::string>() != filter.ticker->str()) continue;
    }
    matching.push_back(&e);
  }
  EventPage page;
  page.total = matching.size();
  page.limit = filter.limit;
  page.offset = filter.offset;
  for (std::size_t i = filter.offset; i < matching.size() && page.events.size() < filter.limit; ++i) {
    page.events.push_back(*matching[i]);
  }
  return page;
}

FundState EventStore::fold_fund(const std::string& fund_id) const { return fold_events(events(fund_id)); }

}  // namespace arena
