#include "arena/fixture.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>

#include "arena/error.hpp"

namespace arena {
namespace fs = std::filesystem;
namespace {

constexpr std::array<std::string_view, 4> kKinds{"bars", "news", "fundamentals", "insiders"};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

std::string_view fact_kind(const Fact& fact) { return kKinds[fact.index()]; }

Json fact_to_json(const Fact& fact) {
  return std::visit(
      overloaded{
          [](const PriceBar& b) {
            return Json{{"ticker", b.ticker.str()},        {"date", format_date(b.date)},
                        {"open", to_json(b.open)},         {"high", to_json(b.high)},
                        {"low", to_json(b.low)},           {"close", to_json(b.close)},
                        {"volume", b.volume},              {"available_at", format_instant(b.available_at)}};
          },
          [](const NewsItem& n) {
            Json tickers = Json::array();
            for (const auto& t : n.tickers) tickers.push_back(t.str());
            return Json{{"id", n.id},
                        {"tickers", tickers},
                        {"published_at", format_instant(n.published_at)},
                        {"headline", n.headline},
                        {"body", n.body},
                        {"source", n.source}};
          },
          [](const FundamentalSnapshot& f) {
            Json figures = Json::object();
            for (const auto& [k, v] : f.figures) figures[k] = to_json(v);
            return Json{{"ticker", f.ticker.str()},
                        {"report_period", format_date(f.report_period)},
                        {"filed_at", format_instant(f.filed_at)},
                        {"figures", figures}};
          },
          [](const InsiderTransaction& t) {
            return Json{{"ticker", t.ticker.str()},
                        {"filed_at", format_instant(t.filed_at)},
                        {"insider_role", t.insider_role},
                        {"direction", t.direction == TradeDirection::Buy ? "BUY" : "SELL"},
                        {"shares", t.shares},
                        {"price", to_json(t.price)}};
          },
      },
      fact);
}

Fact fact_from_json(const Json& obj, std::string_view kind, const MarketClock& clock) {
  if (kind == "bars") {
    PriceBar b;
    b.ticker = Ticker(require_string(obj, "ticker"));
    b.date = require_date(obj, "date");
    b.open = require_decimal(obj, "open");
    b.high = require_decimal(obj, "high");
    b.low = require_decimal(obj, "low");
    b.close = require_decimal(obj, "close");
    b.volume = require_int(obj, "volume");
    auto it = obj.find("available_at");
    b.available_at = (it == obj.end() || it->is_null()) ? clock.close_of(b.date) : require_instant(obj, "available_at");
    return b;
  }
  if (kind == "news") {
    NewsItem n;
    n.id = require_string(obj, "id");
    const Json& tickers = require(obj, "tickers");
    if (!tickers.is_array()) fail(ErrorCode::ValidationFailed, "news tickers must be an array");
    for (const auto& t : tickers) {
      if (!t.is_string()) fail(ErrorCode::ValidationFailed, "news ticker must be a string");
      n.tickers.emplace_back(t.get<std::string>());
    }
    n.published_at = require_instant(obj, "published_at");
    n.headline = obj.value("headline", "");
    n.body = obj.value("body", "");
    n.source = obj.value("source", "");
    return n;
  }
  if (kind == "fundamentals") {
    FundamentalSnapshot f;
    f.ticker = Ticker(require_string(obj, "ticker"));
    f.report_period = require_date(obj, "report_period");
    f.filed_at = require_instant(obj, "filed_at");
    const Json& figures = require(obj, "figures");
    if (!figures.is_object()) fail(ErrorCode::ValidationFailed, "figures must be an object");
    for (const auto& [k, v] : figures.items()) f.figures[k] = decimal_from_json(v, "figures");
    return f;
  }
  if (kind == "insiders") {
    InsiderTransaction t;
    t.ticker = Ticker(require_string(obj, "ticker"));
    t.filed_at = require_instant(obj, "filed_at");
    t.insider_role = obj.value("insider_role", "");
    const std::string dir = require_string(obj, "direction");
    if (dir == "BUY") {
      t.direction = TradeDirection::Buy;
    } else if (dir == "SELL") {
      t.direction = TradeDirection::Sell;
    } else {
      fail(ErrorCode::ValidationFailed, "insider direction must be BUY or SELL");
    }
    t.shares = require_int(obj, "shares");
    t.price = require_decimal(obj, "price");
    return t;
  }
  fail(ErrorCode::ValidationFailed, "unknown fact kind " + std::string(kind));
}

Json meta_to_json(const DatasetMeta& meta) {
  return Json{{"name", meta.name},
              {"close_time_utc", format_time_of_day(meta.clock.close_time)},
              {"sample_time_utc", format_time_of_day(meta.clock.sample_time)}};
}

DatasetMeta meta_from_json(const Json& obj) {
  DatasetMeta meta;
  meta.name = obj.value("name", "");
  if (obj.contains("close_time_utc")) meta.clock.close_time = parse_time_of_day(require_string(obj, "close_time_utc"));
  if (obj.contains("sample_time_utc")) {
    meta.clock.sample_time = parse_time_of_day(require_string(obj, "sample_time_utc"));
  }
  if (meta.clock.sample_time < meta.clock.close_time) {
    fail(ErrorCode::BadConfig, "sample_time_utc must not precede close_time_utc");
  }
  return meta;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::BadConfig, "dataset directory not found: " + dir.string());
  Dataset ds;
  ds.meta.name = dir.filename().string();
  if (std::ifstream meta{dir / "meta.json"}) {
    try {
      ds.meta = meta_from_json(Json::parse(meta));
    } catch (const Json::exception& e) {
      fail(ErrorCode::BadConfig, "meta.json: " + std::string(e.what()));
    }
  }
  for (auto kind : kKinds) {
    std::ifstream in{dir / (std::string(kind) + ".jsonl")};
    if (!in) continue;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        ds.facts.push_back(fact_from_json(Json::parse(line), kind, ds.meta.clock));
      } catch (const Json::exception& e) {
        fail(ErrorCode::ValidationFailed, std::string(kind) + ".jsonl line " + std::to_string(lineno) + ": " + e.what());
      } catch (const Error& e) {
        fail(ErrorCode::ValidationFailed, std::string(kind) + ".jsonl line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  return ds;
}

namespace {

std::string natural_key(const Fact& fact) {
  return std::visit(overloaded{[](const PriceBar& b) { return b.ticker.str() + "|" + format_date(b.date); },
                               [](const NewsItem& n) { return n.id; },
                               [](const FundamentalSnapshot& f) {
                                 return f.ticker.str() + "|" + format_date(f.report_period) + "|" +
                                        format_instant(f.filed_at);
                               },
                               [](const InsiderTransaction& t) {
                                 return t.ticker.str() + "|" + format_instant(t.filed_at) + "|" + t.insider_role + "|" +
                                        std::to_string(static_cast<int>(t.direction)) + "|" +
                                        std::to_string(t.shares) + "|" + t.price.to_string();
                               }},
                    fact);
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& dataset) {
  fs::create_directories(dir);
  {
    std::ofstream meta{dir / "meta.json"};
    meta << meta_to_json(dataset.meta).dump(2) << "\n";
  }
  // Later duplicates of a natural key replace earlier ones, as on ingest.
  std::array<std::map<std::string, std::string>, 4> by_key;
  for (const auto& fact : dataset.facts) by_key[fact.index()][natural_key(fact)] = canonical(fact_to_json(fact));
  for (std::size_t k = 0; k < kKinds.size(); ++k) {
    std::vector<std::string> lines;
    for (auto& [key, line] : by_key[k]) lines.push_back(std::move(line));
    std::sort(lines.begin(), lines.end());
    std::ofstream out{dir / (std::string(kKinds[k]) + ".jsonl"), std::ios::trunc};
    for (const auto& l : lines) out << l << "\n";
    if (!out) fail(ErrorCode::StorageFailure, "cannot write dataset file in " + dir.string());
  }
}

void append_to_dataset(const fs::path& dir, const std::vector<Fact>& facts) {
  fs::create_directories(dir);
  for (const auto& fact : facts) {
    std::ofstream out{dir / (std::string(fact_kind(fact)) + ".jsonl"), std::ios::app};
    out << canonical(fact_to_json(fact)) << "\n";
    if (!out) fail(ErrorCode::StorageFailure, "cannot append to dataset in " + dir.string());
  }
}

}  // namespace arena
