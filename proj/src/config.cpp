#include "arena/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>

#include "arena/error.hpp"
#include "arena/prompts.hpp"

namespace arena {
namespace fs = std::filesystem;
namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string relative_to(const fs::path& base, const fs::path& p) {
  const auto rel = p.lexically_relative(base);
  return (rel.empty() || rel.native().starts_with("..")) ? p.string() : rel.string();
}

FeedEndpoint feed_from_json(const Json& obj) {
  return {obj.value("base_url", ""), obj.value("auth_env_var", "")};
}

Json feed_to_json(const FeedEndpoint& f) { return Json{{"base_url", f.base_url}, {"auth_env_var", f.auth_env_var}}; }

const char* kSampleScript = R"([
  {"role": "manager", "ticker": "AAPL",
   "response": "{\"action\":\"BUY\",\"quantity\":10,\"confidence\":0.8,\"rationale\":\"scripted accumulation\"}"},
  {"role": "manager", "ticker": "MSFT",
   "response": "Here is my call: {\"action\":\"buy\",\"confidence\":0.6,\"rationale\":\"sized by confidence\"}"},
  {"role": "manager", "ticker": "TSLA", "response": "I would rather not say."}
]
)";

void write_file_if_absent(const fs::path& path, std::string_view content) {
  if (fs::exists(path)) return;
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) fail(ErrorCode::StorageFailure, "cannot write " + path.string());
}

}  // namespace

std::string default_key_env(const std::string& provider_name) {
  std::string out = "ARENA_LLM_KEY_";
  for (char c : provider_name) out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_';
  return out;
}

ArenaConfig default_config(const fs::path& data_dir) {
  ArenaConfig c;
  c.data_dir = data_dir;
  c.dataset_dir = data_dir / "datasets" / "sample";
  c.prompts_dir = data_dir / "prompts";
  c.providers.push_back({"mock", "", "", "mock", data_dir / "mock" / "script.json"});
  ModelSpec mock;
  mock.spec_id = "mock-v1";
  mock.provider = "mock";
  mock.model_name = "mock";
  c.models.push_back(mock);
  ModelSpec late = mock;
  late.spec_id = "mock-cutoff-2025-06";
  late.knowledge_cutoff = parse_date("2025-06-30");
  c.models.push_back(late);
  c.llm.cassette_dir = data_dir / "cassettes";
  return c;
}

ArenaConfig load_config(const fs::path& data_dir) {
  const fs::path file = data_dir / "arena.json";
  if (!fs::exists(file)) return default_config(data_dir);
  Json j;
  try {
    std::ifstream in(file);
    j = Json::parse(in);
  } catch (const std::exception& e) {
    fail(ErrorCode::BadConfig, "arena.json: " + std::string(e.what()));
  }
  try {
    ArenaConfig c;
    c.data_dir = data_dir;
    c.dataset_dir = resolve(data_dir, j.value("dataset", "datasets/sample"));
    c.prompts_dir = resolve(data_dir, j.value("prompts", "prompts"));
    for (const auto& p : j.value("providers", Json::array())) {
      ProviderProfile profile = provider_profile_from_json(p);
      if (profile.script) profile.script = resolve(data_dir, profile.script->string());
      if (profile.wire_dialect != "mock" && !p.contains("auth_env_var")) profile.auth_env_var = default_key_env(profile.name);
      c.providers.push_back(std::move(profile));
    }
    for (const auto& m : j.value("models", Json::array())) c.models.push_back(model_spec_from_json(m));
    if (auto ctx = j.find("context"); ctx != j.end()) {
      c.windows.price_lookback = ctx->value("price_lookback", c.windows.price_lookback);
      c.windows.news_window_days = ctx->value("news_window_days", c.windows.news_window_days);
      c.windows.insider_window_days = ctx->value("insider_window_days", c.windows.insider_window_days);
      if (c.windows.price_lookback <= 0 || c.windows.news_window_days < 0 || c.windows.insider_window_days < 0) {
        fail(ErrorCode::BadConfig, "context windows must be non-negative");
      }
    }
    c.llm.cassette_dir = data_dir / "cassettes";
    if (auto llm = j.find("llm"); llm != j.end()) {
      c.llm.mode = llm_mode_from(llm->value("mode", "live"));
      c.llm.max_concurrency = llm->value("max_concurrency", c.llm.max_concurrency);
      c.llm.max_attempts = llm->value("max_attempts", c.llm.max_attempts);
      if (auto b = llm->find("backoff_ms"); b != llm->end()) {
        c.llm.backoff.clear();
        for (const auto& ms : *b) c.llm.backoff.emplace_back(ms.get<std::int64_t>());
      }
    }
    if (auto live = j.find("live"); live != j.end()) {
      c.live_poll = std::chrono::seconds(live->value("poll_seconds", 60));
      if (auto feeds = live->find("feeds"); feeds != live->end()) {
        LiveFeedConfig f;
        f.bars = feed_from_json(feeds->value("bars", Json::object()));
        f.news = feed_from_json(feeds->value("news", Json::object()));
        f.fundamentals = feed_from_json(feeds->value("fundamentals", Json::object()));
        f.insiders = feed_from_json(feeds->value("insiders", Json::object()));
        f.timeout_s = live->value("timeout_s", 30);
        c.live_feeds = f;
      }
    }
    return c;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BadConfig) throw;
    fail(ErrorCode::BadConfig, "arena.json: " + std::string(e.what()));
  } catch (const std::exception& e) {
    fail(ErrorCode::BadConfig, "arena.json: " + std::string(e.what()));
  }
}

Json config_to_json(const ArenaConfig& c) {
  Json providers = Json::array();
  for (const auto& p : c.providers) {
    Json pj = to_json(p);
    if (p.script) pj["script"] = relative_to(c.data_dir, *p.script);
    providers.push_back(pj);
  }
  Json models = Json::array();
  for (const auto& m : c.models) models.push_back(to_json(m));
  Json backoff = Json::array();
  for (auto ms : c.llm.backoff) backoff.push_back(ms.count());
  Json j{{"dataset", relative_to(c.data_dir, c.dataset_dir)},
         {"prompts", relative_to(c.data_dir, c.prompts_dir)},
         {"providers", providers},
         {"models", models},
         {"context",
          {{"price_lookback", c.windows.price_lookback},
           {"news_window_days", c.windows.news_window_days},
           {"insider_window_days", c.windows.insider_window_days}}},
         {"llm",
          {{"mode", std::string(to_string(c.llm.mode))},
           {"max_concurrency", c.llm.max_concurrency},
           {"max_attempts", c.llm.max_attempts},
           {"backoff_ms", backoff}}}};
  Json live{{"poll_seconds", std::chrono::duration_cast<std::chrono::seconds>(c.live_poll).count()}};
  if (c.live_feeds) {
    live["timeout_s"] = c.live_feeds->timeout_s;
    live["feeds"] = Json{{"bars", feed_to_json(c.live_feeds->bars)},
                         {"news", feed_to_json(c.live_feeds->news)},
                         {"fundamentals", feed_to_json(c.live_feeds->fundamentals)},
                         {"insiders", feed_to_json(c.live_feeds->insiders)}};
  }
  j["live"] = live;
  return j;
}

void save_config(const ArenaConfig& config) {
  fs::create_directories(config.data_dir);
  std::ofstream out(config.data_dir / "arena.json");
  out << config_to_json(config).dump(2) << "\n";
  if (!out) fail(ErrorCode::StorageFailure, "cannot write arena.json");
}

Dataset make_sample_dataset(const SampleSpec& spec) {
  // mt19937_64 output is fixed by the standard; distributions are not, so
  // everything below is integer arithmetic on raw draws.
  std::mt19937_64 rng(spec.seed);
  auto draw = [&](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };

  Dataset ds;
  ds.meta.name = "sample";
  const MarketClock& clock = ds.meta.clock;

  std::vector<Date> days;
  for (Date d = spec.start; static_cast<int>(days.size()) < spec.trading_days; d += std::chrono::days{1}) {
    if (!is_weekend(d)) days.push_back(d);
  }
  const Date last = days.back();
  const auto hours = [](int h) { return std::chrono::seconds{std::chrono::hours{h}}; };

  int news_id = 0;
  for (const auto& symbol : spec.tickers) {
    const Ticker ticker(symbol);
    Decimal prev = Decimal::from_int(draw(50, 400));
    for (std::size_t i = 0; i < days.size(); ++i) {
      PriceBar b;
      b.ticker = ticker;
      b.date = days[i];
      b.open = prev.times(Decimal::from_micros((10000 + draw(-50, 50)) * 100));
      b.close = prev.times(Decimal::from_micros((10000 + draw(-250, 260)) * 100));
      const Decimal hi = std::max(b.open, b.close), lo = std::min(b.open, b.close);
      b.high = hi.times(Decimal::from_micros((10000 + draw(0, 80)) * 100));
      b.low = lo.times(Decimal::from_micros((10000 - draw(0, 80)) * 100));
      b.volume = draw(500'000, 5'000'000);
      b.available_at = clock.close_of(b.date);
      ds.facts.emplace_back(b);
      prev = b.close;

      if (i % 2 == 0) {
        NewsItem n;
        n.id = "n" + std::to_string(++news_id);
        n.tickers = {ticker};
        n.published_at = at_time(days[i], hours(13));
        const bool good = draw(0, 1) == 1;
        n.headline = symbol + (good ? " beats expectations on product demand" : " faces supply pressure");
        n.body = "Synthetic coverage of " + symbol + ".";
        n.source = "wire";
        ds.facts.emplace_back(n);
      }
      if (i % 7 == 3) {
        // Lands after the sample time, so only the next cycle may see it.
        NewsItem n;
        n.id = "n" + std::to_string(++news_id);
        n.tickers = {ticker};
        n.published_at = at_time(days[i], hours(22));
        n.headline = symbol + " after-hours update";
        n.body = "Late-evening item for " + symbol + ".";
        n.source = "wire";
        ds.facts.emplace_back(n);
      }
      if (i % 5 == 1) {
        InsiderTransaction t;
        t.ticker = ticker;
        t.filed_at = at_time(days[i], hours(18));
        t.insider_role = draw(0, 1) ? "CEO" : "Director";
        t.direction = draw(0, 2) == 0 ? TradeDirection::Sell : TradeDirection::Buy;
        t.shares = draw(100, 20'000);
        t.price = b.close;
        ds.facts.emplace_back(t);
      }
    }

    auto fundamentals = [&](Date period, Instant filed) {
      FundamentalSnapshot f;
      f.ticker = ticker;
      f.report_period = period;
      f.filed_at = filed;
      const std::int64_t revenue = draw(5'000, 90'000) * 1'000'000;
      const std::int64_t income = revenue / draw(5, 12);
      const std::int64_t shares = draw(1'000, 16'000) * 1'000'000;
      f.figures["revenue"] = Decimal::from_int(revenue);
      f.figures["net_income"] = Decimal::from_int(income);
      f.figures["total_assets"] = Decimal::from_int(revenue * 3);
      f.figures["total_liabilities"] = Decimal::from_int(revenue * 2);
      f.figures["shares_outstanding"] = Decimal::from_int(shares);
      f.figures["eps"] = Decimal::from_int(income).divided_by(Decimal::from_int(shares));
      ds.facts.emplace_back(f);
    };
    fundamentals(spec.start - std::chrono::days{62}, at_time(spec.start - std::chrono::days{20}, hours(12)));
    fundamentals(spec.start - std::chrono::days{3}, at_time(days[days.size() / 2], hours(12)));
    fundamentals(last + std::chrono::days{30}, at_time(last + std::chrono::days{45}, hours(12)));

    // Filed after the last bar: present in the dataset, never visible to it.
    NewsItem late;
    late.id = "n" + std::to_string(++news_id);
    late.tickers = {ticker};
    late.published_at = at_time(last + std::chrono::days{3}, hours(9));
    late.headline = symbol + " announces a surprise merger";
    late.body = "This item is dated after the dataset ends.";
    late.source = "wire";
    ds.facts.emplace_back(late);

    InsiderTransaction t;
    t.ticker = ticker;
    t.filed_at = at_time(last + std::chrono::days{5}, hours(18));
    t.insider_role = "CFO";
    t.direction = TradeDirection::Sell;
    t.shares = 50'000;
    t.price = prev;
    ds.facts.emplace_back(t);
  }
  return ds;
}

RunConfig load_run_config(const fs::path& path) {
  Json j;
  try {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::BadConfig, "cannot read run config " + path.string());
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::BadConfig, "run config: " + std::string(e.what()));
  }
  const fs::path base = path.parent_path();
  RunConfig rc;
  rc.fund = require(j, "fund");
  if (!rc.fund.is_object()) fail(ErrorCode::ValidationFailed, "fund must be an object");
  const Json& model = require(j, "model_spec");
  if (model.is_string()) {
    rc.model_spec_id = model.get<std::string>();
  } else {
    rc.inline_model = model_spec_from_json(model);
    rc.model_spec_id = rc.inline_model->spec_id;
  }
  rc.fund["model_spec"] = rc.model_spec_id;
  if (auto policy = j.find("execution_policy"); policy != j.end()) {
    if (!rc.fund.contains("config")) rc.fund["config"] = Json::object();
    rc.fund["config"]["execution_policy"] = *policy;
  }
  if (j.contains("dataset")) rc.dataset_dir = resolve(base, require_string(j, "dataset"));
  for (const auto& p : j.value("providers", Json::array())) {
    ProviderProfile profile = provider_profile_from_json(p);
    if (profile.script) profile.script = resolve(base, profile.script->string());
    if (profile.wire_dialect != "mock" && !p.contains("auth_env_var")) profile.auth_env_var = default_key_env(profile.name);
    rc.providers.push_back(std::move(profile));
  }
  const Json& range = require(j, "date_range");
  rc.from = require_date(range, "from");
  rc.to = require_date(range, "to");
  rc.allow_contaminated = j.value("allow_contaminated", false);
  return rc;
}

ArenaConfig init_data_dir(const fs::path& data_dir, const SampleSpec& sample) {
  fs::create_directories(data_dir);
  ArenaConfig config = fs::exists(data_dir / "arena.json") ? load_config(data_dir) : default_config(data_dir);
  for (const char* sub : {"funds", "runs", "cassettes"}) fs::create_directories(data_dir / sub);

  if (!fs::exists(config.dataset_dir / "bars.jsonl")) write_dataset(config.dataset_dir, make_sample_dataset(sample));

  fs::create_directories(config.prompts_dir);
  for (const auto& entry : fs::directory_iterator(PromptLibrary::default_dir())) {
    const fs::path target = config.prompts_dir / entry.path().filename();
    if (entry.is_regular_file() && !fs::exists(target)) fs::copy_file(entry.path(), target);
  }
  write_file_if_absent(data_dir / "mock" / "script.json", kSampleScript);
  if (!fs::exists(data_dir / "arena.json")) save_config(config);
  return config;
}

}  // namespace arena
