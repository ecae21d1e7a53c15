#include "arena/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>

#include "arena/config.hpp"
#include "arena/error.hpp"
#include "arena/orchestrator.hpp"
#include "arena/service.hpp"

namespace arena {
namespace fs = std::filesystem;
namespace {

struct GlobalOptions {
  std::string data_dir = "data";
  std::string llm_mode;
  std::string market_mode;
  std::vector<std::string> cassettes;
  std::string log_level = "warn";
};

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? std::string(v) : fallback;
}

std::unique_ptr<Arena> open_arena(const GlobalOptions& g, std::optional<ArenaConfig> preset = std::nullopt) {
  ArenaConfig cfg = preset ? *preset : load_config(g.data_dir);
  if (!g.llm_mode.empty()) cfg.llm.mode = llm_mode_from(g.llm_mode);
  auto arena = std::make_unique<Arena>(std::move(cfg));
  if (arena->gateway().mode() == LlmMode::Replay) {
    std::vector<fs::path> files;
    const fs::path dir = arena->config().data_dir / "cassettes";
    if (fs::is_directory(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".jsonl") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
    }
    for (const auto& c : g.cassettes) files.emplace_back(c);
    for (const auto& f : files) arena->gateway().cassette_import(f);
  }
  return arena;
}

std::string fixed(std::optional<double> v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << *v;
  return os.str();
}

void print_record(std::ostream& out, const CycleRecord& r) {
  out << format_date(r.trading_date) << "  nav " << r.nav_snapshot.nav.to_string() << "  cash "
      << r.nav_snapshot.cash.to_string() << "  signals " << r.signals.size() << "  decisions " << r.decisions.size()
      << "  fills " << r.fills.size() << "  skipped " << r.skipped.size() << "\n";
}

int finish_run(std::ostream& out, std::ostream& err, const ReplayResult& result) {
  for (const auto& r : result.records) print_record(out, r);
  const ArenaRun& run = result.run;
  out << run.run_id << " " << to_string(run.status) << ": " << result.records.size() << " cycle(s)"
      << (run.contaminated ? " [CONTAMINATED]" : "") << "\n";
  if (run.status == RunStatus::Completed) return 0;
  err << run.error_code.value_or("INTERNAL") << ": " << run.cause.value_or("run failed") << "\n";
  return 1;
}

Date parse_date_option(const std::string& text) { return parse_date(text); }

void print_leaderboard(std::ostream& out, const Arena& arena, const std::string& key) {
  const auto rows = arena.leaderboard(key);
  out << std::left << std::setw(6) << "rank" << std::setw(12) << "fund" << std::setw(20) << "name" << std::setw(22)
      << "model" << std::setw(16) << key << "cumulative_return\n";
  for (const auto& row : rows) {
    const FundState s = arena.fund_state(row.fund_id);
    out << std::left << std::setw(6) << row.rank << std::setw(12) << row.fund_id << std::setw(20) << s.fund.name
        << std::setw(22) << s.fund.model_spec_id << std::setw(16) << fixed(row.value)
        << fixed(row.report.cumulative_return) << "\n";
  }
}

void export_bundle(const Arena& arena, const std::string& fund_id, const fs::path& out_dir) {
  const FundState state = arena.fund_state(fund_id);
  fs::create_directories(out_dir);
  fs::copy_file(arena.events().log_path(fund_id), out_dir / "events.jsonl", fs::copy_options::overwrite_existing);

  std::set<std::string> seen;
  std::size_t exchanges = 0;
  std::ofstream cassette(out_dir / "cassette.jsonl", std::ios::binary | std::ios::trunc);
  for (const auto& file : arena.cassette_files(fund_id)) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const ChatExchange x = exchange_from_json(Json::parse(line));
      if (!seen.insert(x.request_hash).second) continue;
      cassette << line << "\n";
      ++exchanges;
    }
  }
  std::ofstream(out_dir / "state.json") << canonical(to_json(state)) << "\n";
  Json runs = Json::array();
  for (const auto& r : arena.runs()) {
    if (r.fund_id == fund_id) runs.push_back(to_json(r));
  }
  std::ofstream(out_dir / "manifest.json") << Json{{"fund_id", fund_id},
                                                   {"events", state.last_seq},
                                                   {"exchanges", exchanges},
                                                   {"runs", runs}}
                                                  .dump(2)
                                           << "\n";
}

void configure_logging(const std::string& level) {
  static const bool once = [] {
    spdlog::set_default_logger(spdlog::stderr_color_mt("arena"));
    return true;
  }();
  (void)once;
  spdlog::set_level(spdlog::level::from_str(level));
  spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e %^%l%$ %v");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forward-testing arena for LLM trading agents", "arena"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  g.data_dir = env_or("ARENA_DATA_DIR", "data");
  g.llm_mode = env_or("ARENA_LLM_MODE", "");
  g.market_mode = env_or("ARENA_MODE", "replay");
  app.add_option("--data-dir", g.data_dir, "Data directory (env ARENA_DATA_DIR)");
  app.add_option("--llm-mode", g.llm_mode, "live or replay (env ARENA_LLM_MODE)");
  app.add_option("--cassette", g.cassettes, "Cassette file(s) to import in llm replay mode");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");

  // init
  auto* init = app.add_subcommand("init", "Scaffold a data directory with sample data");
  SampleSpec sample;
  init->add_option("--days", sample.trading_days, "Trading days in the sample dataset")->check(CLI::Range(1, 2000));
  init->add_option("--seed", sample.seed, "Sample dataset seed");

  // fund
  auto* fund = app.add_subcommand("fund", "Manage funds");
  fund->require_subcommand(1);
  auto* fund_create = fund->add_subcommand("create", "Create a fund");
  std::string name, model = "mock-v1", pool, cash = "100000", max_weight = "0.2", policy = "CLOSE", inception;
  std::int64_t fee_bps = 0;
  int memory_window = 10;
  fund_create->add_option("--name", name)->required();
  fund_create->add_option("--model", model, "Model spec id");
  fund_create->add_option("--pool", pool, "Comma-separated tickers")->required();
  fund_create->add_option("--cash", cash, "Initial cash");
  fund_create->add_option("--max-weight", max_weight, "Max position weight");
  fund_create->add_option("--fee-bps", fee_bps, "Fee in basis points");
  fund_create->add_option("--policy", policy, "CLOSE or NEXT_OPEN");
  fund_create->add_option("--memory-window", memory_window, "Trading memory length");
  fund_create->add_option("--inception", inception, "Inception date (default: dataset start)");
  auto* fund_list = fund->add_subcommand("list", "List funds");
  auto* fund_show = fund->add_subcommand("show", "Show one fund");
  std::string fund_id;
  fund_show->add_option("--fund", fund_id)->required();

  // replay
  auto* replay = app.add_subcommand("replay", "Replay a date range for a fund");
  std::string from, to;
  bool allow_contaminated = false;
  replay->add_option("--fund", fund_id)->required();
  replay->add_option("--from", from)->required();
  replay->add_option("--to", to)->required();
  replay->add_flag("--allow-contaminated", allow_contaminated, "Run even if the model may have seen the data");

  // cycle run
  auto* cycle = app.add_subcommand("cycle", "Single trading cycles");
  cycle->require_subcommand(1);
  auto* cycle_run = cycle->add_subcommand("run", "Run one trading day");
  std::string date;
  cycle_run->add_option("--fund", fund_id)->required();
  cycle_run->add_option("--date", date)->required();
  cycle_run->add_flag("--allow-contaminated", allow_contaminated);

  // run --config
  auto* run_cmd = app.add_subcommand("run", "Create a fund and replay it from a run configuration file");
  std::string run_config;
  run_cmd->add_option("--config", run_config)->required()->check(CLI::ExistingFile);

  // live
  auto* live = app.add_subcommand("live", "Trade a fund day by day against the wall clock");
  live->add_option("--fund", fund_id)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);

  // leaderboard
  auto* board = app.add_subcommand("leaderboard", "Rank funds by a metric");
  std::string rank_key = "sharpe";
  bool as_json = false;
  board->add_option("--rank-key", rank_key);
  board->add_flag("--json", as_json);

  // export
  auto* exp = app.add_subcommand("export", "Write a fund's events and cassette bundle");
  std::string out_dir;
  exp->add_option("--fund", fund_id)->required();
  exp->add_option("--out", out_dir)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    configure_logging(g.log_level);
    if (g.market_mode != "live" && g.market_mode != "replay") fail(ErrorCode::BadConfig, "ARENA_MODE must be live or replay");

    if (*init) {
      const ArenaConfig cfg = init_data_dir(g.data_dir, sample);
      const Dataset ds = load_dataset(cfg.dataset_dir);
      std::set<std::string> tickers;
      std::set<Date> days;
      for (const auto& f : ds.facts) {
        if (const auto* b = std::get_if<PriceBar>(&f)) {
          tickers.insert(b->ticker.str());
          days.insert(b->date);
        }
      }
      out << "initialized " << g.data_dir << ": " << ds.facts.size() << " facts, " << tickers.size() << " tickers, "
          << days.size() << " trading days";
      if (!days.empty()) out << " (" << format_date(*days.begin()) << " to " << format_date(*days.rbegin()) << ")";
      out << "\n";
      return 0;
    }

    if (*fund_create) {
      auto arena = open_arena(g);
      FundSpec spec;
      spec.name = name;
      spec.model_spec_id = model;
      std::stringstream ss(pool);
      std::string t;
      while (std::getline(ss, t, ',')) {
        if (!t.empty()) spec.stock_pool.insert(Ticker(t));
      }
      spec.initial_cash = Decimal::parse(cash);
      spec.config.max_position_weight = Decimal::parse(max_weight);
      spec.config.fee_bps = fee_bps;
      spec.config.execution_policy = execution_policy_from(policy);
      spec.config.memory_window = memory_window;
      if (!inception.empty()) spec.inception = parse_date(inception);
      out << arena->create_fund(spec) << "\n";
      return 0;
    }
    if (*fund_list) {
      auto arena = open_arena(g);
      for (const auto& id : arena->fund_ids()) {
        const Json s = fund_summary(*arena, id);
        out << id << "  " << s["name"].get<std::string>() << "  " << s["model_spec"].get<std::string>() << "  nav "
            << s["nav"].get<std::string>() << "\n";
      }
      return 0;
    }
    if (*fund_show) {
      auto arena = open_arena(g);
      out << fund_detail(*arena, fund_id).dump(2) << "\n";
      return 0;
    }

    if (*replay) {
      auto arena = open_arena(g);
      ReplayOptions opts;
      opts.allow_contaminated = allow_contaminated;
      return finish_run(out, err,
                        arena->run_replay(fund_id, parse_date_option(from), parse_date_option(to), opts));
    }
    if (*cycle_run) {
      auto arena = open_arena(g);
      ReplayOptions opts;
      opts.single_cycle = true;
      opts.allow_contaminated = allow_contaminated;
      const Date d = parse_date_option(date);
      return finish_run(out, err, arena->run_replay(fund_id, d, d, opts));
    }
    if (*run_cmd) {
      const RunConfig rc = load_run_config(run_config);
      ArenaConfig cfg = load_config(g.data_dir);
      if (rc.dataset_dir) cfg.dataset_dir = *rc.dataset_dir;
      for (const auto& p : rc.providers) {
        std::erase_if(cfg.providers, [&](const ProviderProfile& q) { return q.name == p.name; });
        cfg.providers.push_back(p);
      }
      if (rc.inline_model) {
        std::erase_if(cfg.models, [&](const ModelSpec& m) { return m.spec_id == rc.inline_model->spec_id; });
        cfg.models.push_back(*rc.inline_model);
      }
      auto arena = open_arena(g, cfg);
      const std::string id = arena->create_fund(fund_spec_from_json(rc.fund));
      out << id << "\n";
      ReplayOptions opts;
      opts.allow_contaminated = rc.allow_contaminated;
      return finish_run(out, err, arena->run_replay(id, rc.from, rc.to, opts));
    }

    if (*live) {
      auto arena = open_arena(g);
      std::shared_ptr<MarketProvider> provider;
      if (g.market_mode == "live") {
        if (!arena->config().live_feeds) fail(ErrorCode::BadConfig, "ARENA_MODE=live needs live.feeds in arena.json");
        provider = std::make_shared<HttpMarketProvider>(*arena->config().live_feeds, arena->market().clock());
      }
      const ArenaRun run = arena->start_live(fund_id, provider, arena->config().live_poll);
      out << run.run_id << " " << to_string(run.status) << "\n" << std::flush;
      const ArenaRun done = arena->wait(run.run_id);
      out << done.run_id << " " << to_string(done.status) << "\n";
      return done.status == RunStatus::Completed ? 0 : 1;
    }

    if (*serve) {
      auto arena = open_arena(g);
      ArenaService service(*arena);
      const int bound = service.bind(host, port);
      out << "listening on http://" << host << ":" << bound << "\n" << std::flush;
      service.listen();
      return 0;
    }

    if (*board) {
      auto arena = open_arena(g);
      if (as_json) {
        out << canonical(leaderboard_json(*arena, rank_key)) << "\n";
      } else {
        print_leaderboard(out, *arena, rank_key);
      }
      return 0;
    }

    if (*exp) {
      auto arena = open_arena(g);
      export_bundle(*arena, fund_id, out_dir);
      out << "exported " << fund_id << " to " << out_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    const ApiError api = to_api_error(e);
    err << api.code << ": " << api.message << "\n";
    return 1;
  }
  return 0;
}

}  // namespace arena
