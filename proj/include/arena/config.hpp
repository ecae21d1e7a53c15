#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arena/canonical_json.hpp"
#include "arena/fixture.hpp"
#include "arena/llm_gateway.hpp"
#include "arena/market_provider.hpp"
#include "arena/pipeline.hpp"

namespace arena {

/// Contents of <data_dir>/arena.json plus the resolved directory.
/// Relative paths inside the file resolve against the data directory.
struct ArenaConfig {
  std::filesystem::path data_dir;
  std::filesystem::path dataset_dir;
  std::filesystem::path prompts_dir;
  std::vector<ProviderProfile> providers;
  std::vector<ModelSpec> models;
  ContextWindows windows;
  GatewayOptions llm;
  std::optional<LiveFeedConfig> live_feeds;
  std::chrono::milliseconds live_poll{std::chrono::seconds{60}};
};

/// Mock provider and a `mock-v1` model; everything else at defaults.
ArenaConfig default_config(const std::filesystem::path& data_dir);

/// BadConfig on malformed content; a missing file yields default_config.
ArenaConfig load_config(const std::filesystem::path& data_dir);
Json config_to_json(const ArenaConfig& config);
void save_config(const ArenaConfig& config);

/// Providers get `ARENA_LLM_KEY_<NAME>` as their credential variable unless
/// one is given explicitly.
std::string default_key_env(const std::string& provider_name);

struct SampleSpec {
  std::vector<std::string> tickers{"AAPL", "AMZN", "MSFT", "NVDA", "TSLA"};
  Date start = parse_date("2025-03-03");
  int trading_days = 30;
  std::uint64_t seed = 7;
};

/// Deterministic synthetic dataset: weekday bars, news, quarterly
/// fundamentals and insider filings, some of them dated after the last bar.
Dataset make_sample_dataset(const SampleSpec& spec = {});

/// A self-contained replay job: which fund to create, which model, which
/// data, which dates. See docs/run-config.md.
struct RunConfig {
  Json fund;
  std::optional<ModelSpec> inline_model;
  std::string model_spec_id;
  std::optional<std::filesystem::path> dataset_dir;
  std::vector<ProviderProfile> providers;
  Date from;
  Date to;
  bool allow_contaminated = false;
};

/// Relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

/// Scaffolds a data directory: arena.json, datasets/sample, prompts/,
/// mock/script.json, funds/, runs/, cassettes/. Existing files are kept.
ArenaConfig init_data_dir(const std::filesystem::path& data_dir, const SampleSpec& sample = {});

}  // namespace arena
