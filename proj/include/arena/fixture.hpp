#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arena/canonical_json.hpp"
#include "arena/market_data.hpp"

namespace arena {

// One JSON object per line, field names exactly as the record types.
Json fact_to_json(const Fact& fact);
/// `kind` is one of "bars", "news", "fundamentals", "insiders". A bar without
/// `available_at` becomes available at its date's close.
Fact fact_from_json(const Json& obj, std::string_view kind, const MarketClock& clock);
std::string_view fact_kind(const Fact& fact);

struct DatasetMeta {
  std::string name;
  MarketClock clock;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Fact> facts;
};

/// Reads meta.json (optional) and the four JSONL files of a dataset
/// directory. Missing files count as empty.
Dataset load_dataset(const std::filesystem::path& dir);
/// Writes the four JSONL files plus meta.json; facts are sorted so output is
/// stable for identical content.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
/// Appends facts to the matching JSONL files (live snapshotting).
void append_to_dataset(const std::filesystem::path& dir, const std::vector<Fact>& facts);

Json meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const Json& obj);

}  // namespace arena
