#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "arena/chrono.hpp"
#include "arena/decimal.hpp"

namespace arena {

using Json = nlohmann::json;

/// UTF-8, sorted keys, no insignificant whitespace. This is the byte form
/// compared whenever two logs or records must be identical.
inline std::string canonical(const Json& value) {
  return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

// Field accessors that raise ValidationFailed with the field name.
const Json& require(const Json& obj, const char* field);
std::string require_string(const Json& obj, const char* field);
Decimal require_decimal(const Json& obj, const char* field);
Decimal decimal_from_json(const Json& value, const char* field);
std::int64_t require_int(const Json& obj, const char* field);
Instant require_instant(const Json& obj, const char* field);
Date require_date(const Json& obj, const char* field);

inline Json to_json(Decimal d) { return d.to_string(); }

template <typename T>
Json optional_json(const std::optional<T>& value) {
  if (!value) return nullptr;
  return Json(*value);
}

}  // namespace arena
