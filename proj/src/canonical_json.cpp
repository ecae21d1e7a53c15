#include "arena/canonical_json.hpp"

#include <cmath>

#include "arena/error.hpp"

namespace arena {

const Json& require(const Json& obj, const char* field) {
  if (!obj.is_object()) fail(ErrorCode::ValidationFailed, std::string("expected object holding ") + field);
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) fail(ErrorCode::ValidationFailed, std::string("missing field ") + field);
  return *it;
}

std::string require_string(const Json& obj, const char* field) {
  const Json& v = require(obj, field);
  if (!v.is_string()) fail(ErrorCode::ValidationFailed, std::string("field ") + field + " must be a string");
  return v.get<std::string>();
}

Decimal decimal_from_json(const Json& value, const char* field) {
  if (value.is_string()) return Decimal::parse(value.get_ref<const std::string&>());
  if (value.is_number_integer()) return Decimal::from_int(value.get<std::int64_t>());
  if (value.is_number()) return Decimal::from_double(value.get<double>());
  fail(ErrorCode::ValidationFailed, std::string("field ") + field + " must be a decimal");
}

Decimal require_decimal(const Json& obj, const char* field) { return decimal_from_json(require(obj, field), field); }

std::int64_t require_int(const Json& obj, const char* field) {
  const Json& v = require(obj, field);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::fabs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  fail(ErrorCode::ValidationFailed, std::string("field ") + field + " must be an integer");
}

Instant require_instant(const Json& obj, const char* field) { return parse_instant(require_string(obj, field)); }

Date require_date(const Json& obj, const char* field) { return parse_date(require_string(obj, field)); }

}  // namespace arena
