#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace arena {

// Closed error vocabulary shared by every module. The string form of each
// code is what the HTTP API and the CLI surface to operators.
enum class ErrorCode {
  ValidationFailed,
  UnknownTicker,
  UnknownFund,
  UnknownRun,
  UnknownMetric,
  UnknownModel,
  NotFound,
  ProviderUnavailable,
  InvalidPrice,
  TickerOutsidePool,
  MissingPrice,
  OutOfOrder,
  NotTradingDay,
  FundBusy,
  DatasetGap,
  CutoffViolation,
  LeakageDetected,
  LlmUnavailable,
  CassetteMiss,
  CorruptCassette,
  DuplicateProvider,
  SeqConflict,
  StorageFailure,
  CorruptLog,
  IllegalTransition,
  BadConfig,
  PortInUse,
  Internal,
};

std::string_view to_string(ErrorCode code);
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string message) {
  throw Error(code, std::move(message));
}

}  // namespace arena
