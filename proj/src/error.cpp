#include "arena/error.hpp"

namespace arena {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ValidationFailed: return "VALIDATION_FAILED";
    case ErrorCode::UnknownTicker: return "UNKNOWN_TICKER";
    case ErrorCode::UnknownFund: return "UNKNOWN_FUND";
    case ErrorCode::UnknownRun: return "UNKNOWN_RUN";
    case ErrorCode::UnknownMetric: return "UNKNOWN_METRIC";
    case ErrorCode::UnknownModel: return "UNKNOWN_MODEL";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::ProviderUnavailable: return "PROVIDER_UNAVAILABLE";
    case ErrorCode::InvalidPrice: return "INVALID_PRICE";
    case ErrorCode::TickerOutsidePool: return "TICKER_OUTSIDE_POOL";
    case ErrorCode::MissingPrice: return "MISSING_PRICE";
    case ErrorCode::OutOfOrder: return "OUT_OF_ORDER";
    case ErrorCode::NotTradingDay: return "NOT_TRADING_DAY";
    case ErrorCode::FundBusy: return "FUND_BUSY";
    case ErrorCode::DatasetGap: return "DATASET_GAP";
    case ErrorCode::CutoffViolation: return "CUTOFF_VIOLATION";
    case ErrorCode::LeakageDetected: return "LEAKAGE_DETECTED";
    case ErrorCode::LlmUnavailable: return "LLM_UNAVAILABLE";
    case ErrorCode::CassetteMiss: return "CASSETTE_MISS";
    case ErrorCode::CorruptCassette: return "CORRUPT_CASSETTE";
    case ErrorCode::DuplicateProvider: return "DUPLICATE_PROVIDER";
    case ErrorCode::SeqConflict: return "SEQ_CONFLICT";
    case ErrorCode::StorageFailure: return "STORAGE_FAILURE";
    case ErrorCode::CorruptLog: return "CORRUPT_LOG";
    case ErrorCode::IllegalTransition: return "ILLEGAL_TRANSITION";
    case ErrorCode::BadConfig: return "BAD_CONFIG";
    case ErrorCode::PortInUse: return "PORT_IN_USE";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "INTERNAL";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::ValidationFailed:
    case ErrorCode::UnknownMetric:
    case ErrorCode::InvalidPrice:
    case ErrorCode::TickerOutsidePool:
    case ErrorCode::BadConfig:
      return 400;
    case ErrorCode::UnknownTicker:
    case ErrorCode::UnknownFund:
    case ErrorCode::UnknownRun:
    case ErrorCode::UnknownModel:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::OutOfOrder:
    case ErrorCode::NotTradingDay:
    case ErrorCode::FundBusy:
    case ErrorCode::SeqConflict:
    case ErrorCode::IllegalTransition:
    case ErrorCode::DuplicateProvider:
    case ErrorCode::PortInUse:
      return 409;
    case ErrorCode::MissingPrice:
    case ErrorCode::DatasetGap:
    case ErrorCode::CutoffViolation:
    case ErrorCode::CorruptCassette:
      return 422;
    case ErrorCode::CassetteMiss:
    case ErrorCode::LlmUnavailable:
    case ErrorCode::ProviderUnavailable:
      return 503;
    case ErrorCode::LeakageDetected:
    case ErrorCode::StorageFailure:
    case ErrorCode::CorruptLog:
    case ErrorCode::Internal:
      return 500;
  }
  return 500;
}

}  // namespace arena
