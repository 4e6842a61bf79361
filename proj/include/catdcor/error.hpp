#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace catdcor {

enum class ErrorCode {
  invalid_argument,
  invalid_cardinality,
  degenerate_encoding,
  shape,
  internal_consistency,
  degenerate_margin,
  insufficient_sample,
  degenerate_category,
  degenerate_distribution,
  insufficient_replicates,
  invalid_threshold,
  insufficient_features,
  infeasible_setting,
  undefined_auc,
  configuration,
  label,
  parse,
  io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_cardinality: return "invalid-cardinality";
    case ErrorCode::degenerate_encoding: return "degenerate-encoding";
    case ErrorCode::shape: return "shape";
    case ErrorCode::internal_consistency: return "internal-consistency";
    case ErrorCode::degenerate_margin: return "degenerate-margin";
    case ErrorCode::insufficient_sample: return "insufficient-sample";
    case ErrorCode::degenerate_category: return "degenerate-category";
    case ErrorCode::degenerate_distribution: return "degenerate-distribution";
    case ErrorCode::insufficient_replicates: return "insufficient-replicates";
    case ErrorCode::invalid_threshold: return "invalid-threshold";
    case ErrorCode::insufficient_features: return "insufficient-features";
    case ErrorCode::infeasible_setting: return "infeasible-setting";
    case ErrorCode::undefined_auc: return "undefined-auc";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::label: return "label";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can report a stable error class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace catdcor
