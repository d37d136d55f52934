#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mkg {

enum class ErrorCode {
    InvalidEntity,
    InvalidQuestion,
    ContractViolation,
    UnboundPlaceholder,
    UnknownTemplate,
    InvalidTemplate,
    BackendUnavailable,
    MockScriptExhausted,
    ExtractionParseError,
    NoUsableEntities,
    CacheCorrupt,
    RemoteUnavailable,
    RemoteProtocolError,
    ZeroVector,
    ScorerUnavailable,
    SelfKnowledgeEmpty,
    EmptyCorpus,
    ConversionEmpty,
    UnsupportedFormat,
    EmptyDataset,
    DatasetError,
    PredictionGoldMismatch,
    IncomparableRuns,
    ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the engine. `detail()` carries the payload named by
/// the error kind: the placeholder name, the raw LLM text, the offending line
/// number, and so on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string detail = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

    /// Transport-level failures that a caller may retry.
    bool retriable() const noexcept {
        return code_ == ErrorCode::BackendUnavailable || code_ == ErrorCode::RemoteUnavailable ||
               code_ == ErrorCode::ScorerUnavailable;
    }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace mkg
