#pragma once

#include <stdexcept>
#include <string>

namespace repex {

enum class ErrorCode {
    InvalidCount,
    InvalidRange,
    InvalidValue,
    InvalidConfig,
    InvalidEnergy,
    InvalidRecord,
    InvalidTiming,
    InvalidTask,
    EngineFailure,
    NoData,
    MissingArtifact,
    IoFailure,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidCount: return "invalid-count";
        case ErrorCode::InvalidRange: return "invalid-range";
        case ErrorCode::InvalidValue: return "invalid-value";
        case ErrorCode::InvalidConfig: return "invalid-config";
        case ErrorCode::InvalidEnergy: return "invalid-energy";
        case ErrorCode::InvalidRecord: return "invalid-record";
        case ErrorCode::InvalidTiming: return "invalid-timing";
        case ErrorCode::InvalidTask: return "invalid-task";
        case ErrorCode::EngineFailure: return "engine-failure";
        case ErrorCode::NoData: return "no-data";
        case ErrorCode::MissingArtifact: return "missing-artifact";
        case ErrorCode::IoFailure: return "io-failure";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised by the built-in engine when dynamics become non-finite; the pilot
// maps it to a task failure rather than letting it escape a worker.
class EngineError : public Error {
public:
    explicit EngineError(const std::string& message) : Error(ErrorCode::EngineFailure, message) {}
};

}  // namespace repex
