#pragma once

#include <stdexcept>
#include <string>

namespace gsmile {

enum class ErrorCode {
    EmptyPrompt,
    DegeneratePrompt,
    LengthMismatch,
    MalformedLine,
    InconsistentDim,
    EmptyTable,
    EmptyDocument,
    EmptyInput,
    EmptyOutput,
    SupportTooLarge,
    SolverFailure,
    ZeroVector,
    SupportMismatch,
    NonpositiveSigma,
    AllZeroDistances,
    SingularSystem,
    NonpositivePrecision,
    AuthError,
    RateLimited,
    Timeout,
    EmptyCompletion,
    DegenerateVariance,
    UndefinedAUROC,
    BothEmpty,
    TooFewRuns,
    ZeroVariance,
    AllPerturbationsFiltered,
    EmptySweep,
    SchemaMismatch,
    InvalidConfig,
    IoError,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::EmptyPrompt: return "EmptyPrompt";
        case ErrorCode::DegeneratePrompt: return "DegeneratePrompt";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::InconsistentDim: return "InconsistentDim";
        case ErrorCode::EmptyTable: return "EmptyTable";
        case ErrorCode::EmptyDocument: return "EmptyDocument";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptyOutput: return "EmptyOutput";
        case ErrorCode::SupportTooLarge: return "SupportTooLarge";
        case ErrorCode::SolverFailure: return "SolverFailure";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::SupportMismatch: return "SupportMismatch";
        case ErrorCode::NonpositiveSigma: return "NonpositiveSigma";
        case ErrorCode::AllZeroDistances: return "AllZeroDistances";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::NonpositivePrecision: return "NonpositivePrecision";
        case ErrorCode::AuthError: return "AuthError";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::EmptyCompletion: return "EmptyCompletion";
        case ErrorCode::DegenerateVariance: return "DegenerateVariance";
        case ErrorCode::UndefinedAUROC: return "UndefinedAUROC";
        case ErrorCode::BothEmpty: return "BothEmpty";
        case ErrorCode::TooFewRuns: return "TooFewRuns";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::AllPerturbationsFiltered: return "AllPerturbationsFiltered";
        case ErrorCode::EmptySweep: return "EmptySweep";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace gsmile
