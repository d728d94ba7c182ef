#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hazardtm {

enum class ErrorCode {
    ConfigError,
    IoError,
    ParseError,
    MissingGazetteer,
    EmptyShingleSet,
    SignatureMismatch,
    EmptyFeatureSpace,
    DegenerateCorpus,
    NonNegativityViolation,
    FeatureSpaceMismatch,
    NoKeywordsInFeatureSpace,
    EmptyGrid,
    NoFeasibleConfig,
    MissingPrediction,
    DegenerateMarginals,
    IdSetMismatch,
    DuplicateId,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the code identifies which contract
// was violated so callers (and tests) can branch on it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace hazardtm
