#include "hazardtm/error.hpp"

namespace hazardtm {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingGazetteer: return "MissingGazetteer";
        case ErrorCode::EmptyShingleSet: return "EmptyShingleSet";
        case ErrorCode::SignatureMismatch: return "SignatureMismatch";
        case ErrorCode::EmptyFeatureSpace: return "EmptyFeatureSpace";
        case ErrorCode::DegenerateCorpus: return "DegenerateCorpus";
        case ErrorCode::NonNegativityViolation: return "NonNegativityViolation";
        case ErrorCode::FeatureSpaceMismatch: return "FeatureSpaceMismatch";
        case ErrorCode::NoKeywordsInFeatureSpace: return "NoKeywordsInFeatureSpace";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::NoFeasibleConfig: return "NoFeasibleConfig";
        case ErrorCode::MissingPrediction: return "MissingPrediction";
        case ErrorCode::DegenerateMarginals: return "DegenerateMarginals";
        case ErrorCode::IdSetMismatch: return "IdSetMismatch";
        case ErrorCode::DuplicateId: return "DuplicateId";
    }
    return "UnknownError";
}

}  // namespace hazardtm
