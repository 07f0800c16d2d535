#include "judgekit/result.hpp"

namespace judgekit {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::VariantMismatch: return "VariantMismatch";
        case ErrorCode::ResponseArityMismatch: return "ResponseArityMismatch";
        case ErrorCode::TieNotAllowed: return "TieNotAllowed";
        case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
        case ErrorCode::EmptyField: return "EmptyField";
        case ErrorCode::UnknownTemplate: return "UnknownTemplate";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::UnknownField: return "UnknownField";
        case ErrorCode::AlreadyNoCot: return "AlreadyNoCot";
        case ErrorCode::NoResultMarker: return "NoResultMarker";
        case ErrorCode::AmbiguousResult: return "AmbiguousResult";
        case ErrorCode::MissingResponseMarker: return "MissingResponseMarker";
        case ErrorCode::MissingSecondResponse: return "MissingSecondResponse";
        case ErrorCode::MissingImprovedMarker: return "MissingImprovedMarker";
        case ErrorCode::AuthError: return "AuthError";
        case ErrorCode::RateLimitExhausted: return "RateLimitExhausted";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::RequestFailed: return "RequestFailed";
        case ErrorCode::EmptyPool: return "EmptyPool";
        case ErrorCode::SourceUnparseable: return "SourceUnparseable";
        case ErrorCode::InvalidRatio: return "InvalidRatio";
        case ErrorCode::EmptyCompletion: return "EmptyCompletion";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::TagMismatch: return "TagMismatch";
        case ErrorCode::EmptyOutcomes: return "EmptyOutcomes";
        case ErrorCode::ConstantVector: return "ConstantVector";
        case ErrorCode::IdMismatch: return "IdMismatch";
        case ErrorCode::TooFewResponses: return "TooFewResponses";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::JsonError: return "JsonError";
    }
    return "UnknownError";
}

}  // namespace judgekit
