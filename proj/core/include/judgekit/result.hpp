#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace judgekit {

/// Every recoverable failure in the toolkit carries one of these codes.
/// Preconditions violated by the caller throw std::invalid_argument instead.
enum class ErrorCode {
    // record validation
    VariantMismatch,
    ResponseArityMismatch,
    TieNotAllowed,
    ScoreOutOfRange,
    EmptyField,
    // template registry
    UnknownTemplate,
    MissingField,
    UnknownField,
    AlreadyNoCot,
    // reply parsing
    NoResultMarker,
    AmbiguousResult,
    MissingResponseMarker,
    MissingSecondResponse,
    MissingImprovedMarker,
    // llm client
    AuthError,
    RateLimitExhausted,
    MalformedResponse,
    Timeout,
    RequestFailed,
    // curation
    EmptyPool,
    SourceUnparseable,
    InvalidRatio,
    // loss
    EmptyCompletion,
    LengthMismatch,
    NonFiniteInput,
    TagMismatch,
    // metrics
    EmptyOutcomes,
    ConstantVector,
    IdMismatch,
    // refinement
    TooFewResponses,
    // i/o
    IoError,
    JsonError,
};

const char* to_string(ErrorCode code);

struct Error {
    ErrorCode code;
    std::string message;

    std::string describe() const {
        std::string out = to_string(code);
        if (!message.empty()) {
            out += ": ";
            out += message;
        }
        return out;
    }
};

inline Error make_error(ErrorCode code, std::string message = {}) {
    return Error{code, std::move(message)};
}

/// Value-or-error carrier used on every fallible data path.
template <typename T>
class [[nodiscard]] Result {
public:
    Result(T value) : state_(std::move(value)) {}
    Result(Error error) : state_(std::move(error)) {}

    bool ok() const { return std::holds_alternative<T>(state_); }
    explicit operator bool() const { return ok(); }

    const T& value() const& {
        require_ok();
        return std::get<T>(state_);
    }
    T& value() & {
        require_ok();
        return std::get<T>(state_);
    }
    T&& value() && {
        require_ok();
        return std::get<T>(std::move(state_));
    }

    const Error& error() const {
        if (ok()) throw std::logic_error("Result::error() called on a value");
        return std::get<Error>(state_);
    }

    const T& operator*() const { return value(); }
    const T* operator->() const { return &value(); }

private:
    void require_ok() const {
        if (!ok()) throw std::runtime_error("Result holds error: " + std::get<Error>(state_).describe());
    }

    std::variant<T, Error> state_;
};

/// Result for operations with no payload.
using Status = Result<std::monostate>;

inline Status ok_status() { return Status(std::monostate{}); }

}  // namespace judgekit
