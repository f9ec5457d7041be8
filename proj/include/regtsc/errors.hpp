#pragma once

#include <stdexcept>
#include <string>

namespace regtsc {

class RegtscError : public std::runtime_error {
public:
    explicit RegtscError(const std::string &msg) : std::runtime_error(msg) {}
};

// --- configuration / document errors ---

class ParseError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class ValidationError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class IoError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

// --- simulation errors ---

class NoRouteError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class InvalidPhaseError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

// --- backend errors ---

class BackendError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

class TimeoutError : public BackendError {
public:
    using BackendError::BackendError;
};

class ApiError : public BackendError {
public:
    ApiError(int status, const std::string &body)
        : BackendError("api error: status " + std::to_string(status) + ": " + body),
          status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

// --- retrieval errors ---

class EmptyTextError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class DimensionMismatchError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class ZeroVectorError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class EmptyRepositoryError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

// --- response parsing errors ---

class MissingTagError : public ParseError {
public:
    using ParseError::ParseError;
};

class PhaseOutOfRangeError : public ParseError {
public:
    using ParseError::ParseError;
};

class NonIntegerPhaseError : public ParseError {
public:
    using ParseError::ParseError;
};

// --- training pipeline errors ---

class NegativeInputError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class WindowLengthError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class EmptyBufferError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

class VocabularyError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

// --- harness errors ---

class ScenarioMismatchError : public RegtscError {
public:
    using RegtscError::RegtscError;
};

} // namespace regtsc
