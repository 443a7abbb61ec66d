#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reflect {

// Base for every error raised by the pipeline.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what), line_(0) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

// A caller broke an operation's precondition (e.g. a judge prompt kind passed to a generation renderer).
class ContractError : public Error {
  public:
    using Error::Error;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

// Mathematical domain violation (empty input, zero denominator, length mismatch).
class DomainError : public Error {
  public:
    using Error::Error;
};

class DataIntegrityError : public Error {
  public:
    using Error::Error;
};

class ExportError : public Error {
  public:
    using Error::Error;
};

// model-client

// Connection-level failure, or retries exhausted.
class TransportError : public Error {
  public:
    using Error::Error;
};

// Endpoint answered with a non-2xx status or an unusable body.
class EndpointError : public Error {
  public:
    EndpointError(const std::string& what, int status) : Error(what), status_(status) {}

    int status() const noexcept { return status_; }
    bool retryable() const noexcept { return status_ == 429 || status_ >= 500; }

  private:
    int status_;
};

class CacheError : public Error {
  public:
    using Error::Error;
};

class MockMissError : public Error {
  public:
    using Error::Error;
};

// review

class IncompleteTaskError : public Error {
  public:
    using Error::Error;
};

// Decision submitted for the wrong stage, or for a closed task.
class StageOrderError : public Error {
  public:
    using Error::Error;
};

class UnknownAnnotatorError : public Error {
  public:
    using Error::Error;
};

class NotFoundError : public Error {
  public:
    using Error::Error;
};

}  // namespace reflect
