#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctrlgen {

// Base of every error the library throws. `kind()` is a stable short tag the
// CLI prints on its machine-parsable error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class MalformedControlError : public Error {
public:
    explicit MalformedControlError(const std::string& message)
        : Error("malformed_control", message) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& message) : Error("domain", message) {}
};

class VocabularyError : public Error {
public:
    explicit VocabularyError(const std::string& message) : Error("vocabulary", message) {}
};

class ContextOverflowError : public Error {
public:
    explicit ContextOverflowError(const std::string& message)
        : Error("context_overflow", message) {}
};

class NonFiniteLossError : public Error {
public:
    explicit NonFiniteLossError(const std::string& message)
        : Error("non_finite_loss", message) {}
};

// Raised by loaders for a record that cannot be parsed at all.
class MalformedRecordError : public Error {
public:
    MalformedRecordError(std::size_t line, const std::string& message)
        : Error("malformed_record", "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Raised by loaders for a record that parses but breaks a type invariant.
class InvariantViolationError : public Error {
public:
    InvariantViolationError(std::size_t line, std::string field, const std::string& message)
        : Error("invariant_violation",
                "line " + std::to_string(line) + ": field '" + field + "': " + message),
          line_(line), field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error("config", "config field '" + field + "': " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class MissingArtifactError : public Error {
public:
    MissingArtifactError(const std::string& path, std::string producer)
        : Error("missing_artifact",
                "missing artifact " + path + " (run the '" + producer + "' subcommand first)"),
          producer_(std::move(producer)) {}

    const std::string& producer() const noexcept { return producer_; }

private:
    std::string producer_;
};

}  // namespace ctrlgen
