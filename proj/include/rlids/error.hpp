#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rlids {

enum class ErrorCode {
    BadMagic,
    Truncated,
    SchemaMismatch,
    RowError,
    UnsortedInput,
    EmptyDistribution,
    AlphaIsOne,
    FeatureMismatch,
    NoMeasurement,
    UnknownTarget,
    StreamExhausted,
    FingerprintMismatch,
    SchemaVersionMismatch,
    ConfigError,
    InputError,
    IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Malformed CSV row; line is 1-based and counts the header.
class RowError : public Error {
public:
    RowError(std::size_t line, const std::string& message)
        : Error(ErrorCode::RowError, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Configuration problem; path names the offending field, e.g. "agent.action_grid".
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& message)
        : Error(ErrorCode::ConfigError, path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace rlids
