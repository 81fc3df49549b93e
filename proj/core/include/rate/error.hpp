#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file violates the dataset/fixture/score schema.
class SchemaError : public Error {
public:
    SchemaError(std::size_t line, std::string field, const std::string& detail)
        : Error("line " + std::to_string(line) + ", field '" + field + "': " + detail),
          line_(line), field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

/// An LLM reply could not be turned into the structured value it was asked for.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A correlation or accuracy that has no defined value on the given input
/// (constant vector, no comparable pairs).
class UndefinedStatistic : public Error {
public:
    using Error::Error;
};

} // namespace rate
