#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace minrepair {

// Base for every domain failure. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number when known.
class IngestError : public Error {
public:
    IngestError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Missing or inconsistent configuration (problem directories, limits, flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

// The sandbox or a child process failed for reasons unrelated to the
// program under test.
class InfraError : public Error {
public:
    using Error::Error;
};

// External generator violated the line protocol.
class ProtocolError : public Error {
public:
    ProtocolError(std::string pair_id, const std::string& what)
        : Error("pair " + pair_id + ": " + what), pair_id_(std::move(pair_id)) {}

    const std::string& pair_id() const noexcept { return pair_id_; }

private:
    std::string pair_id_;
};

}  // namespace minrepair
