#pragma once

#include <stdexcept>
#include <string>

namespace emoda {

// Error categories map onto the CLI exit-code contract:
// usage -> 1, everything data/validation-shaped -> 2, numeric -> 3.
enum class ErrorKind {
    usage,
    shape,
    config,
    contract,
    parse,
    data,
    numeric,
    io,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    const char* kind_name() const {
        switch (kind_) {
            case ErrorKind::usage: return "usage";
            case ErrorKind::shape: return "shape";
            case ErrorKind::config: return "config";
            case ErrorKind::contract: return "contract";
            case ErrorKind::parse: return "parse";
            case ErrorKind::data: return "data";
            case ErrorKind::numeric: return "numeric";
            case ErrorKind::io: return "io";
        }
        return "unknown";
    }

    int exit_code() const {
        switch (kind_) {
            case ErrorKind::usage: return 1;
            case ErrorKind::numeric: return 3;
            default: return 2;
        }
    }

  private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& m) : Error(ErrorKind::usage, m) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(ErrorKind::shape, m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct ContractError : Error {
    explicit ContractError(const std::string& m) : Error(ErrorKind::contract, m) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error(ErrorKind::parse, m) {}
};
struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorKind::data, m) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};
struct IoError : Error {
    explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};

} // namespace emoda
