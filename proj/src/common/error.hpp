#pragma once

#include <stdexcept>
#include <string>

namespace cfe {

// Error categories; values double as process exit codes at the CLI boundary.
enum class ErrorKind {
    config = 2,
    data = 3,
    numeric = 4,
    io = 5,
    usage = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const { return kind_; }
    int code() const { return static_cast<int>(kind_); }

    static Error config(const std::string& msg) { return Error(ErrorKind::config, msg); }
    static Error data(const std::string& msg) { return Error(ErrorKind::data, msg); }
    static Error numeric(const std::string& msg) { return Error(ErrorKind::numeric, msg); }
    static Error io(const std::string& msg) { return Error(ErrorKind::io, msg); }
    static Error usage(const std::string& msg) { return Error(ErrorKind::usage, msg); }

private:
    ErrorKind kind_;
};

} // namespace cfe
