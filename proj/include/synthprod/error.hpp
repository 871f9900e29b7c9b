#pragma once

#include <stdexcept>
#include <string>

namespace synthprod {

// Broad failure classes; the CLI maps each to its own exit code.
enum class ErrorKind {
    usage,       // bad flags / arguments
    io,          // unreadable or unwritable file
    invalid,     // input violates a documented contract
    provider,    // LLM / embedding transport failure
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error invalid_input(const std::string& what) { return Error(ErrorKind::invalid, what); }
inline Error io_error(const std::string& what) { return Error(ErrorKind::io, what); }

} // namespace synthprod
