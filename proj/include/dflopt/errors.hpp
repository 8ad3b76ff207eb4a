#pragma once

#include <stdexcept>
#include <string>

namespace dflopt {

// Exit-code contract: 0 ok, 1 config, 2 runtime/numerical, 3 verification.
enum class ErrorKind { Config = 1, Runtime = 2, Verification = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error runtime_error(const std::string& msg) { return Error(ErrorKind::Runtime, msg); }
inline Error verification_error(const std::string& msg) { return Error(ErrorKind::Verification, msg); }

} // namespace dflopt
