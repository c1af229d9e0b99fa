#pragma once

#include <stdexcept>
#include <string>

namespace aya {

// Maps onto the command-line exit code taxonomy: internal = 1, input = 2,
// external client = 3.
enum class ErrorKind { internal, invalid_input, external_client };

int exit_code(ErrorKind kind);
const char* to_string(ErrorKind kind);

// Base of every error raised by the library. `code` is a stable
// machine-readable identifier such as "shape_mismatch".
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

class InputError : public Error {
public:
    InputError(std::string code, const std::string& message)
        : Error(ErrorKind::invalid_input, std::move(code), message) {}
};

class InternalError : public Error {
public:
    InternalError(std::string code, const std::string& message)
        : Error(ErrorKind::internal, std::move(code), message) {}
};

class ClientError : public Error {
public:
    ClientError(std::string code, const std::string& message)
        : Error(ErrorKind::external_client, std::move(code), message) {}
};

} // namespace aya
