#include "aya/common/error.hpp"

namespace aya {

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_input: return 2;
    case ErrorKind::external_client: return 3;
    case ErrorKind::internal: break;
    }
    return 1;
}

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::external_client: return "external_client";
    case ErrorKind::internal: break;
    }
    return "internal";
}

Error::Error(ErrorKind kind, std::string code, const std::string& message)
    : std::runtime_error(message), kind_(kind), code_(std::move(code))
{
}

} // namespace aya
