#pragma once

#include <stdexcept>
#include <string>

namespace plab {

// Error categories mirrored 1:1 by the C API status codes in plab.h.
enum class ErrorCode {
    InvalidArgument = 1,
    Dimension = 2,
    Numeric = 3,
    Io = 4,
    Parse = 5,
    State = 6,
    Unsupported = 7,
    Internal = 8,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace plab
