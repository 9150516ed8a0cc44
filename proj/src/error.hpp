#pragma once

#include <stdexcept>
#include <string>

namespace caeloc {

// Error categories shared with the C API status codes (see include/caeloc.h).
enum class ErrorCode {
    io = 1,
    parse = 2,
    schema = 3,
    validation = 4,
    config = 5,
    shape = 6,
    state = 7,
    numeric = 8,
    internal = 9,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

} // namespace caeloc
