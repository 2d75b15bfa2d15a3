#pragma once

#include <stdexcept>
#include <string>

namespace moesim {

enum class ErrorCode {
    Validation = 1,   // a spec/config invariant is violated
    Config = 2,       // config file missing, unparsable, or has unknown keys
    Io = 3,
    InvalidArgument = 4,
    Capacity = 5,     // buffer or tier capacity exceeded
    Quota = 6,        // namespace quota exceeded
    Internal = 7,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace moesim
