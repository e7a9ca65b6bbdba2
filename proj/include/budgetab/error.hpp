#pragma once

#include <stdexcept>
#include <string>

namespace budgetab {

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    config,
    io,
    solver,
    inconsistent_input,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace budgetab
