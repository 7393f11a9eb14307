#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctquant {

enum class ErrorCode {
    io,
    no_input,
    shape_mismatch,
    unsupported_format,
    validation,
    range,
    degenerate_mesh,
    empty_region,
    not_found,
    already_exists,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::io: return "io";
        case ErrorCode::no_input: return "no_input";
        case ErrorCode::shape_mismatch: return "shape_mismatch";
        case ErrorCode::unsupported_format: return "unsupported_format";
        case ErrorCode::validation: return "validation";
        case ErrorCode::range: return "range";
        case ErrorCode::degenerate_mesh: return "degenerate_mesh";
        case ErrorCode::empty_region: return "empty_region";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::already_exists: return "already_exists";
    }
    return "unknown";
}

/// Single exception type for the library. `fields()` names the offending
/// parameter keys for validation failures so callers can report them.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::vector<std::string> fields = {})
        : std::runtime_error(message), code_(code), fields_(std::move(fields)) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    ErrorCode code_;
    std::vector<std::string> fields_;
};

}  // namespace ctquant
