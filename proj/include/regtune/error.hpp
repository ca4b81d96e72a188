#pragma once

#include <stdexcept>
#include <string>

namespace regtune {

enum class ErrorKind {
    parse_error,
    dimension_mismatch,
    invalid_config,
    too_few_rows,
    not_spd,
    not_symmetric,
    no_convergence,
    general_position_violated,
    path_budget_exceeded,
    out_of_range,
    domain_mismatch,
};

const char* to_string(ErrorKind kind) noexcept;

/// Single exception type for every failure the library reports.
/// `kind()` lets callers (and the CLI's exit-code mapping) branch on the cause.
class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace regtune
