#include "regtune/error.hpp"

namespace regtune {

const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
        case ErrorKind::parse_error: return "ParseError";
        case ErrorKind::dimension_mismatch: return "DimensionMismatch";
        case ErrorKind::invalid_config: return "InvalidConfig";
        case ErrorKind::too_few_rows: return "TooFewRows";
        case ErrorKind::not_spd: return "NotSPD";
        case ErrorKind::not_symmetric: return "NotSymmetric";
        case ErrorKind::no_convergence: return "NoConvergence";
        case ErrorKind::general_position_violated: return "GeneralPositionViolated";
        case ErrorKind::path_budget_exceeded: return "PathBudgetExceeded";
        case ErrorKind::out_of_range: return "OutOfRange";
        case ErrorKind::domain_mismatch: return "DomainMismatch";
    }
    return "Error";
}

} // namespace regtune
