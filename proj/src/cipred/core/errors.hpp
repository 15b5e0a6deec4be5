#pragma once

#include <stdexcept>
#include <string>

namespace cipred {

// Error taxonomy shared by the whole pipeline. The CLI maps these onto exit
// codes: ConfigError -> 2, data errors (Io/Format/Truncation/Validation) -> 3,
// everything else -> 4.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TruncationError : FormatError {
    using FormatError::FormatError;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cipred
