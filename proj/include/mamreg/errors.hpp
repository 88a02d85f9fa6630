#pragma once

#include <stdexcept>

namespace mamreg {

// File could not be read or written (missing, truncated, unwritable).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File exists but does not parse as the expected format.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No usable foreground found while segmenting.
struct SegmentationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Registration could not proceed (degenerate histogram, non-finite data).
struct RegistrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad experiment or dataset configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input values violate an operation's data contract (non-finite intensities etc).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mamreg
