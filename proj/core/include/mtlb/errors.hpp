#pragma once

#include <stdexcept>
#include <string>

namespace mtlb {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for an op.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid or inconsistent configuration (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite value detected during training (CLI exit code 3).
struct NumericError : Error {
    using Error::Error;
};

// Snapshot file corrupt or incompatible with the target model.
struct SnapshotError : Error {
    using Error::Error;
};

// Meta-optimizer failure, e.g. Tabu sampling exhaustion.
struct SearchError : Error {
    using Error::Error;
};

}  // namespace mtlb
