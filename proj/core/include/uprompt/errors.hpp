#pragma once

#include <stdexcept>
#include <string>

namespace uprompt {

/// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape / dimension disagreements.
struct ShapeError : Error {
    using Error::Error;
};

/// Out-of-range indices (targets, axes, slices).
struct IndexError : Error {
    using Error::Error;
};

/// Unit ids outside the vocabulary, or misuse of reserved ids.
struct VocabError : Error {
    using Error::Error;
};

/// Sequence does not fit the model's position budget.
struct LengthError : Error {
    using Error::Error;
};

/// Invalid configuration values (negative lengths, bad ratios, unknown kinds).
struct ConfigError : Error {
    using Error::Error;
};

/// Called an operation on the wrong model variant, or violated a documented
/// contract (e.g. prompt tuning an unfrozen backbone).
struct UsageError : Error {
    using Error::Error;
};

/// Checkpoint container is malformed, truncated or fails its integrity hash.
struct CheckpointError : Error {
    using Error::Error;
};

/// Dataset problems: parse failures, validation failures, not enough data.
struct DataError : Error {
    using Error::Error;
};

/// A computation produced NaN/Inf where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace uprompt
