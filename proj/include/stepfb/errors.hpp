#pragma once

#include <stdexcept>
#include <string>

namespace stepfb {

// Vector lengths disagree (inner products, session rows, ...).
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A numeric argument is outside its admissible range.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation attempted in the wrong session phase.
struct ProtocolError : std::logic_error {
    using std::logic_error::logic_error;
};

// Feedback frame cannot be encoded or decoded.
struct FrameError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File read/write failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace stepfb
