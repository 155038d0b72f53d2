// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace voxpad {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: unreadable files, malformed configs, out-of-range labels.
struct InvalidInputError : Error {
    using Error::Error;
};

// Incompatible shapes between tensors, parameters or layers.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required (NaN loss, NaN gradient).
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace voxpad
