// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <stdexcept>
#include <string>

namespace toktrack {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes or layout ranges do not line up.
struct ShapeError : Error {
    using Error::Error;
};

// A forward op produced NaN or Inf, or a non-finite loss was seen.
struct NumericError : Error {
    using Error::Error;
};

// An attention query row has no allowed key.
struct MaskError : Error {
    using Error::Error;
};

// A value is outside its declared domain (zero-area gt box, bad coverage).
struct DomainError : Error {
    using Error::Error;
};

// A token index is outside the vocabulary.
struct VocabRangeError : Error {
    using Error::Error;
};

// A file on disk does not match its expected format.
struct FormatError : Error {
    using Error::Error;
};

// A config file has an unknown key or an unparsable value.
struct ConfigError : Error {
    using Error::Error;
};

// Caller passed unusable input (empty video, degenerate init box).
struct InputError : Error {
    using Error::Error;
};

} // namespace toktrack
