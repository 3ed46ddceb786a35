/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace surgpipe {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Dimensions of paired inputs do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation that requires at least one element received none.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Threshold selection is impossible because all values are equal.
class NoSeparationError : public Error {
 public:
  using Error::Error;
};

/// A class frequency or count makes the requested statistic undefined.
class DegenerateClassError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be positive (semi-)definite is not.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Frames were supplied out of temporal order.
class OrderError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is outside its documented range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation was requested but the ground truth contains no boxes.
class EmptyGroundTruthError : public Error {
 public:
  using Error::Error;
};

/// A file does not conform to its documented format.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace surgpipe
