// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dsbias {

/// Base of every error raised by the toolkit. `category()` drives the CLI exit
/// code: "config" → 2, "data" → 3, "numeric" → 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* category() const noexcept = 0;
};

/// Precondition violated by the caller (bad dimensions, parameters out of range).
class InvalidInput : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

/// I/O failures, malformed files, manifests that cannot satisfy a request.
class DataError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "data"; }
};

class EmptyMaskError : public DataError {
 public:
  using DataError::DataError;
};

class SplitError : public DataError {
 public:
  using DataError::DataError;
};

class ShortageError : public DataError {
 public:
  ShortageError(const std::string& dataset, std::size_t have, std::size_t want)
      : DataError("dataset '" + dataset + "' has " + std::to_string(have) +
                  " images, " + std::to_string(want) + " requested"),
        dataset_(dataset) {}
  const std::string& dataset() const noexcept { return dataset_; }

 private:
  std::string dataset_;
};

/// Non-finite values reached the optimizer or the loss.
class NumericError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "numeric"; }
};

}  // namespace dsbias
