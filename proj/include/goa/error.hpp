// Copyright (c) 2026 The goa Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace goa {

/// Base of every exception thrown by the library. The category decides the
/// process exit code used by the command-line tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad shapes, empty pools, inconsistent hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A domain object breaks one of its structural invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized input. `position` is a 1-based line and 0-based byte
/// offset inside that line when known.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : ValidationError(what + " (line " + std::to_string(line) + ", byte " +
                        std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Transport or protocol failure talking to an LLM or encoder endpoint.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// A gradient check could not be carried out, e.g. the loss is not a
/// deterministic function of the parameters.
class CheckError : public Error {
 public:
  using Error::Error;
};

/// Generation step index reached the configured step cap.
class StepOverflowError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace goa
