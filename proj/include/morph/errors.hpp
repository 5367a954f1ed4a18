// Copyright 2026 The MORPH Drift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace morph {

// Error taxonomy. The CLI maps each family to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters, layer shapes, or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor or vector shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad values handed to an otherwise well-configured operation
// (non-finite features, empty batches, invalid distributions).
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed stream files. Carries the offending 1-based line number.
class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Months replayed out of order.
class SequenceError : public Error {
 public:
  using Error::Error;
};

// A condition that must hold regardless of input was violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace morph
