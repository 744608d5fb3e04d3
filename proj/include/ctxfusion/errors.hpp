// Copyright 2026 The ctxfusion Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CTXFUSION_ERRORS_HPP
#define CTXFUSION_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ctxfusion {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input/config family: the caller handed us something malformed. The CLI
// maps these to exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

class LookupError : public InputError {
 public:
  using InputError::InputError;
};

class InvalidInputError : public InputError {
 public:
  using InputError::InputError;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

// Runtime/numeric family (exit code 2).
class NumericError : public Error {
 public:
  using Error::Error;
};

class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

class BehindCameraError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularSystemError : public NumericError {
 public:
  using NumericError::NumericError;
};

class InvalidModelError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

class GenerationError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DataError : public NumericError {
 public:
  using NumericError::NumericError;
};

class EvaluationError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace ctxfusion

#endif  // CTXFUSION_ERRORS_HPP
