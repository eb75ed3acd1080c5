// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skillassess {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Errors caused by bad user input (flags, files, specs). The CLI maps these
// to exit code 1; everything else derived from Error maps to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public InputError {
 public:
  ValidationError(std::string field, const std::string& what, std::size_t line = 0)
      : InputError((line ? "line " + std::to_string(line) + ": " : std::string()) +
                   "field '" + field + "': " + what),
        field_(std::move(field)),
        line_(line) {}
  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

class DuplicationError : public InputError {
 public:
  using InputError::InputError;
};

class ArgumentError : public InputError {
 public:
  using InputError::InputError;
};

// Extraction response did not follow the two-line grammar.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw_response() const { return raw_; }

 private:
  std::string raw_;
};

// Transport-level failure of a completion or scoring backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

class JoinError : public InputError {
 public:
  using InputError::InputError;
};

class LookupError : public InputError {
 public:
  using InputError::InputError;
};

class SplitError : public InputError {
 public:
  using InputError::InputError;
};

class MappingError : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateWindowError : public InputError {
 public:
  using InputError::InputError;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class CompletenessError : public InputError {
 public:
  using InputError::InputError;
};

class AlignmentError : public InputError {
 public:
  using InputError::InputError;
};

class SpecError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace skillassess
