// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cgrs {

// Invalid arguments are reported with std::invalid_argument throughout.
// The types below cover failures that callers are expected to branch on.

/// Failure talking to a model backend. Transport failures are retryable.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable = false)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The probe stopped before producing any answer token.
class ProbeEmptyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No usable \boxed{...} answer in a generated text.
class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cgrs
