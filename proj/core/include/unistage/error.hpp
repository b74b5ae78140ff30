// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace unistage {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, bad arguments, malformed input beyond budget.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A stage could not complete (exit code 2 at the CLI).
class StageError : public Error {
 public:
  using Error::Error;
};

// Transport-level retries against an LLM backend ran out (exit code 3).
class BackendExhausted : public Error {
 public:
  using Error::Error;
};

// Sampling from a pool with no drawable items.
class PoolExhausted : public Error {
 public:
  PoolExhausted() : Error("exhausted") {}
};

}  // namespace unistage
