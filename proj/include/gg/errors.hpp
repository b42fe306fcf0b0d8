#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace gg {

/// Root of every error thrown by this library. The CLI maps subclasses onto
/// process exit codes (see tools/gg.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or usage. Exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures and unreadable inputs. Exit code 3.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A single corpus/notes JSONL record that could not be turned into a value.
class RecordError : public Error {
 public:
  RecordError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Corrupt or unsupported index file. `field()` names the check that failed
/// ("magic", "version", "dim", "count", "length", "checksum", "metadata", ...).
class IndexCorruptError : public Error {
 public:
  IndexCorruptError(std::string field, const std::string& what)
      : Error("corrupt index (" + field + "): " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class EmbeddingError : public Error {
 public:
  using Error::Error;
};

/// Transport-level or HTTP failure from a remote backend. `status()` is the
/// HTTP status, or 0 when no response was received.
class TransportError : public Error {
 public:
  TransportError(int status, bool retryable, const std::string& what)
      : Error(what), status_(status), retryable_(retryable) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

/// LLM output that does not contain the expected machine-readable structure.
class StructuredOutputError : public Error {
 public:
  using Error::Error;
};

/// Scripted mock transcript misuse: tag mismatch or exhaustion.
class MockTranscriptError : public Error {
 public:
  using Error::Error;
};

}  // namespace gg
