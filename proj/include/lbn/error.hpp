#pragma once

#include <stdexcept>
#include <string>

namespace lbn {

/// Base class for every error raised by the library. `kind()` is a stable,
/// machine-parsable category used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Malformed or inconsistent schema document.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message) : Error("schema", message) {}
};

/// Problems with relation data files (missing columns, duplicate keys, ...).
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data", message) {}
};

/// Invalid query text or a query that does not validate against the schema.
class QueryError : public Error {
 public:
  explicit QueryError(const std::string& message) : Error("query", message) {}
};

/// Model file problems: unknown version, corruption, fingerprint mismatch.
class ModelError : public Error {
 public:
  explicit ModelError(const std::string& message) : Error("model", message) {}
};

/// A configured resource budget would be exceeded.
class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& message) : Error("resource", message) {}
};

/// Out-of-range or otherwise unusable argument.
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& message) : Error("argument", message) {}
};

/// Internal invariant violated; indicates a bug rather than bad input.
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& message) : Error("internal", message) {}
};

/// File system failures (unreadable input, unwritable output).
class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace lbn
