#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qkdrelay {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSON syntax, wrong value types).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates model invariants. Carries every violation
// found, not only the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class UnknownApp : public Error {
 public:
  explicit UnknownApp(const std::string& app) : Error("unknown application " + app) {}
};

class NoPath : public Error {
 public:
  NoPath(const std::string& from, const std::string& to)
      : Error("no path from " + from + " to " + to) {}
};

class SameNode : public Error {
 public:
  explicit SameNode(const std::string& node)
      : Error("both applications are hosted on node " + node) {}
};

class CodecError : public Error {
 public:
  CodecError(std::string field, const std::string& what)
      : Error("codec error at '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class UnknownEntity : public Error {
 public:
  explicit UnknownEntity(const std::string& id) : Error("unknown entity " + id) {}
};

}  // namespace qkdrelay
