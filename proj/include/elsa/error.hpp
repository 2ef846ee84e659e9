#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elsa {

// Base for every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A record that parsed but violates a type invariant; carries the record id.
class ValidationError : public Error {
 public:
  ValidationError(std::string id, const std::string& what)
      : Error("example '" + id + "': " + what), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class ModelNotLoaded : public Error {
 public:
  using Error::Error;
};

// NaN/Inf showed up in a loss or a gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace elsa
