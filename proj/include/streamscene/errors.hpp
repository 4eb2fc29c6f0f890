#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace streamscene {

// Base of every error raised by the library. Callers that only care about
// "something went wrong in streamscene" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (non-convex polygon, unordered
// thresholds, strict set not contained in lenient set, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DegenerateOrientationError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnknownLabelError : public Error {
 public:
  explicit UnknownLabelError(std::string label)
      : Error("unknown label: " + label), label_(std::move(label)) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Dataset manifest problems. `pointer` is a JSON pointer into the manifest
// (empty for whole-document problems); `missing_files` lists every referenced
// file that could not be found.
class SchemaError : public Error {
 public:
  SchemaError(std::string pointer, const std::string& what,
              std::vector<std::string> missing_files = {})
      : Error(pointer.empty() ? what : pointer + ": " + what),
        pointer_(std::move(pointer)),
        missing_files_(std::move(missing_files)) {}
  const std::string& pointer() const { return pointer_; }
  const std::vector<std::string>& missing_files() const { return missing_files_; }

 private:
  std::string pointer_;
  std::vector<std::string> missing_files_;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Detector adapter failure. Carries the per-frame transcript collected up to
// the failure.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::vector<std::string> transcript = {})
      : Error(what), transcript_(std::move(transcript)) {}
  const std::vector<std::string>& transcript() const { return transcript_; }
  void set_transcript(std::vector<std::string> t) { transcript_ = std::move(t); }

 private:
  std::vector<std::string> transcript_;
};

}  // namespace streamscene
