#ifndef FEDFDP_ERRORS_HPP
#define FEDFDP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fedfdp {

// Caller passed values that violate an operation's preconditions.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Model/dataset/config shapes do not line up.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file. Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, std::size_t byte_offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

// A numeric routine left its domain of validity (overflow, lost precision).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// The requested privacy budget cannot cover even zero rounds.
class InfeasibleBudget : public std::runtime_error {
 public:
  explicit InfeasibleBudget(const std::string& msg) : std::runtime_error(msg) {}
};

// Config file failed schema validation. `path` names the offending field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& field_path, const std::string& msg)
      : std::runtime_error(field_path + ": " + msg), path(field_path) {}
  std::string path;
};

}  // namespace fedfdp

#endif  // FEDFDP_ERRORS_HPP
