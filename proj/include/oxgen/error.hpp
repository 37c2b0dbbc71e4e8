#pragma once

#include <stdexcept>
#include <string>

namespace oxgen {

// Maps onto the CLI exit-code taxonomy (2, 3, 4).
enum class ErrorKind { config, input, invariant };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::config, what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what)
      : Error(ErrorKind::input, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what)
      : Error(ErrorKind::invariant, what) {}
};

/// Malformed structured input. `path` locates the offending element,
/// e.g. `$[1].annotations[0].result[2].value.x` or `line 7`.
class ParseError : public InputError {
 public:
  ParseError(std::string path, const std::string& what)
      : InputError(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

#define OXGEN_ENSURE(cond, msg)                                   \
  do {                                                            \
    if (!(cond)) throw ::oxgen::InvariantError(std::string(msg)); \
  } while (0)

}  // namespace oxgen
