#ifndef GRAINFIELD_ERRORS_HPP_
#define GRAINFIELD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace grainfield {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadrature or series evaluation that did not reach its tolerance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid or infeasible inputs (bad parameters, window too small, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class UndefinedRankError : public Error {
 public:
  using Error::Error;
};

class IllConditionedError : public Error {
 public:
  using Error::Error;
};

class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, std::string key)
      : Error(format(message, line, key)), line_(line), key_(std::move(key)) {}

  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  static std::string format(const std::string& message, int line,
                            const std::string& key) {
    std::string out = "config";
    if (line > 0) out += " line " + std::to_string(line);
    if (!key.empty()) out += " key '" + key + "'";
    return out + ": " + message;
  }

  int line_;
  std::string key_;
};

}  // namespace grainfield

#endif  // GRAINFIELD_ERRORS_HPP_
