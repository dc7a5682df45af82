#pragma once

#include <stdexcept>
#include <string>

namespace berry {

// Error taxonomy shared by every module. The CLI maps these onto exit codes:
// numerical failures exit 3, everything else a user can fix exits 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace berry
