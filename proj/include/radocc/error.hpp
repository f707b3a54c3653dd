#pragma once

#include <stdexcept>
#include <string>

namespace radocc {

// All library errors derive from std::runtime_error or std::invalid_argument so
// callers can catch by standard category. The CLI maps ConfigError to exit 2.

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExtrapolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace radocc
