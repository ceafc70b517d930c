#pragma once

#include <stdexcept>
#include <string>

namespace hmeqa {

/// Operand extents do not agree with what an operation requires.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf was produced; the message names the producing primitive.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An API precondition was violated (non-scalar loss, empty support, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class VocabularyError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t batch)
      : std::runtime_error(what), batch_(batch) {}
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t batch_;
};

}  // namespace hmeqa
