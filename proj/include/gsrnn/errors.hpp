#pragma once

#include <stdexcept>
#include <string>

namespace gsrnn {

// Input did not have the shape, size or structure an operation requires.
class structural_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced (or was handed) a non-finite value.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class training_error : public numeric_error {
 public:
  training_error(std::size_t epoch, const std::string& what)
      : numeric_error("training diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class degenerate_series_error : public numeric_error {
 public:
  using numeric_error::numeric_error;
};

// Text input errors carry the 1-based line number when one applies.
class parse_error : public structural_error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : structural_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class gap_error : public structural_error {
 public:
  using structural_error::structural_error;
};

class duplicate_error : public structural_error {
 public:
  using structural_error::structural_error;
};

class checkpoint_error : public structural_error {
 public:
  using structural_error::structural_error;
};

class checkpoint_version_error : public checkpoint_error {
 public:
  using checkpoint_error::checkpoint_error;
};

class checkpoint_hash_error : public checkpoint_error {
 public:
  using checkpoint_error::checkpoint_error;
};

class checkpoint_corrupt_error : public checkpoint_error {
 public:
  using checkpoint_error::checkpoint_error;
};

class checkpoint_shape_error : public checkpoint_error {
 public:
  using checkpoint_error::checkpoint_error;
};

}  // namespace gsrnn
