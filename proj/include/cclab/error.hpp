#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cclab {

// Base for every error raised by the library. The CLI maps any of these to a
// one-line diagnostic and a nonzero exit status.
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

class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, std::size_t index = npos)
      : Error(what), index_(index) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Index of the failing image when raised from dataset generation.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class VerificationError : public Error {
 public:
  VerificationError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace cclab
