#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace hicomp {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed encoded image. `offset` is the byte position the decoder had
// reached when it gave up.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : Error("decode error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Scene validation failure; carries the offending foreground when there is one.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::optional<std::size_t> foreground = {})
      : Error(foreground ? "foreground " + std::to_string(*foreground) + ": " + what : what),
        foreground_(foreground) {}
  std::optional<std::size_t> foreground() const noexcept { return foreground_; }

 private:
  std::optional<std::size_t> foreground_;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

class InvalidWeights : public Error {
 public:
  using Error::Error;
};

class FactorialBlowup : public Error {
 public:
  FactorialBlowup(std::size_t requested, std::size_t cap)
      : Error("factorial blowup: " + std::to_string(requested) + " foregrounds exceeds the cap of " +
              std::to_string(cap)),
        cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

class Divergence : public Error {
 public:
  explicit Divergence(std::size_t step)
      : Error("optimization diverged (non-finite loss) at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

}  // namespace hicomp
