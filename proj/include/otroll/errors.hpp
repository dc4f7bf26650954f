#ifndef OTROLL_ERRORS_HPP
#define OTROLL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace otroll {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A note or cell lies outside the grid it is mapped onto.
class RangeError : public Error {
public:
  using Error::Error;
};

/// Two matrices (or a matrix and a grid) disagree on dimensions.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A value violates a type invariant (non-finite entry, bad parameter).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// The grid cannot hold the requested number of synthetic notes.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Malformed binary input. `offset()` is the byte position of the fault.
class FormatError : public Error {
public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// A value does not fit the target encoding (e.g. MIDI tick range).
class OverflowError : public Error {
public:
  using Error::Error;
};

}  // namespace otroll

#endif  // OTROLL_ERRORS_HPP
