#pragma once

#include <stdexcept>
#include <string>

namespace artl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lattice, target, band or tensor shapes disagree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// No alignment satisfies the band restriction (the loss would be +inf).
class BandInfeasible : public Error {
 public:
  using Error::Error;
};

class SizeGuardExceeded : public Error {
 public:
  using Error::Error;
};

/// A non-silence word without any word pieces.
class EmptyWordPieces : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

/// Malformed file or record. The message carries the 1-based line when known.
class FormatError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace artl
