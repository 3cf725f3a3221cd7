#pragma once

#include <stdexcept>
#include <string>

namespace scaledgd {

// Shape mismatch between operands (rows/cols/modes disagree with the contract).
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Parameter outside its admissible range (negative threshold, p outside [0,1], ...).
class ValueError : public std::invalid_argument {
 public:
  explicit ValueError(const std::string& what) : std::invalid_argument(what) {}
};

// Gram matrix fell below the relative pivot floor with no ridge to regularize it.
class SingularGramError : public std::runtime_error {
 public:
  explicit SingularGramError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed config or data file; message carries the location when known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem-level failure (unreadable path, failed write).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void require_dims(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

inline void require_value(bool cond, const std::string& msg) {
  if (!cond) throw ValueError(msg);
}

}  // namespace scaledgd
