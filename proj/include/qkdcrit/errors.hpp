#pragma once

#include <stdexcept>
#include <string>

namespace qkdcrit {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class NotHermitianError : public Error {
public:
  explicit NotHermitianError(const std::string& what) : Error(what) {}
};

class DimensionCapError : public Error {
public:
  explicit DimensionCapError(const std::string& what) : Error(what) {}
};

class DimensionMismatchError : public Error {
public:
  explicit DimensionMismatchError(const std::string& what) : Error(what) {}
};

class NotStateError : public Error {
public:
  explicit NotStateError(const std::string& what) : Error(what) {}
};

class NegativeProbabilityError : public Error {
public:
  explicit NegativeProbabilityError(const std::string& what) : Error(what) {}
};

class OutOfRangeError : public Error {
public:
  explicit OutOfRangeError(const std::string& what) : Error(what) {}
};

class ConfigInvalidError : public Error {
public:
  explicit ConfigInvalidError(const std::string& what) : Error(what) {}
};

class EmptyKeyError : public Error {
public:
  explicit EmptyKeyError(const std::string& what) : Error(what) {}
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, long line = -1)
      : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_number(line) {}
  long line_number;
};

class UnknownSuiteError : public Error {
public:
  explicit UnknownSuiteError(const std::string& what) : Error(what) {}
};

/// File could not be opened, read, or written.
class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace qkdcrit
