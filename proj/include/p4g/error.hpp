#pragma once

#include <stdexcept>
#include <string>

namespace p4g {

// Base for every domain failure. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class LinkError : public Error { using Error::Error; };
class EmptyInputError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class SplitError : public Error { using Error::Error; };

}  // namespace p4g
