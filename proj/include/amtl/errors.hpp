#pragma once

#include <stdexcept>
#include <string>

namespace amtl {

// Base of every error the library raises. Callers that only care whether a
// step failed catch this; the bench harness records it as a failed model run.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class EmptyDatasetError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class SizeError : public Error { using Error::Error; };
class DegenerateFeatureError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class WeightError : public Error { using Error::Error; };
class DivergenceError : public Error { using Error::Error; };
class ObjectiveError : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace amtl
