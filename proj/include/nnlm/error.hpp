#pragma once

#include <stdexcept>
#include <string>

namespace nnlm {

/// Base class of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class EncodingError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };
class EvaluationError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class ContractError : public Error { public: using Error::Error; };
class PreprocessingError : public Error { public: using Error::Error; };
class TrainingError : public Error { public: using Error::Error; };
class ConversionError : public Error { public: using Error::Error; };

}  // namespace nnlm
