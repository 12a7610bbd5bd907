// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vkg {

// Root of every error thrown by the library. Callers that only need a
// diagnostic can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };

// kg_schema
class GrammarViolation : public Error { using Error::Error; };

// corpus
class EmptyCorpus : public Error { using Error::Error; };
class MissingOutput : public Error { using Error::Error; };
class UnknownToken : public Error { using Error::Error; };

// tensor_core / lm_core
class ShapeError : public Error { using Error::Error; };
class NonScalarLoss : public Error { using Error::Error; };
class EmptyMask : public Error { using Error::Error; };
class LengthError : public Error { using Error::Error; };

// trainer
class NonFiniteGradient : public Error { using Error::Error; };

// metrics
class AlignmentError : public Error { using Error::Error; };

// vision_features
class MissingFeatures : public Error { using Error::Error; };

}  // namespace vkg
