/* Copyright 2026 The wsad Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef WSAD_ERRORS_HPP_
#define WSAD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace wsad {

// Base of every error the library raises. Callers that only need a message
// can catch this; tests catch the concrete subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary files.
class FormatError : public Error {
 public:
  using Error::Error;
};
class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};
class DtypeError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Raised by mining when the anomaly training split is empty.
class NoAnomalyImages : public Error {
 public:
  using Error::Error;
};

class EmptyRetention : public Error {
 public:
  using Error::Error;
};

// Metric is undefined for the given input (e.g. a single class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace wsad

#endif  // WSAD_ERRORS_HPP_
