// radioasr/error.h

// Copyright 2026 The radioasr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RADIOASR_ERROR_H_
#define RADIOASR_ERROR_H_

#include <stdexcept>
#include <string>

namespace radioasr {

// Bad arguments: shape mismatch, out-of-range parameters, too-short signals,
// out-of-vocabulary characters.
class InvalidInputError : public std::invalid_argument {
 public:
  explicit InvalidInputError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Operation called on an object in the wrong state (e.g. backward() on a
// tensor that is not on a tape).
class InvalidStateError : public std::logic_error {
 public:
  explicit InvalidStateError(const std::string& what)
      : std::logic_error(what) {}
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what)
      : std::runtime_error(what) {}
};

// The CTC target cannot be aligned to the available number of frames.
class AlignmentInfeasibleError : public InvalidInputError {
 public:
  explicit AlignmentInfeasibleError(const std::string& what)
      : InvalidInputError(what) {}
};

// Training produced a non-finite loss or gradient. `report` is the JSON
// step report of the failing step.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::string report)
      : NumericError(what), report_(std::move(report)) {}
  const std::string& report() const { return report_; }

 private:
  std::string report_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Should-not-happen conditions inside a kernel.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace radioasr

#endif  // RADIOASR_ERROR_H_
