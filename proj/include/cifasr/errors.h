// Copyright 2026  The cifasr Authors
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

#ifndef CIFASR_ERRORS_H_
#define CIFASR_ERRORS_H_

#include <stdexcept>
#include <string>

namespace cifasr {

// Base of every error raised by the library.  The CLI maps the two families
// below onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape, id-range, file-format and other caller-side contract violations.
class ContractError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class InputTooShortError : public ContractError {
 public:
  using ContractError::ContractError;
};

class FormatError : public ContractError {
 public:
  using ContractError::ContractError;
};

class InfeasibleAlignmentError : public ContractError {
 public:
  using ContractError::ContractError;
};

class DegenerateWeightsError : public ContractError {
 public:
  using ContractError::ContractError;
};

// NaN/Inf appeared in a value that must stay finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cifasr

#endif  // CIFASR_ERRORS_H_
