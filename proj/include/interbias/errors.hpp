// interbias/errors.hpp

// Copyright 2026  The InterBias Authors

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

#ifndef INTERBIAS_ERRORS_HPP_
#define INTERBIAS_ERRORS_HPP_

#include <iostream>
#include <stdexcept>
#include <string>

namespace interbias {

// Error conventions used throughout:
//   * std::invalid_argument       — caller broke a precondition.
//   * DataError                   — bad file, bad format, inconsistent inputs.
//   * NumericError                — NaN/Inf during training, diverged runs.
//   * std::optional<T> (empty)    — structurally infeasible instance (e.g. a
//                                   target that no alignment path of length T
//                                   can produce); not an exception so callers
//                                   can skip and continue.

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

}  // namespace interbias

#endif  // INTERBIAS_ERRORS_HPP_
