/*
 * Copyright 2026 The bootmon Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BOOTMON_ERROR_H_
#define BOOTMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace bootmon {

// Malformed, missing or inconsistent input data. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A well-formed request that a component cannot honour (bad dimensions,
// unsupported model kind, parameter out of range).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace bootmon

#endif  // BOOTMON_ERROR_H_
