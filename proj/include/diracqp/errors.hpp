// Copyright 2026 The diracqp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace diracqp {

/// Invalid user-supplied parameters. The CLI maps this to exit status 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string &what) : std::runtime_error(what) {}
};

/// Caller broke a precondition (index out of range, mismatched grids...).
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string &what) : std::logic_error(what) {}
};

/// Base for failures that depend on the data rather than the configuration.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string &what) : std::runtime_error(what) {}
};

class DegenerateInputError : public DataError {
public:
    using DataError::DataError;
};

/// A tolerance check on a physical identity failed (e.g. complex marginals).
class NumericalIntegrityError : public DataError {
public:
    using DataError::DataError;
};

/// Conditioning on an outcome whose probability is below threshold.
class NullConditioningError : public DataError {
public:
    using DataError::DataError;
};

class NoPhotonsError : public DataError {
public:
    using DataError::DataError;
};

class DegenerateKernelError : public DataError {
public:
    using DataError::DataError;
};

/// Malformed input file. Carries the offending line number when known.
class FormatError : public DataError {
public:
    FormatError(const std::string &what, std::size_t line = 0)
        : DataError(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace diracqp
