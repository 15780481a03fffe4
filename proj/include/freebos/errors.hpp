// Copyright 2026 The freebos Authors
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

namespace freebos {

/// A CircuitSpec or builder argument violates its invariants.
struct InvalidSpec : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A layer does not fit the vector it is applied to.
struct InvalidLayer : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed numeric input (non-square matrix, unnormalized amplitudes, ...).
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A Fock configuration whose occupations do not sum to the row count.
struct InvalidConfig : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Values that cannot enter a fit (e.g. nonpositive values under a log).
struct InvalidData : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InsufficientData : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// An enumeration would exceed its size bound.
struct TooLarge : std::length_error {
    using std::length_error::length_error;
};

/// Every amplitude of a mode row vanished. `period` is the 1-based period
/// at which it happened (0 when raised outside of a time evolution).
struct ZeroRowError : std::runtime_error {
    explicit ZeroRowError(int period)
        : std::runtime_error("mode row became zero at period " + std::to_string(period)), period(period) {
    }
    int period;
};

}  // namespace freebos
