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

#include <charconv>
#include <complex>
#include <ostream>
#include <span>
#include <string>
#include <system_error>
#include <vector>

namespace freebos {

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) {
        return "nan";
    }
    return {buf, end};
}

/// Occupations joined by ';'.
inline std::string format_config(std::span<const int> occupations) {
    std::string s;
    for (size_t i = 0; i < occupations.size(); i++) {
        if (i > 0) {
            s += ';';
        }
        s += std::to_string(occupations[i]);
    }
    return s;
}

inline std::vector<int> parse_config(const std::string &s) {
    std::vector<int> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t end = s.find(';', start);
        if (end == std::string::npos) {
            end = s.size();
        }
        out.push_back(std::stoi(s.substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

}  // namespace freebos
