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

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "freebos/errors.hpp"

namespace freebos {

namespace detail {

template <typename Scalar>
Scalar pairwise_reduce(std::span<const Scalar> xs) {
    if (xs.size() <= 4) {
        Scalar s{};
        for (const auto &x : xs) {
            s += x;
        }
        return s;
    }
    size_t half = xs.size() / 2;
    return pairwise_reduce(xs.first(half)) + pairwise_reduce(xs.subspan(half));
}

template <typename Derived>
void check_square(const Eigen::MatrixBase<Derived> &a) {
    if (a.rows() != a.cols()) {
        throw InvalidInput("permanent of a non-square " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                           " matrix");
    }
}

}  // namespace detail

inline constexpr int kMaxRyserSize = 30;
inline constexpr int kMaxNaiveSize = 9;

/// Permanent by Ryser's inclusion-exclusion formula,
///   Per(A) = (-1)^n sum_{S} (-1)^{|S|} prod_i sum_{j in S} a_ij,
/// visiting column subsets in Gray-code order so each step adds or removes a
/// single column from the running row sums. O(2^n n).
///
/// Terms are accumulated sequentially inside fixed blocks of subsets and the
/// block sums are combined pairwise, so the rounding is reproducible and
/// grows slowly with n. Integer matrices with modest entries give exact results.
template <typename Derived>
typename Derived::Scalar permanent(const Eigen::MatrixBase<Derived> &a) {
    using Scalar = typename Derived::Scalar;
    detail::check_square(a);
    const int n = static_cast<int>(a.rows());
    if (n == 0) {
        return Scalar(1);
    }
    if (n > kMaxRyserSize) {
        throw TooLarge("permanent limited to n <= " + std::to_string(kMaxRyserSize));
    }
    constexpr uint64_t kBlock = 1 << 12;
    std::vector<Scalar> row_sum(static_cast<size_t>(n), Scalar(0));
    std::vector<Scalar> blocks;
    Scalar acc(0);
    const uint64_t subsets = uint64_t{1} << n;
    for (uint64_t k = 1; k < subsets; k++) {
        int j = std::countr_zero(k);
        uint64_t gray = k ^ (k >> 1);
        if ((gray >> j) & 1) {
            for (int i = 0; i < n; i++) {
                row_sum[i] += a(i, j);
            }
        } else {
            for (int i = 0; i < n; i++) {
                row_sum[i] -= a(i, j);
            }
        }
        Scalar prod = row_sum[0];
        for (int i = 1; i < n; i++) {
            prod *= row_sum[i];
        }
        if (std::popcount(gray) % 2 == 1) {
            acc -= prod;
        } else {
            acc += prod;
        }
        if (k % kBlock == kBlock - 1) {
            blocks.push_back(acc);
            acc = Scalar(0);
        }
    }
    blocks.push_back(acc);
    Scalar total = detail::pairwise_reduce<Scalar>(blocks);
    return n % 2 == 1 ? -total : total;
}

/// Sum over all n! permutations. Reference implementation for tests.
template <typename Derived>
typename Derived::Scalar permanent_naive(const Eigen::MatrixBase<Derived> &a) {
    using Scalar = typename Derived::Scalar;
    detail::check_square(a);
    const int n = static_cast<int>(a.rows());
    if (n > kMaxNaiveSize) {
        throw TooLarge("naive permanent limited to n <= " + std::to_string(kMaxNaiveSize));
    }
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Scalar total(0);
    do {
        Scalar prod(1);
        for (int i = 0; i < n; i++) {
            prod *= a(i, perm[i]);
        }
        total += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return total;
}

}  // namespace freebos
