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

#include <algorithm>
#include <cstdint>
#include <random>

namespace freebos {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed of the stream `index` under `master`. A counter-mode hash: the pair is
/// absorbed into two rounds of the SplitMix64 finalizer, so the mapping depends
/// only on its arguments and never on thread scheduling.
constexpr uint64_t derive_seed(uint64_t master, uint64_t index) {
    return mix64(mix64(master) ^ mix64(index ^ 0x6A09E667F3BCC909ULL));
}

/// Random stream with portable draws.
///
/// std::uniform_*_distribution are implementation defined, so the floating
/// point and bounded-integer draws are spelled out here; results are
/// identical across standard libraries.
class Stream {
   public:
    using result_type = uint64_t;

    explicit Stream(uint64_t seed) : engine_(seed) {
    }

    static constexpr result_type min() {
        return std::mt19937_64::min();
    }
    static constexpr result_type max() {
        return std::mt19937_64::max();
    }
    result_type operator()() {
        return engine_();
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound). Lemire's multiply-and-reject.
    uint64_t below(uint64_t bound) {
        uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto low = static_cast<uint64_t>(m);
        if (low < bound) {
            uint64_t threshold = -bound % bound;
            while (low < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * bound;
                low = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    bool bernoulli(double p) {
        return uniform() < p;
    }

    /// Fisher-Yates shuffle with portable index draws.
    template <typename RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; i--) {
            uint64_t j = below(i);
            std::iter_swap(first + (i - 1), first + j);
        }
    }

   private:
    std::mt19937_64 engine_;
};

/// The stream for realization `index` of an ensemble seeded by `master`.
inline Stream derive_stream(uint64_t master, uint64_t index) {
    return Stream(derive_seed(master, index));
}

}  // namespace freebos
