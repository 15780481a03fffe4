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
#include <cmath>
#include <complex>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "freebos/errors.hpp"
#include "freebos/model.hpp"
#include "freebos/permanent.hpp"
#include "freebos/rng.hpp"
#include "freebos/text.hpp"

namespace freebos {

/// Occupation numbers (n_0, ..., n_{M-1}).
using FockConfig = std::vector<int>;

/// Output probabilities over Fock configurations of M sites.
struct OutputDistribution {
    int M = 0;
    std::vector<FockConfig> configs;
    std::vector<double> probs;
    /// Normalized amplitudes, |amplitudes[i]|^2 == probs[i].
    std::vector<cplx> amplitudes;
    /// Norm of the unnormalized output state (the Gram permanent for exact
    /// distributions, one for multinomial ones).
    double normalization = 1;
};

inline int total_occupation(std::span<const int> c) {
    int n = 0;
    for (int x : c) {
        if (x < 0) {
            throw InvalidConfig("negative occupation");
        }
        n += x;
    }
    return n;
}

/// N x N matrix whose columns are column j of `rows` repeated n_j times, in
/// ascending j.
template <typename Derived>
Eigen::MatrixXcd expand_columns(const Eigen::MatrixBase<Derived> &rows, std::span<const int> config) {
    if (static_cast<Eigen::Index>(config.size()) != rows.cols()) {
        throw InvalidConfig("configuration has " + std::to_string(config.size()) + " sites, rows have " +
                            std::to_string(rows.cols()));
    }
    const int n = total_occupation(config);
    if (n != rows.rows()) {
        throw InvalidConfig("configuration holds " + std::to_string(n) + " bosons for " +
                            std::to_string(rows.rows()) + " rows");
    }
    Eigen::MatrixXcd out(n, n);
    Eigen::Index c = 0;
    for (size_t j = 0; j < config.size(); j++) {
        for (int k = 0; k < config[j]; k++) {
            out.col(c++) = rows.col(static_cast<Eigen::Index>(j)).template cast<cplx>();
        }
    }
    return out;
}

inline double log_factorial(int n) {
    return std::lgamma(static_cast<double>(n) + 1);
}

/// Per(rows_C) / sqrt(prod_j n_j!). Not normalized by the Gram permanent.
template <typename Derived>
cplx amplitude(const Eigen::MatrixBase<Derived> &rows, std::span<const int> config) {
    Eigen::MatrixXcd sub = expand_columns(rows, config);
    double log_norm = 0;
    for (int nj : config) {
        log_norm += log_factorial(nj);
    }
    return permanent(sub) * std::exp(-0.5 * log_norm);
}

/// Per(G) for G = rows rows^dagger: the squared norm of
/// b_1^dagger ... b_N^dagger |0>.
template <typename Derived>
double gram_permanent(const Eigen::MatrixBase<Derived> &rows) {
    if (rows.rows() > 20) {
        throw TooLarge("gram permanent limited to 20 rows");
    }
    Eigen::MatrixXcd r = rows.template cast<cplx>();
    Eigen::MatrixXcd g = r * r.adjoint();
    return permanent(g).real();
}

inline constexpr double kMaxConfigs = 1e6;

/// Number of occupation vectors of M sites holding N bosons, C(M+N-1, N).
inline double config_count(int M, int N) {
    return std::round(std::exp(std::lgamma(M + N) - std::lgamma(N + 1) - std::lgamma(M)));
}

/// All occupation vectors of M sites summing to N, in lexicographic order
/// from (N, 0, ..., 0) down to (0, ..., 0, N).
inline std::vector<FockConfig> enumerate_configs(int M, int N) {
    if (M < 1 || N < 0) {
        throw InvalidInput("enumerate_configs needs M >= 1 and N >= 0");
    }
    if (config_count(M, N) > kMaxConfigs) {
        throw TooLarge("C(M+N-1, N) exceeds 1e6 for M=" + std::to_string(M) + ", N=" + std::to_string(N));
    }
    std::vector<FockConfig> out;
    FockConfig c(static_cast<size_t>(M), 0);
    auto fill = [&](auto &self, int site, int left) -> void {
        if (site == M - 1) {
            c[site] = left;
            out.push_back(c);
            return;
        }
        for (int k = left; k >= 0; k--) {
            c[site] = k;
            self(self, site + 1, left - k);
        }
    };
    fill(fill, 0, N);
    return out;
}

/// The exact output distribution of b_1^dagger ... b_N^dagger |0> for
/// arbitrary (not necessarily orthonormal) rows: |Per(rows_C)|^2 / prod n_j!
/// divided by the Gram permanent.
template <typename Derived>
OutputDistribution exact_distribution(const Eigen::MatrixBase<Derived> &rows) {
    const int N = static_cast<int>(rows.rows());
    const int M = static_cast<int>(rows.cols());
    if (N > 10) {
        throw TooLarge("exact distributions limited to N <= 10");
    }
    Eigen::MatrixXcd r = rows.template cast<cplx>();
    OutputDistribution dist;
    dist.M = M;
    dist.configs = enumerate_configs(M, N);
    dist.normalization = gram_permanent(r);
    const double scale = 1 / std::sqrt(dist.normalization);
    dist.probs.reserve(dist.configs.size());
    dist.amplitudes.reserve(dist.configs.size());
    for (const auto &c : dist.configs) {
        cplx amp = amplitude(r, c) * scale;
        dist.amplitudes.push_back(amp);
        dist.probs.push_back(std::norm(amp));
    }
    return dist;
}

/// A single mode alpha_s on a few sites of an M-site chain.
struct SharedMode {
    int M = 0;
    std::vector<int> sites;
    std::vector<cplx> alpha;
};

/// The support of `row` where |row_j|^2 > threshold, renormalized.
template <typename Derived>
SharedMode extract_shared_mode(const Eigen::MatrixBase<Derived> &row, double threshold = 1e-8) {
    SharedMode mode;
    mode.M = static_cast<int>(row.size());
    double norm2 = 0;
    for (Eigen::Index j = 0; j < row.size(); j++) {
        cplx a = static_cast<cplx>(row(j));
        if (std::norm(a) > threshold) {
            mode.sites.push_back(static_cast<int>(j));
            mode.alpha.push_back(a);
            norm2 += std::norm(a);
        }
    }
    if (mode.sites.empty()) {
        throw ZeroRowError(0);
    }
    for (auto &a : mode.alpha) {
        a /= std::sqrt(norm2);
    }
    return mode;
}

namespace detail {

inline void check_mode(const SharedMode &mode) {
    if (mode.sites.size() != mode.alpha.size() || mode.sites.empty()) {
        throw InvalidInput("shared mode needs one amplitude per support site");
    }
    double norm2 = 0;
    for (auto a : mode.alpha) {
        norm2 += std::norm(a);
    }
    if (std::abs(norm2 - 1) > 1e-10) {
        throw InvalidInput("shared-mode amplitudes are not normalized (sum |alpha|^2 = " + format_double(norm2) + ")");
    }
    for (int s : mode.sites) {
        if (s < 0 || s >= mode.M) {
            throw InvalidInput("shared-mode site outside of the chain");
        }
    }
}

}  // namespace detail

/// Output distribution of (b^dagger)^N |0> / sqrt(N!) for b^dagger =
/// sum_s alpha_s a_{m_s}^dagger: the multinomial law
///   P(n) = N! / prod n_s! * prod |alpha_s|^(2 n_s)
/// over the support. Configurations are reported on all M sites.
inline OutputDistribution multinomial_distribution(const SharedMode &mode, int N) {
    detail::check_mode(mode);
    const int S = static_cast<int>(mode.sites.size());
    OutputDistribution dist;
    dist.M = mode.M;
    for (const auto &cell : enumerate_configs(S, N)) {
        double log_coef = log_factorial(N);
        for (int n : cell) {
            log_coef -= log_factorial(n);
        }
        cplx amp = std::exp(0.5 * log_coef);
        for (int s = 0; s < S; s++) {
            if (cell[s] > 0) {
                amp *= std::pow(mode.alpha[s], cell[s]);
            }
        }
        FockConfig c(static_cast<size_t>(mode.M), 0);
        for (int s = 0; s < S; s++) {
            c[mode.sites[s]] = cell[s];
        }
        dist.configs.push_back(std::move(c));
        dist.amplitudes.push_back(amp);
        dist.probs.push_back(std::norm(amp));
    }
    return dist;
}

/// `count` independent draws: each boson lands on support site s with
/// probability |alpha_s|^2.
inline std::vector<FockConfig> multinomial_sample(const SharedMode &mode, int N, Stream &rng, int count) {
    detail::check_mode(mode);
    std::vector<double> cumulative;
    double acc = 0;
    for (auto a : mode.alpha) {
        acc += std::norm(a);
        cumulative.push_back(acc);
    }
    std::vector<FockConfig> out;
    out.reserve(static_cast<size_t>(std::max(count, 0)));
    for (int k = 0; k < count; k++) {
        FockConfig c(static_cast<size_t>(mode.M), 0);
        for (int b = 0; b < N; b++) {
            double u = rng.uniform() * acc;
            auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
            size_t s = std::min(static_cast<size_t>(it - cumulative.begin()), cumulative.size() - 1);
            c[mode.sites[s]]++;
        }
        out.push_back(std::move(c));
    }
    return out;
}

/// Relative frequencies of the sampled configurations.
inline OutputDistribution empirical_distribution(std::span<const FockConfig> samples, int M) {
    std::map<FockConfig, int> counts;
    for (const auto &c : samples) {
        counts[c]++;
    }
    OutputDistribution dist;
    dist.M = M;
    for (const auto &[c, k] : counts) {
        dist.configs.push_back(c);
        dist.probs.push_back(static_cast<double>(k) / static_cast<double>(samples.size()));
        dist.amplitudes.push_back(std::sqrt(dist.probs.back()));
    }
    return dist;
}

/// Total variation distance; configurations missing from one side count as zero.
inline double tvd(const OutputDistribution &p, const OutputDistribution &q) {
    std::map<FockConfig, double> diff;
    for (size_t i = 0; i < p.configs.size(); i++) {
        diff[p.configs[i]] += p.probs[i];
    }
    for (size_t i = 0; i < q.configs.size(); i++) {
        diff[q.configs[i]] -= q.probs[i];
    }
    std::vector<double> terms;
    terms.reserve(diff.size());
    for (const auto &[c, d] : diff) {
        terms.push_back(std::abs(d));
    }
    std::sort(terms.begin(), terms.end());
    double s = 0;
    for (double t : terms) {
        s += t;
    }
    return std::min(1.0, 0.5 * s);
}

/// CSV with columns config,prob,amplitude_re,amplitude_im; configs are
/// ';'-joined occupations.
inline void write_distribution_csv(std::ostream &out, const OutputDistribution &dist) {
    out << "config,prob,amplitude_re,amplitude_im\n";
    for (size_t i = 0; i < dist.configs.size(); i++) {
        out << format_config(dist.configs[i]) << ',' << format_double(dist.probs[i]) << ','
            << format_double(dist.amplitudes[i].real()) << ',' << format_double(dist.amplitudes[i].imag()) << '\n';
    }
}

}  // namespace freebos
