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
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "freebos/errors.hpp"

namespace freebos {

/// Pairwise summation in fixed index order; the result depends only on the
/// values and their order.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0;
        for (double x : xs) {
            s += x;
        }
        return s;
    }
    size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct MeanStderr {
    double mean = 0;
    double std_error = 0;
};

/// Sample mean and standard error of the mean (zero for a single sample).
inline MeanStderr mean_stderr(std::span<const double> xs) {
    if (xs.empty()) {
        throw InsufficientData("mean of an empty sample");
    }
    auto n = static_cast<double>(xs.size());
    double mean = pairwise_sum(xs) / n;
    if (xs.size() == 1) {
        return {mean, 0};
    }
    std::vector<double> dev(xs.size());
    for (size_t i = 0; i < xs.size(); i++) {
        dev[i] = (xs[i] - mean) * (xs[i] - mean);
    }
    double var = pairwise_sum(dev) / (n - 1);
    return {mean, std::sqrt(var / n)};
}

/// One point of a disorder-averaged time series.
struct SeriesPoint {
    int t = 0;
    double value = 0;
    double std_error = 0;
    int n = 1;
};

struct ScalingFit {
    double exponent = 0;
    /// Intercept of log(value) against log(t).
    double amplitude_log = 0;
    std::pair<int, int> window{0, 0};
    /// RMS of the log-space residuals.
    double residual = 0;
    int points = 0;
};

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double residual = 0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InsufficientData("line fit needs at least two points");
    }
    auto n = static_cast<double>(x.size());
    double mx = pairwise_sum(x) / n;
    double my = pairwise_sum(y) / n;
    std::vector<double> sxy(x.size()), sxx(x.size());
    for (size_t i = 0; i < x.size(); i++) {
        sxy[i] = (x[i] - mx) * (y[i] - my);
        sxx[i] = (x[i] - mx) * (x[i] - mx);
    }
    double denom = pairwise_sum(sxx);
    if (!(denom > 0)) {
        throw InsufficientData("line fit needs distinct abscissae");
    }
    LineFit fit;
    fit.slope = pairwise_sum(sxy) / denom;
    fit.intercept = my - fit.slope * mx;
    std::vector<double> r2(x.size());
    for (size_t i = 0; i < x.size(); i++) {
        double r = y[i] - (fit.intercept + fit.slope * x[i]);
        r2[i] = r * r;
    }
    fit.residual = std::sqrt(pairwise_sum(r2) / n);
    return fit;
}

/// Sum_j j |v_j|^2 with 0-based j.
template <typename Derived>
double mean_position(const Eigen::MatrixBase<Derived> &v) {
    double s = 0;
    for (Eigen::Index j = 0; j < v.size(); j++) {
        s += static_cast<double>(j) * static_cast<double>(std::norm(v(j)));
    }
    return s;
}

/// Sum_j (j - xbar)^2 |v_j|^2.
template <typename Derived>
double packet_spread(const Eigen::MatrixBase<Derived> &v) {
    double xbar = mean_position(v);
    double s = 0;
    for (Eigen::Index j = 0; j < v.size(); j++) {
        double d = static_cast<double>(j) - xbar;
        s += d * d * static_cast<double>(std::norm(v(j)));
    }
    return s;
}

/// Sum_j |v_j|^(2q).
template <typename Derived>
double ipr(const Eigen::MatrixBase<Derived> &v, double q = 2) {
    if (!(q > 1)) {
        throw InvalidInput("ipr needs q > 1");
    }
    double s = 0;
    for (Eigen::Index j = 0; j < v.size(); j++) {
        double w = static_cast<double>(std::norm(v(j)));
        s += q == 2 ? w * w : std::pow(w, q);
    }
    return s;
}

/// Weight on the `width` sites at either end of the chain.
template <typename Derived>
double edge_weight(const Eigen::MatrixBase<Derived> &v, int width) {
    double s = 0;
    const Eigen::Index m = v.size();
    for (Eigen::Index j = 0; j < m; j++) {
        if (j < width || j >= m - width) {
            s += static_cast<double>(std::norm(v(j)));
        }
    }
    return s;
}

/// Mean over realizations of (xbar - origin)^2.
inline double endpoint_fluctuation(std::span<const double> xbars, double origin) {
    if (xbars.empty()) {
        throw InsufficientData("endpoint fluctuation of an empty sample");
    }
    std::vector<double> sq(xbars.size());
    for (size_t i = 0; i < xbars.size(); i++) {
        sq[i] = (xbars[i] - origin) * (xbars[i] - origin);
    }
    return pairwise_sum(sq) / static_cast<double>(sq.size());
}

/// -mean(log I2) / log L.
inline double tau2_of_L(double mean_log_I2, int L) {
    if (L < 2) {
        throw InvalidInput("tau2 needs L >= 2");
    }
    return -mean_log_I2 / std::log(static_cast<double>(L));
}

struct Tau2Extrapolation {
    double tau2_inf = 0;
    /// Coefficient of 1/log L; equals -log a for I2 = a L^-tau2.
    double slope = 0;
};

/// OLS of tau2(L) against 1/log L; the intercept is the L -> infinity value.
inline Tau2Extrapolation extrapolate_tau2(std::span<const std::pair<int, double>> points) {
    std::vector<int> ls;
    for (const auto &pt : points) {
        ls.push_back(pt.first);
    }
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    if (ls.size() < 3) {
        throw InsufficientData("tau2 extrapolation needs at least three distinct L");
    }
    std::vector<double> x, y;
    for (const auto &[L, tau] : points) {
        if (L < 2) {
            throw InvalidInput("tau2 extrapolation needs L >= 2");
        }
        x.push_back(1 / std::log(static_cast<double>(L)));
        y.push_back(tau);
    }
    LineFit f = fit_line(x, y);
    return {f.intercept, f.slope};
}

/// Mean over all unordered row pairs of |xbar_i - xbar_k|.
template <typename Derived>
double pair_distance(const Eigen::MatrixBase<Derived> &rows) {
    const Eigen::Index n = rows.rows();
    if (n < 2) {
        throw InsufficientData("pair distance needs at least two rows");
    }
    std::vector<double> xbar(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; i++) {
        xbar[static_cast<size_t>(i)] = mean_position(rows.row(i));
    }
    std::vector<double> d;
    d.reserve(static_cast<size_t>(n * (n - 1) / 2));
    for (size_t i = 0; i < xbar.size(); i++) {
        for (size_t k = i + 1; k < xbar.size(); k++) {
            d.push_back(std::abs(xbar[i] - xbar[k]));
        }
    }
    return pairwise_sum(d) / static_cast<double>(d.size());
}

/// Minimum over row pairs of |<row_i, row_k>|; 1 iff all rows agree up to phase.
template <typename Derived>
double row_overlap(const Eigen::MatrixBase<Derived> &rows) {
    const Eigen::Index n = rows.rows();
    if (n < 2) {
        throw InsufficientData("row overlap needs at least two rows");
    }
    auto gram = (rows.conjugate() * rows.transpose()).eval();
    double worst = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; i++) {
        for (Eigen::Index k = i + 1; k < n; k++) {
            worst = std::min(worst, static_cast<double>(std::abs(gram(i, k))));
        }
    }
    return worst;
}

/// Fits log(value) = amplitude_log + exponent log(t) over t in [t_min, t_max].
inline ScalingFit power_law_fit(std::span<const SeriesPoint> series, std::pair<int, int> window) {
    if (window.first > window.second) {
        throw InvalidInput("empty fit window");
    }
    std::vector<double> x, y;
    for (const auto &pt : series) {
        if (pt.t < window.first || pt.t > window.second) {
            continue;
        }
        if (!(pt.value > 0) || pt.t <= 0) {
            throw InvalidData("nonpositive point at t=" + std::to_string(pt.t) + " inside the fit window");
        }
        x.push_back(std::log(static_cast<double>(pt.t)));
        y.push_back(std::log(pt.value));
    }
    if (x.size() < 5) {
        throw InsufficientData("power-law fit needs at least five points in the window");
    }
    LineFit f = fit_line(x, y);
    return {f.slope, f.intercept, window, f.residual, static_cast<int>(x.size())};
}

}  // namespace freebos
