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

#include "freebos/observables.hpp"

#include <gtest/gtest.h>

#include <numbers>

#include "freebos/rng.hpp"

using namespace freebos;

namespace {

using Vec = Eigen::RowVectorXcd;

Vec basis(int M, int j) {
    Vec v = Vec::Zero(M);
    v[j] = 1;
    return v;
}

Vec uniform(int M) {
    return Vec::Constant(M, 1 / std::sqrt(static_cast<double>(M)));
}

Vec random_unit(int M, Stream &rng) {
    Vec v(M);
    for (auto &x : v) {
        x = {rng.uniform() - 0.5, rng.uniform() - 0.5};
    }
    return v / v.norm();
}

double gaussian(Stream &rng) {
    double u1 = 1 - rng.uniform();
    double u2 = rng.uniform();
    return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

}  // namespace

TEST(mean_position, examples) {
    EXPECT_EQ(mean_position(basis(8, 5)), 5.0);
    EXPECT_NEAR(mean_position(uniform(4)), 1.5, 1e-15);
    Vec v = Vec::Zero(3);
    v[0] = v[2] = 1 / std::sqrt(2.0);
    EXPECT_NEAR(mean_position(v), 1.0, 1e-15);
}

TEST(packet_spread, examples) {
    EXPECT_EQ(packet_spread(basis(8, 3)), 0.0);
    Vec v = Vec::Zero(3);
    v[0] = v[2] = 1 / std::sqrt(2.0);
    EXPECT_NEAR(packet_spread(v), 1.0, 1e-15);
    EXPECT_NEAR(packet_spread(uniform(4)), 1.25, 1e-15);
}

TEST(observables, global_phase_invariance) {
    Stream rng(7);
    for (int k = 0; k < 20; k++) {
        Vec v = random_unit(16, rng);
        Vec w = v * std::polar(1.0, 6.28 * rng.uniform());
        EXPECT_NEAR(mean_position(v), mean_position(w), 1e-12);
        EXPECT_NEAR(packet_spread(v), packet_spread(w), 1e-12);
        EXPECT_NEAR(ipr(v), ipr(w), 1e-14);
    }
}

TEST(endpoint_fluctuation, examples) {
    std::vector<double> at_origin(5, 7.0);
    EXPECT_EQ(endpoint_fluctuation(at_origin, 7), 0.0);
    std::vector<double> pm{8, 6, 8, 6, 6};
    EXPECT_EQ(endpoint_fluctuation(pm, 7), 1.0);
    EXPECT_THROW(endpoint_fluctuation(std::vector<double>{}, 0), InsufficientData);
}

TEST(endpoint_fluctuation, estimates_planted_variance) {
    Stream rng(2024);
    const double sigma = 3.0;
    const int n = 4000;
    std::vector<double> xs(n);
    for (auto &x : xs) {
        x = 50 + sigma * gaussian(rng);
    }
    double var = sigma * sigma;
    EXPECT_NEAR(endpoint_fluctuation(xs, 50), var, 3 * var * std::sqrt(2.0 / n));
}

TEST(ipr, examples) {
    EXPECT_EQ(ipr(basis(5, 2), 2), 1.0);
    EXPECT_NEAR(ipr(uniform(10), 2), 0.1, 1e-15);
    Vec v(2);
    v << std::sqrt(0.8), std::sqrt(0.2);
    EXPECT_NEAR(ipr(v, 2), 0.68, 1e-15);
    EXPECT_NEAR(ipr(v, 3), 0.512 + 0.008, 1e-15);
    EXPECT_THROW(ipr(v, 1), InvalidInput);
}

TEST(ipr, permutation_invariant_and_bounded_below) {
    Stream rng(12);
    for (int k = 0; k < 50; k++) {
        const int M = 12;
        Vec v = random_unit(M, rng);
        Vec p = v;
        rng.shuffle(p.begin(), p.end());
        EXPECT_NEAR(ipr(v), ipr(p), 1e-15);
        EXPECT_GE(ipr(v), 1.0 / M);
        EXPECT_LE(ipr(v), 1.0);
    }
    EXPECT_NEAR(ipr(uniform(12)), 1.0 / 12, 1e-15);
}

TEST(tau2, examples) {
    for (int L : {2, 16, 1000}) {
        EXPECT_EQ(tau2_of_L(std::log(ipr(basis(L, 0))), L), 0.0);
        EXPECT_NEAR(tau2_of_L(std::log(ipr(uniform(L))), L), 1.0, 1e-12);
        double a = 0.3, tau = 0.6;
        double I2 = a * std::pow(L, -tau);
        EXPECT_NEAR(tau2_of_L(std::log(I2), L), -std::log(a) / std::log(L) + tau, 1e-12);
    }
    EXPECT_THROW(tau2_of_L(0, 1), InvalidInput);
}

TEST(extrapolate_tau2, planted_forms) {
    std::vector<std::pair<int, double>> localized, extended;
    for (int L : {64, 128, 256, 512, 1024}) {
        localized.push_back({L, -std::log(0.5) / std::log(L)});
        extended.push_back({L, 1.0});
    }
    auto loc = extrapolate_tau2(localized);
    EXPECT_NEAR(loc.tau2_inf, 0, 1e-10);
    EXPECT_NEAR(loc.slope, std::log(2.0), 1e-10);
    auto ext = extrapolate_tau2(extended);
    EXPECT_NEAR(ext.tau2_inf, 1, 1e-12);
    EXPECT_NEAR(ext.slope, 0, 1e-12);
    std::vector<std::pair<int, double>> two{{64, 0.3}, {128, 0.2}};
    EXPECT_THROW(extrapolate_tau2(two), InsufficientData);
    std::vector<std::pair<int, double>> repeated{{64, 0.3}, {64, 0.2}, {128, 0.1}};
    EXPECT_THROW(extrapolate_tau2(repeated), InsufficientData);
}

TEST(pair_distance, examples) {
    Eigen::MatrixXcd same(3, 6);
    same.row(0) = same.row(1) = same.row(2) = uniform(6);
    EXPECT_EQ(pair_distance(same), 0.0);
    Eigen::MatrixXcd two(2, 10);
    two.row(0) = basis(10, 3);
    two.row(1) = basis(10, 7);
    EXPECT_EQ(pair_distance(two), 4.0);
    Eigen::MatrixXcd three(3, 3);
    three.row(0) = basis(3, 0);
    three.row(1) = basis(3, 1);
    three.row(2) = basis(3, 2);
    EXPECT_NEAR(pair_distance(three), 4.0 / 3, 1e-15);
    EXPECT_THROW(pair_distance(Eigen::MatrixXcd(basis(3, 0))), InsufficientData);
}

TEST(row_overlap, examples) {
    Stream rng(1);
    Vec v = random_unit(9, rng);
    Eigen::MatrixXcd phased(3, 9);
    phased.row(0) = v;
    phased.row(1) = v * std::polar(1.0, 0.7);
    phased.row(2) = v * std::polar(1.0, -2.1);
    EXPECT_NEAR(row_overlap(phased), 1.0, 1e-12);
    EXPECT_NEAR(pair_distance(phased), 0.0, 1e-12);
    Eigen::MatrixXcd orth(2, 4);
    orth.row(0) = basis(4, 0);
    orth.row(1) = basis(4, 2);
    EXPECT_EQ(row_overlap(orth), 0.0);
    Eigen::MatrixXcd half(2, 2);
    half << 1, 0, 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    EXPECT_NEAR(row_overlap(half), 1 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(row_overlap(Eigen::MatrixXcd(basis(3, 0))), InsufficientData);
}

TEST(power_law_fit, planted_exponents) {
    std::vector<SeriesPoint> sq, kpz;
    for (int t = 1; t <= 100; t++) {
        sq.push_back({t, static_cast<double>(t) * t, 0, 1});
        kpz.push_back({t, 3 * std::pow(t, 4.0 / 3), 0, 1});
    }
    ScalingFit f = power_law_fit(sq, {10, 100});
    EXPECT_NEAR(f.exponent, 2, 1e-10);
    EXPECT_NEAR(f.residual, 0, 1e-10);
    EXPECT_EQ(f.points, 91);
    ScalingFit g = power_law_fit(kpz, {5, 80});
    EXPECT_NEAR(g.exponent, 4.0 / 3, 1e-10);
    EXPECT_NEAR(g.amplitude_log, std::log(3.0), 1e-10);
    EXPECT_EQ(g.window, (std::pair<int, int>{5, 80}));
}

TEST(power_law_fit, errors) {
    std::vector<SeriesPoint> s;
    for (int t = 1; t <= 20; t++) {
        s.push_back({t, t == 12 ? 0.0 : 1.0 * t, 0, 1});
    }
    EXPECT_THROW(power_law_fit(s, {1, 20}), InvalidData);
    EXPECT_NO_THROW(power_law_fit(s, {1, 11}));
    EXPECT_THROW(power_law_fit(s, {1, 4}), InsufficientData);
}

TEST(stats, mean_stderr_and_pairwise_sum) {
    std::vector<double> xs{1, 2, 3, 4};
    MeanStderr m = mean_stderr(xs);
    EXPECT_EQ(m.mean, 2.5);
    EXPECT_NEAR(m.std_error, std::sqrt((1.25 * 4 / 3) / 4), 1e-15);
    EXPECT_EQ(mean_stderr(std::vector<double>{5}).std_error, 0.0);
    std::vector<double> many(1001, 0.1);
    EXPECT_NEAR(pairwise_sum(many), 100.1, 1e-12);
}
