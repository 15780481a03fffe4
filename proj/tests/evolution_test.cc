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

#include "freebos/evolution.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace freebos;

namespace {

ModeVector<double> basis(int M, int j) {
    ModeVector<double> v = ModeVector<double>::Zero(M);
    v[j] = 1;
    return v;
}

CircuitSpec brickwork(int M, int T, double beta, uint64_t seed) {
    CircuitSpec s;
    s.model = Model::BrickworkGate;
    s.M = M;
    s.T = T;
    s.beta = beta;
    s.seed = seed;
    return s;
}

std::vector<int> all_times(int T) {
    std::vector<int> t(static_cast<size_t>(T + 1));
    for (int k = 0; k <= T; k++) {
        t[k] = k;
    }
    return t;
}

}  // namespace

TEST(apply_pair_layer, quantum_gate_on_basis_vector) {
    PairLayer l{{{0, 1}}, GateMatrix::quantum()};
    ModeVector<double> v = apply_pair_layer(basis(4, 0), l);
    const double s = 1 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(v[0] - cplx(s, 0)), 0, 1e-15);
    EXPECT_NEAR(std::abs(v[1] - cplx(0, -s)), 0, 1e-15);
    EXPECT_EQ(v[2], cplx(0));
    EXPECT_EQ(v[3], cplx(0));
}

TEST(apply_pair_layer, identity_gate_and_norm) {
    Stream rng(3);
    ModeVector<double> v(8);
    for (auto &x : v) {
        x = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
    }
    PairLayer id{{{0, 5}, {2, 3}}, GateMatrix::identity()};
    EXPECT_EQ(apply_pair_layer(v, id), v);
    auto [a, b] = build_brickwork_layers(8, Boundary::Periodic, GateMatrix::quantum());
    ModeVector<double> w = apply_pair_layer(apply_pair_layer(v, a), b);
    EXPECT_NEAR(w.norm(), v.norm(), 1e-12);
}

TEST(apply_pair_layer, out_of_range_pair) {
    PairLayer l{{{0, 4}}, GateMatrix::quantum()};
    EXPECT_THROW(apply_pair_layer(basis(4, 0), l), InvalidLayer);
}

TEST(apply_diagonal, multipliers) {
    ModeVector<double> v(3);
    v << cplx(1, 2), cplx(3, 0), cplx(0, -1);
    EXPECT_EQ(apply_diagonal(v, DiagonalLayer{{1, 1, 1}}), v);
    ModeVector<double> w = apply_diagonal(v, DiagonalLayer{{1, 0, 1}});
    EXPECT_EQ(w[1], cplx(0));
    ModeVector<double> s = apply_diagonal(v, DiagonalLayer{{0.5, 0.9, 0.7}});
    EXPECT_GE(s.norm(), 0.5 * v.norm());
    EXPECT_LE(s.norm(), 0.9 * v.norm());
    EXPECT_THROW(apply_diagonal(v, DiagonalLayer{{1, 1}}), InvalidLayer);
}

TEST(apply_dense, identity_and_two_site_rotation) {
    ModeVector<double> v = basis(2, 0);
    DenseLayer id{std::make_shared<Eigen::MatrixXcd>(Eigen::MatrixXcd::Identity(2, 2))};
    EXPECT_EQ(apply_dense(v, id), v);
    ModeVector<double> w = apply_dense(v, build_hopping_unitary(2, Boundary::Open, std::numbers::pi / 2));
    EXPECT_NEAR(std::abs(w[0]), 0, 1e-12);
    EXPECT_NEAR(std::abs(w[1] - cplx(0, -1)), 0, 1e-12);
    DenseLayer u = build_hopping_unitary(7, Boundary::Open, 1.0);
    ModeVector<double> x = apply_dense(basis(7, 3), u);
    EXPECT_NEAR(x.norm(), 1, 1e-10);
    EXPECT_THROW(apply_dense(basis(3, 0), u), InvalidLayer);
}

TEST(normalize_row, cases) {
    ModeVector<double> v(3);
    v << 2, 0, 0;
    EXPECT_EQ(normalize_row(v), basis(3, 0));
    ModeVector<double> w(2);
    w << cplx(3.7, 0), cplx(0, 3.7);
    EXPECT_NEAR(normalize_row(w).norm(), 1, 1e-12);
    EXPECT_NEAR(std::arg(normalize_row(w)[1]), std::numbers::pi / 2, 1e-12);
    ModeVector<double> z = ModeVector<double>::Zero(2);
    EXPECT_THROW(normalize_row(z), ZeroRowError);
}

TEST(evolve, zero_time_gives_basis_rows) {
    CircuitSpec s = brickwork(8, 5, 1.0, 1);
    std::vector<int> t0{0};
    auto snaps = evolve(s, {2, 5}, t0);
    ASSERT_EQ(snaps.size(), 1u);
    EXPECT_EQ(snaps[0].rows.row(0), basis(8, 2));
    EXPECT_EQ(snaps[0].rows.row(1), basis(8, 5));
    EXPECT_EQ(snaps[0].origins, (std::vector<int>{2, 5}));
}

TEST(evolve, unitary_limit_keeps_norms_without_renormalization) {
    for (Model m : {Model::BrickworkGate, Model::HoppingHamiltonian, Model::NonlocalMatching}) {
        CircuitSpec s;
        s.model = m;
        s.M = 32;
        s.T = 100;
        s.dissipation = Dissipation::None;
        s.seed = 4;
        std::vector<double> log_norm;
        std::vector<int> times{100};
        evolve(s, {3, 16}, times, EvolveOptions{false}, &log_norm);
        for (double ln : log_norm) {
            EXPECT_NEAR(std::exp(ln), 1.0, 1e-10) << to_string(m);
        }
    }
}

TEST(evolve, matches_path_sum_oracle) {
    for (uint64_t seed = 0; seed < 10; seed++) {
        for (double beta : {0.0, 0.5, 2.0}) {
            for (Boundary bc : {Boundary::Open, Boundary::Periodic}) {
                CircuitSpec s = brickwork(6, 4, beta, seed);
                s.boundary = bc;
                std::vector<int> times{4};
                for (int origin : {0, 3}) {
                    auto snap = evolve(s, {origin}, times);
                    ModeVector<double> k = path_sum_K(s, origin);
                    ModeVector<double> expected = normalize_row(k);
                    EXPECT_LT((snap[0].rows.row(0) - expected).cwiseAbs().maxCoeff(), 1e-10)
                        << "seed " << seed << " beta " << beta;
                }
            }
        }
    }
}

TEST(evolve, matches_path_sum_oracle_with_projective_and_classical) {
    for (uint64_t seed = 0; seed < 10; seed++) {
        CircuitSpec s = brickwork(8, 5, 0, seed);
        s.dissipation = Dissipation::ProjectiveP;
        s.p = 0.2;
        s.gate = GateMatrix::classical();
        std::vector<int> times{5};
        std::vector<double> log_norm;
        try {
            auto snap = evolve(s, {4}, times, {}, &log_norm);
            ModeVector<double> k = path_sum_K(s, 4);
            EXPECT_LT((snap[0].rows.row(0) - normalize_row(k)).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_NEAR(log_norm[0], std::log(k.norm()), 1e-10);
        } catch (const ZeroRowError &) {
            EXPECT_LT(path_sum_K(s, 4).norm(), 1e-300);
        }
    }
}

TEST(path_sum, single_gate) {
    CircuitSpec s = brickwork(2, 1, 0, 0);
    ModeVector<double> k = path_sum_K(s, 0);
    EXPECT_EQ(k[0], GateMatrix::quantum()(0, 0));
    EXPECT_EQ(k[1], GateMatrix::quantum()(0, 1));
    s.T = 0;
    EXPECT_EQ(path_sum_K(s, 1), basis(2, 1));
}

TEST(path_sum, rejects_other_models_and_large_circuits) {
    CircuitSpec s = brickwork(6, 3, 1, 0);
    s.model = Model::HoppingHamiltonian;
    EXPECT_THROW(path_sum_K(s, 0), InvalidSpec);
    EXPECT_THROW(path_sum_K(brickwork(10, 3, 1, 0), 0), TooLarge);
}

TEST(evolve, per_period_normalization_preserves_direction) {
    // Final-only normalization in extended precision against the default path.
    CircuitSpec s = brickwork(40, 30, 2.0, 12);
    std::vector<int> times{30};
    auto fast = evolve<double>(s, {20}, times);
    auto slow = evolve<long double>(s, {20}, times, EvolveOptions{false});
    for (int j = 0; j < 40; j++) {
        std::complex<long double> a = slow[0].rows(0, j);
        EXPECT_NEAR(std::abs(fast[0].rows(0, j) - cplx(static_cast<double>(a.real()), static_cast<double>(a.imag()))),
                    0, 1e-12);
    }
}

TEST(evolve, log_norm_tracks_raw_magnitude) {
    CircuitSpec s = brickwork(12, 10, 1.0, 3);
    std::vector<int> times{10};
    std::vector<double> renorm, raw;
    evolve(s, {6}, times, {}, &renorm);
    evolve(s, {6}, times, EvolveOptions{false}, &raw);
    EXPECT_NEAR(renorm[0], raw[0], 1e-10);
    EXPECT_LT(renorm[0], 0);
}

TEST(evolve, cyclic_shift_covariance) {
    // Shifting every layer by two sites shifts the evolved rows by two sites.
    const int M = 10;
    const int shift = 2;
    Stream rng(31);
    auto [a, b] = build_brickwork_layers(M, Boundary::Periodic, GateMatrix::quantum());
    auto shifted = [&](const PairLayer &l) {
        PairLayer out{{}, l.gate};
        for (auto [x, y] : l.pairs) {
            out.pairs.emplace_back((x + shift) % M, (y + shift) % M);
        }
        return out;
    };
    ModeRows<double> rows = ModeRows<double>::Zero(1, M);
    ModeRows<double> moved = ModeRows<double>::Zero(1, M);
    rows(0, 3) = 1;
    moved(0, 3 + shift) = 1;
    for (int t = 0; t < 12; t++) {
        DiagonalLayer d = sample_imaginary_layer(M, 1.5, rng);
        DiagonalLayer ds{std::vector<double>(M)};
        for (int x = 0; x < M; x++) {
            ds.d[(x + shift) % M] = d.d[x];
        }
        apply_pair_layer(rows, a);
        apply_pair_layer(rows, b);
        apply_diagonal(rows, d);
        apply_pair_layer(moved, shifted(a));
        apply_pair_layer(moved, shifted(b));
        apply_diagonal(moved, ds);
    }
    for (int x = 0; x < M; x++) {
        EXPECT_NEAR(std::abs(rows(0, x) - moved(0, (x + shift) % M)), 0, 1e-12);
    }

    // The periodic hopping step is circulant, so any shift commutes with it.
    DenseLayer u = build_hopping_unitary(M, Boundary::Periodic, 1.0);
    ModeVector<double> v = apply_dense(basis(M, 1), u);
    ModeVector<double> w = apply_dense(basis(M, 4), u);
    for (int x = 0; x < M; x++) {
        EXPECT_NEAR(std::abs(v[x] - w[(x + 3) % M]), 0, 1e-12);
    }
}

TEST(evolve, deterministic_and_batch_independent) {
    CircuitSpec s;
    s.model = Model::NonlocalMatching;
    s.M = 24;
    s.T = 20;
    s.beta = 1;
    s.seed = 9;
    std::vector<int> times = all_times(20);
    auto first = evolve(s, {1, 7}, times);
    auto second = evolve(s, {1, 7}, times);
    ASSERT_EQ(first.size(), 21u);
    for (size_t k = 0; k < first.size(); k++) {
        ASSERT_EQ(first[k].rows, second[k].rows);
    }

    std::vector<TrajectoryRequest> batch{{s, {1, 7}}, {s, {0}}, {s, {1, 7}}};
    batch[1].spec.seed = 10;
    std::vector<ModeRows<double>> last(3);
    std::vector<int> end{20};
    auto results = evolve_batch<double>(batch, end, [&](size_t b, int, const ModeMatrix &k) { last[b] = k.rows; });
    EXPECT_EQ(last[0], first.back().rows);
    EXPECT_EQ(last[2], first.back().rows);
    EXPECT_NE(last[1].row(0), first.back().rows.row(0));
}

TEST(evolve, annihilated_row_reports_period) {
    CircuitSpec s = brickwork(6, 5, 0, 0);
    s.dissipation = Dissipation::ProjectiveP;
    s.p = 1;
    std::vector<int> times{5};
    try {
        evolve(s, {2}, times);
        FAIL() << "expected a zero row";
    } catch (const ZeroRowError &e) {
        EXPECT_EQ(e.period, 1);
    }
}

TEST(evolve, rejects_bad_requests) {
    CircuitSpec s = brickwork(6, 5, 0, 0);
    std::vector<int> bad_time{6};
    EXPECT_THROW(evolve(s, {1}, bad_time), InvalidSpec);
    std::vector<int> ok{5};
    EXPECT_THROW(evolve(s, {1, 1}, ok), InvalidSpec);
    EXPECT_THROW(evolve(s, {6}, ok), InvalidSpec);
    std::vector<TrajectoryRequest> mixed{{s, {0}}, {brickwork(8, 5, 0, 0), {0}}};
    EXPECT_THROW(evolve_batch<double>(mixed, ok, [](size_t, int, const ModeMatrix &) {}), InvalidSpec);
}
