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
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "freebos/errors.hpp"
#include "freebos/rng.hpp"

namespace freebos {

using cplx = std::complex<double>;

/// 2x2 matrix acting on the coefficients of a pair of modes. A row vector
/// (v_x, v_y) is multiplied on the right: v_x' = v_x a(0,0) + v_y a(1,0).
struct GateMatrix {
    std::array<cplx, 4> entries{cplx{1}, cplx{0}, cplx{0}, cplx{1}};

    constexpr cplx operator()(int row, int col) const {
        return entries[2 * row + col];
    }

    /// (1, -i; -i, 1) / sqrt(2).
    static GateMatrix quantum() {
        const double s = 1 / std::sqrt(2.0);
        return {{cplx{s, 0}, cplx{0, -s}, cplx{0, -s}, cplx{s, 0}}};
    }
    /// All four entries equal to one: the positive-weight polymer.
    static GateMatrix classical() {
        return {{cplx{1}, cplx{1}, cplx{1}, cplx{1}}};
    }
    static GateMatrix identity() {
        return {};
    }

    /// Largest elementwise deviation of A^dagger A from the identity.
    double unitarity_error() const {
        double worst = 0;
        for (int r = 0; r < 2; r++) {
            for (int c = 0; c < 2; c++) {
                cplx s = std::conj((*this)(0, r)) * (*this)(0, c) + std::conj((*this)(1, r)) * (*this)(1, c);
                worst = std::max(worst, std::abs(s - cplx{r == c ? 1.0 : 0.0}));
            }
        }
        return worst;
    }

    bool operator==(const GateMatrix &) const = default;
};

enum class Model { BrickworkGate, HoppingHamiltonian, NonlocalMatching };
enum class Dissipation { ImaginaryBeta, ProjectiveP, None };
enum class Boundary { Open, Periodic };

inline std::string_view to_string(Model m) {
    switch (m) {
        case Model::BrickworkGate:
            return "brickwork-gate";
        case Model::HoppingHamiltonian:
            return "hopping-hamiltonian";
        case Model::NonlocalMatching:
            return "nonlocal-matching";
    }
    return "?";
}
inline std::string_view to_string(Dissipation d) {
    switch (d) {
        case Dissipation::ImaginaryBeta:
            return "imaginary-beta";
        case Dissipation::ProjectiveP:
            return "projective-p";
        case Dissipation::None:
            return "none";
    }
    return "?";
}
inline std::string_view to_string(Boundary b) {
    return b == Boundary::Open ? "open" : "periodic";
}

inline Model parse_model(std::string_view s) {
    for (Model m : {Model::BrickworkGate, Model::HoppingHamiltonian, Model::NonlocalMatching}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw InvalidSpec("unknown model '" + std::string(s) + "'");
}
inline Dissipation parse_dissipation(std::string_view s) {
    for (Dissipation d : {Dissipation::ImaginaryBeta, Dissipation::ProjectiveP, Dissipation::None}) {
        if (to_string(d) == s) {
            return d;
        }
    }
    throw InvalidSpec("unknown dissipation '" + std::string(s) + "'");
}
inline Boundary parse_boundary(std::string_view s) {
    if (s == "open") {
        return Boundary::Open;
    }
    if (s == "periodic") {
        return Boundary::Periodic;
    }
    throw InvalidSpec("unknown boundary '" + std::string(s) + "'");
}
inline GateMatrix parse_gate(std::string_view s) {
    if (s == "quantum") {
        return GateMatrix::quantum();
    }
    if (s == "classical") {
        return GateMatrix::classical();
    }
    if (s == "identity") {
        return GateMatrix::identity();
    }
    throw InvalidSpec("unknown gate preset '" + std::string(s) + "'");
}
inline std::string_view gate_name(const GateMatrix &g) {
    if (g == GateMatrix::quantum()) {
        return "quantum";
    }
    if (g == GateMatrix::classical()) {
        return "classical";
    }
    if (g == GateMatrix::identity()) {
        return "identity";
    }
    return "custom";
}

/// One variant of the monitored dynamics.
struct CircuitSpec {
    Model model = Model::BrickworkGate;
    Dissipation dissipation = Dissipation::ImaginaryBeta;
    int M = 2;
    int T = 0;
    double beta = 0;
    double p = 0;
    Boundary boundary = Boundary::Open;
    GateMatrix gate = GateMatrix::quantum();
    uint64_t seed = 0;
    /// Hamiltonian time per period (hopping model only).
    double dt = 1;

    void validate() const {
        if (M < 2) {
            throw InvalidSpec("M must be at least 2, got " + std::to_string(M));
        }
        if (M % 2 != 0 && model != Model::HoppingHamiltonian) {
            throw InvalidSpec("M must be even for " + std::string(to_string(model)) + ", got " + std::to_string(M));
        }
        if (T < 0) {
            throw InvalidSpec("T must be nonnegative");
        }
        if (!(beta >= 0) || !std::isfinite(beta)) {
            throw InvalidSpec("beta must be a finite nonnegative number");
        }
        if (!(p >= 0 && p <= 1)) {
            throw InvalidSpec("p must lie in [0, 1]");
        }
        if (!(dt >= 0) || !std::isfinite(dt)) {
            throw InvalidSpec("dt must be a finite nonnegative number");
        }
    }

    /// Strength of the imaginary layer; `none` is imaginary evolution at beta = 0.
    double effective_beta() const {
        return dissipation == Dissipation::ImaginaryBeta ? beta : 0.0;
    }
};

/// Disjoint site pairs, each acted on by the same gate.
struct PairLayer {
    std::vector<std::pair<int, int>> pairs;
    GateMatrix gate;
};

/// Dense M x M unitary, shared between all periods that use it.
struct DenseLayer {
    std::shared_ptr<const Eigen::MatrixXcd> u;
};

/// Elementwise multipliers.
struct DiagonalLayer {
    std::vector<double> d;
};

using Layer = std::variant<PairLayer, DenseLayer, DiagonalLayer>;

/// Throws InvalidLayer unless the pairs are disjoint and inside [0, M).
inline void check_pair_layer(const PairLayer &layer, int M) {
    std::vector<char> used(static_cast<size_t>(M), 0);
    for (auto [x, y] : layer.pairs) {
        if (x < 0 || y < 0 || x >= M || y >= M) {
            throw InvalidLayer("pair (" + std::to_string(x) + "," + std::to_string(y) + ") outside of " +
                               std::to_string(M) + " sites");
        }
        if (x == y || used[x] || used[y]) {
            throw InvalidLayer("pairs are not disjoint at (" + std::to_string(x) + "," + std::to_string(y) + ")");
        }
        used[x] = used[y] = 1;
    }
}

/// The two sub-layers of one brickwork period: bonds (0,1),(2,3),... then
/// (1,2),(3,4),..., the latter closed by (M-1,0) when periodic.
inline std::pair<PairLayer, PairLayer> build_brickwork_layers(int M, Boundary boundary, const GateMatrix &gate) {
    if (M < 2 || M % 2 != 0) {
        throw InvalidSpec("brickwork needs an even site count >= 2, got " + std::to_string(M));
    }
    PairLayer even{{}, gate};
    PairLayer odd{{}, gate};
    for (int x = 0; x + 1 < M; x += 2) {
        even.pairs.emplace_back(x, x + 1);
    }
    for (int x = 1; x + 1 < M; x += 2) {
        odd.pairs.emplace_back(x, x + 1);
    }
    if (boundary == Boundary::Periodic) {
        odd.pairs.emplace_back(M - 1, 0);
    }
    return {std::move(even), std::move(odd)};
}

/// Single-particle hopping matrix: ones on the first off-diagonals, plus the
/// corner bond when periodic.
inline Eigen::MatrixXd hopping_matrix(int M, Boundary boundary) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(M, M);
    int bonds = boundary == Boundary::Periodic ? M : M - 1;
    for (int x = 0; x < bonds; x++) {
        int y = (x + 1) % M;
        h(x, y) += 1;
        h(y, x) += 1;
    }
    return h;
}

/// exp(-i dt H) for the hopping matrix, via its eigendecomposition.
inline DenseLayer build_hopping_unitary(int M, Boundary boundary, double dt) {
    if (M < 2) {
        throw InvalidSpec("hopping needs at least 2 sites");
    }
    if (!(dt >= 0)) {
        throw InvalidSpec("dt must be nonnegative");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hopping_matrix(M, boundary));
    const Eigen::MatrixXd &v = eig.eigenvectors();
    Eigen::VectorXcd phases(M);
    for (int k = 0; k < M; k++) {
        phases[k] = std::polar(1.0, -dt * eig.eigenvalues()[k]);
    }
    Eigen::MatrixXcd vc = v.cast<cplx>();
    auto u = std::make_shared<Eigen::MatrixXcd>(vc * phases.asDiagonal() * vc.transpose());
    return {std::move(u)};
}

/// Multipliers exp(-2 beta lambda) with lambda uniform on [0, 1), one per site.
inline DiagonalLayer sample_imaginary_layer(int M, double beta, Stream &rng) {
    if (!(beta >= 0)) {
        throw InvalidSpec("beta must be nonnegative");
    }
    DiagonalLayer layer{std::vector<double>(static_cast<size_t>(M))};
    for (double &d : layer.d) {
        d = std::exp(-2 * beta * rng.uniform());
    }
    return layer;
}

/// Zero on sites projected to the vacuum (each with probability p), one elsewhere.
inline DiagonalLayer sample_projective_mask(int M, double p, Stream &rng) {
    if (!(p >= 0 && p <= 1)) {
        throw InvalidSpec("p must lie in [0, 1]");
    }
    DiagonalLayer layer{std::vector<double>(static_cast<size_t>(M))};
    for (double &d : layer.d) {
        d = rng.bernoulli(p) ? 0.0 : 1.0;
    }
    return layer;
}

/// Uniform perfect matching of all M sites: shuffle, then pair neighbours.
inline PairLayer sample_matching(int M, Stream &rng, const GateMatrix &gate = GateMatrix::quantum()) {
    if (M < 2 || M % 2 != 0) {
        throw InvalidSpec("matching needs an even site count >= 2, got " + std::to_string(M));
    }
    std::vector<int> sites(static_cast<size_t>(M));
    for (int i = 0; i < M; i++) {
        sites[i] = i;
    }
    rng.shuffle(sites.begin(), sites.end());
    PairLayer layer{{}, gate};
    layer.pairs.reserve(static_cast<size_t>(M / 2));
    for (int i = 0; i < M; i += 2) {
        layer.pairs.emplace_back(sites[i], sites[i + 1]);
    }
    return layer;
}

/// Generates the layers of successive periods of a circuit.
///
/// Each period is the unitary part (two brickwork sub-layers, the dense
/// hopping step, or a fresh matching) followed by one dissipative diagonal
/// layer. Random layers are drawn from `rng` in that order, so two sources
/// built from the same spec and stream emit identical periods.
class PeriodSource {
   public:
    PeriodSource(const CircuitSpec &spec, Stream rng) : PeriodSource(spec, std::move(rng), fixed_layers(spec)) {
    }

    /// `fixed` must be fixed_layers(spec); passing it in lets many sources
    /// share one dense hopping unitary.
    PeriodSource(const CircuitSpec &spec, Stream rng, std::vector<Layer> fixed)
        : spec_(spec), rng_(std::move(rng)), fixed_(std::move(fixed)) {
        spec_.validate();
    }

    /// The deterministic unitary layers applied at the start of every period.
    static std::vector<Layer> fixed_layers(const CircuitSpec &spec) {
        spec.validate();
        std::vector<Layer> fixed;
        switch (spec.model) {
            case Model::BrickworkGate: {
                auto [a, b] = build_brickwork_layers(spec.M, spec.boundary, spec.gate);
                fixed.emplace_back(std::move(a));
                fixed.emplace_back(std::move(b));
                break;
            }
            case Model::HoppingHamiltonian:
                fixed.emplace_back(build_hopping_unitary(spec.M, spec.boundary, spec.dt));
                break;
            case Model::NonlocalMatching:
                break;
        }
        return fixed;
    }

    const std::vector<Layer> &fixed() const {
        return fixed_;
    }

    /// The layers of the next period, in application order.
    std::vector<Layer> next() {
        std::vector<Layer> period = fixed_;
        auto random = next_random();
        for (auto &layer : random) {
            period.push_back(std::move(layer));
        }
        return period;
    }

    /// Only the randomly drawn layers of the next period; they follow fixed().
    std::vector<Layer> next_random() {
        std::vector<Layer> period;
        if (spec_.model == Model::NonlocalMatching) {
            period.emplace_back(sample_matching(spec_.M, rng_, spec_.gate));
        }
        switch (spec_.dissipation) {
            case Dissipation::ImaginaryBeta:
                // beta = 0 is the identity; no draws, so it matches `none` exactly.
                if (spec_.beta > 0) {
                    period.emplace_back(sample_imaginary_layer(spec_.M, spec_.beta, rng_));
                }
                break;
            case Dissipation::ProjectiveP:
                period.emplace_back(sample_projective_mask(spec_.M, spec_.p, rng_));
                break;
            case Dissipation::None:
                break;
        }
        return period;
    }

    const CircuitSpec &spec() const {
        return spec_;
    }

   private:
    CircuitSpec spec_;
    Stream rng_;
    std::vector<Layer> fixed_;
};

/// The stream that drives the layers of a trajectory seeded by `seed`.
inline Stream layer_stream(uint64_t seed) {
    return derive_stream(seed, 0);
}

}  // namespace freebos
