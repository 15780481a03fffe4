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
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "freebos/errors.hpp"
#include "freebos/model.hpp"

namespace freebos {

/// Rows of K: row i holds the coefficients of a_j^dagger in b_i^dagger.
/// Column-major, so the per-site updates of a layer touch contiguous memory.
template <typename Real = double>
using ModeRows = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real = double>
using ModeVector = Eigen::Matrix<std::complex<Real>, 1, Eigen::Dynamic>;

/// N tracked mode rows together with the sites they started from.
template <typename Real = double>
struct BasicModeMatrix {
    ModeRows<Real> rows;
    std::vector<int> origins;

    /// Row i is the basis vector at origins[i].
    static BasicModeMatrix basis(int M, std::vector<int> origins) {
        BasicModeMatrix k{ModeRows<Real>::Zero(static_cast<Eigen::Index>(origins.size()), M), std::move(origins)};
        for (size_t i = 0; i < k.origins.size(); i++) {
            k.rows(static_cast<Eigen::Index>(i), k.origins[i]) = 1;
        }
        return k;
    }

    int size() const {
        return static_cast<int>(rows.rows());
    }
    int sites() const {
        return static_cast<int>(rows.cols());
    }
};

using ModeMatrix = BasicModeMatrix<double>;

/// Right-multiplies every row by the gate on each pair; other sites are untouched.
template <typename Derived>
void apply_pair_layer(Eigen::MatrixBase<Derived> &rows, const PairLayer &layer) {
    using Scalar = typename Derived::Scalar;
    const auto M = static_cast<int>(rows.cols());
    const Scalar a00(layer.gate(0, 0)), a01(layer.gate(0, 1)), a10(layer.gate(1, 0)), a11(layer.gate(1, 1));
    for (auto [x, y] : layer.pairs) {
        if (x < 0 || y < 0 || x >= M || y >= M || x == y) {
            throw InvalidLayer("pair (" + std::to_string(x) + "," + std::to_string(y) + ") invalid for " +
                               std::to_string(M) + " sites");
        }
        for (Eigen::Index r = 0; r < rows.rows(); r++) {
            Scalar vx = rows(r, x);
            Scalar vy = rows(r, y);
            rows(r, x) = vx * a00 + vy * a10;
            rows(r, y) = vx * a01 + vy * a11;
        }
    }
}

template <typename Derived>
void apply_diagonal(Eigen::MatrixBase<Derived> &rows, const DiagonalLayer &layer) {
    using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
    if (static_cast<Eigen::Index>(layer.d.size()) != rows.cols()) {
        throw InvalidLayer("diagonal layer has " + std::to_string(layer.d.size()) + " entries for " +
                           std::to_string(rows.cols()) + " sites");
    }
    for (Eigen::Index x = 0; x < rows.cols(); x++) {
        rows.col(x) *= static_cast<Real>(layer.d[static_cast<size_t>(x)]);
    }
}

/// rows <- rows * U.
template <typename Derived>
void apply_dense(Eigen::MatrixBase<Derived> &rows, const DenseLayer &layer) {
    using Scalar = typename Derived::Scalar;
    const Eigen::MatrixXcd &u = *layer.u;
    if (u.rows() != rows.cols() || u.cols() != rows.cols()) {
        throw InvalidLayer("dense layer is " + std::to_string(u.rows()) + "x" + std::to_string(u.cols()) + " for " +
                           std::to_string(rows.cols()) + " sites");
    }
    if constexpr (std::is_same_v<Scalar, cplx>) {
        rows.derived() = (rows * u).eval();
    } else {
        rows.derived() = (rows * u.cast<Scalar>()).eval();
    }
}

template <typename Derived>
void apply_layer(Eigen::MatrixBase<Derived> &rows, const Layer &layer) {
    std::visit([&](const auto &l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, PairLayer>) {
            apply_pair_layer(rows, l);
        } else if constexpr (std::is_same_v<L, DenseLayer>) {
            apply_dense(rows, l);
        } else {
            apply_diagonal(rows, l);
        }
    },
               layer);
}

/// Single-vector conveniences with value semantics.
template <typename Real>
ModeVector<Real> apply_pair_layer(ModeVector<Real> v, const PairLayer &layer) {
    apply_pair_layer(static_cast<Eigen::MatrixBase<ModeVector<Real>> &>(v), layer);
    return v;
}
template <typename Real>
ModeVector<Real> apply_diagonal(ModeVector<Real> v, const DiagonalLayer &layer) {
    apply_diagonal(static_cast<Eigen::MatrixBase<ModeVector<Real>> &>(v), layer);
    return v;
}
template <typename Real>
ModeVector<Real> apply_dense(ModeVector<Real> v, const DenseLayer &layer) {
    apply_dense(static_cast<Eigen::MatrixBase<ModeVector<Real>> &>(v), layer);
    return v;
}

/// Below this pre-normalization norm a row counts as annihilated.
inline constexpr double kZeroRowNorm = 1e-300;

template <typename Real>
ModeVector<Real> normalize_row(ModeVector<Real> v) {
    Real n = v.norm();
    if (!(n > Real(kZeroRowNorm))) {
        throw ZeroRowError(0);
    }
    v /= n;
    return v;
}

struct EvolveOptions {
    /// Rescale every row to unit norm after each period. When false, rows
    /// keep their raw magnitude and snapshots carry normalized copies.
    bool renormalize = true;
};

/// One trajectory of a batch.
struct TrajectoryRequest {
    CircuitSpec spec;
    std::vector<int> origins;
};

/// Outcome of one trajectory of a batch.
template <typename Real = double>
struct TrajectoryResult {
    /// Period at which a row vanished, if any; snapshots stop before it.
    std::optional<int> zero_row_period;
    /// Running sum of log norm factors per row (the log magnitude of the raw
    /// row of K); meaningful only when the trajectory completed.
    std::vector<Real> log_norm;
};

/// Called at each snapshot time with the trajectory index and normalized rows.
template <typename Real = double>
using SnapshotVisitor = std::function<void(size_t trajectory, int t, const BasicModeMatrix<Real> &k)>;

namespace detail {

inline std::vector<int> sorted_times(std::span<const int> times, int T) {
    std::vector<int> out(times.begin(), times.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (!out.empty() && (out.front() < 0 || out.back() > T)) {
        throw InvalidSpec("snapshot times must lie in [0, " + std::to_string(T) + "]");
    }
    return out;
}

inline void check_origins(const std::vector<int> &origins, int M) {
    std::vector<char> seen(static_cast<size_t>(M), 0);
    for (int o : origins) {
        if (o < 0 || o >= M) {
            throw InvalidSpec("origin " + std::to_string(o) + " outside of " + std::to_string(M) + " sites");
        }
        if (seen[o]) {
            throw InvalidSpec("origin " + std::to_string(o) + " repeated");
        }
        seen[o] = 1;
    }
}

}  // namespace detail

/// Evolves several trajectories of the same circuit shape side by side.
///
/// All requests must agree on model, M, T, boundary, gate and dt; they may
/// differ in seed, dissipation strength and origins. Their rows are stacked
/// into one matrix so the shared unitary layers (notably the dense hopping
/// step) are applied with a single product. Each trajectory draws its random
/// layers from layer_stream(spec.seed), so a trajectory's result does not
/// depend on which batch it ran in beyond floating-point rounding of the
/// dense product.
///
/// Per period: the fixed unitary layers, then each trajectory's random
/// layers (matching, then dissipation), then renormalization.
template <typename Real = double>
std::vector<TrajectoryResult<Real>> evolve_batch(std::span<const TrajectoryRequest> requests,
                                                 std::span<const int> snapshot_times, const SnapshotVisitor<Real> &visit,
                                                 const EvolveOptions &options = {}) {
    std::vector<TrajectoryResult<Real>> results(requests.size());
    if (requests.empty()) {
        return results;
    }
    const CircuitSpec &shape = requests.front().spec;
    shape.validate();
    for (const auto &r : requests) {
        r.spec.validate();
        if (r.spec.model != shape.model || r.spec.M != shape.M || r.spec.T != shape.T ||
            r.spec.boundary != shape.boundary || !(r.spec.gate == shape.gate) || r.spec.dt != shape.dt) {
            throw InvalidSpec("batched trajectories must share model, M, T, boundary, gate and dt");
        }
        detail::check_origins(r.origins, shape.M);
    }
    const int M = shape.M;
    const int T = shape.T;
    const std::vector<int> times = detail::sorted_times(snapshot_times, T);

    std::vector<Layer> fixed = PeriodSource::fixed_layers(shape);
    std::vector<PeriodSource> sources;
    std::vector<Eigen::Index> offset;
    Eigen::Index total = 0;
    for (const auto &r : requests) {
        sources.emplace_back(r.spec, layer_stream(r.spec.seed), fixed);
        offset.push_back(total);
        total += static_cast<Eigen::Index>(r.origins.size());
    }
    ModeRows<Real> rows = ModeRows<Real>::Zero(total, M);
    for (size_t b = 0; b < requests.size(); b++) {
        for (size_t i = 0; i < requests[b].origins.size(); i++) {
            rows(offset[b] + static_cast<Eigen::Index>(i), requests[b].origins[i]) = Real(1);
        }
        results[b].log_norm.assign(requests[b].origins.size(), Real(0));
    }

    auto block_of = [&](size_t b) {
        return rows.middleRows(offset[b], static_cast<Eigen::Index>(requests[b].origins.size()));
    };
    auto emit = [&](int t) {
        for (size_t b = 0; b < requests.size(); b++) {
            if (results[b].zero_row_period) {
                continue;
            }
            BasicModeMatrix<Real> k{block_of(b), requests[b].origins};
            if (!options.renormalize) {
                for (Eigen::Index i = 0; i < k.rows.rows(); i++) {
                    k.rows.row(i) /= k.rows.row(i).norm();
                }
            }
            visit(b, t, k);
        }
    };

    auto next_time = times.begin();
    if (next_time != times.end() && *next_time == 0) {
        emit(0);
        ++next_time;
    }
    for (int t = 1; t <= T; t++) {
        for (const auto &layer : fixed) {
            apply_layer(rows, layer);
        }
        for (size_t b = 0; b < requests.size(); b++) {
            std::vector<Layer> random = sources[b].next_random();
            if (results[b].zero_row_period) {
                continue;
            }
            auto block = block_of(b);
            for (const auto &layer : random) {
                apply_layer(block, layer);
            }
            for (Eigen::Index i = 0; i < block.rows(); i++) {
                Real n = block.row(i).norm();
                if (!(n > Real(kZeroRowNorm))) {
                    results[b].zero_row_period = t;
                    block.setZero();
                    break;
                }
                if (options.renormalize) {
                    block.row(i) /= n;
                    results[b].log_norm[static_cast<size_t>(i)] += std::log(n);
                }
            }
        }
        if (next_time != times.end() && *next_time == t) {
            emit(t);
            ++next_time;
        }
    }
    if (!options.renormalize) {
        for (size_t b = 0; b < requests.size(); b++) {
            if (results[b].zero_row_period) {
                continue;
            }
            auto block = block_of(b);
            for (Eigen::Index i = 0; i < block.rows(); i++) {
                results[b].log_norm[static_cast<size_t>(i)] = std::log(block.row(i).norm());
            }
        }
    }
    return results;
}

/// Evolves the rows starting at `origins` under `spec` and returns the
/// normalized rows at each requested time (sorted, duplicates dropped).
/// Throws ZeroRowError if a row is annihilated.
template <typename Real = double>
std::vector<BasicModeMatrix<Real>> evolve(const CircuitSpec &spec, const std::vector<int> &origins,
                                          std::span<const int> snapshot_times, const EvolveOptions &options = {},
                                          std::vector<Real> *log_norm = nullptr) {
    std::vector<BasicModeMatrix<Real>> snapshots;
    TrajectoryRequest request{spec, origins};
    auto results = evolve_batch<Real>(
        std::span<const TrajectoryRequest>(&request, 1), snapshot_times,
        [&](size_t, int, const BasicModeMatrix<Real> &k) { snapshots.push_back(k); }, options);
    if (results[0].zero_row_period) {
        throw ZeroRowError(*results[0].zero_row_period);
    }
    if (log_norm != nullptr) {
        *log_norm = results[0].log_norm;
    }
    return snapshots;
}

/// Unnormalized row K(origin, .) of a brickwork circuit, summed explicitly
/// over oriented lattice paths.
///
/// A path enters every gate on its current site and leaves on either site of
/// the pair, collecting the matching gate entry; sites outside all pairs pass
/// straight through. Each period multiplies the path weight by the
/// dissipative factor of the site it occupies. The random layers are drawn
/// exactly as evolve draws them for the same spec. Cost grows as 4^T, so this
/// is a test oracle only.
inline ModeVector<double> path_sum_K(const CircuitSpec &spec, int origin) {
    spec.validate();
    if (spec.model != Model::BrickworkGate) {
        throw InvalidSpec("path sums are defined for the brickwork model only");
    }
    if (spec.M > 8 || spec.T > 6) {
        throw TooLarge("path sums are limited to M <= 8 and T <= 6");
    }
    if (origin < 0 || origin >= spec.M) {
        throw InvalidSpec("origin outside of the chain");
    }
    PeriodSource source(spec, layer_stream(spec.seed));
    // Flatten the circuit into a sequence of layers.
    std::vector<Layer> layers;
    for (int t = 0; t < spec.T; t++) {
        for (auto &layer : source.next()) {
            layers.push_back(std::move(layer));
        }
    }
    // partner[l][x]: the other site of x's pair in layer l and whether x is
    // the first element of that pair; -1 when x is idle.
    std::vector<std::vector<std::pair<int, bool>>> partner(layers.size());
    for (size_t l = 0; l < layers.size(); l++) {
        if (const auto *pl = std::get_if<PairLayer>(&layers[l])) {
            check_pair_layer(*pl, spec.M);
            partner[l].assign(static_cast<size_t>(spec.M), {-1, false});
            for (auto [x, y] : pl->pairs) {
                partner[l][x] = {y, true};
                partner[l][y] = {x, false};
            }
        }
    }

    ModeVector<double> k = ModeVector<double>::Zero(spec.M);
    std::function<void(size_t, int, cplx)> walk = [&](size_t l, int site, cplx weight) {
        if (l == layers.size()) {
            k[site] += weight;
            return;
        }
        if (const auto *pl = std::get_if<PairLayer>(&layers[l])) {
            auto [other, first] = partner[l][site];
            if (other < 0) {
                walk(l + 1, site, weight);
                return;
            }
            const GateMatrix &a = pl->gate;
            int in = first ? 0 : 1;
            // Output column 0 is the first site of the pair, column 1 the second.
            int x = first ? site : other;
            int y = first ? other : site;
            walk(l + 1, x, weight * a(in, 0));
            walk(l + 1, y, weight * a(in, 1));
        } else if (const auto *dl = std::get_if<DiagonalLayer>(&layers[l])) {
            walk(l + 1, site, weight * dl->d[static_cast<size_t>(site)]);
        } else {
            throw InvalidSpec("dense layers have no path expansion");
        }
    };
    walk(0, origin, cplx{1});
    return k;
}

}  // namespace freebos
