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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "freebos/errors.hpp"
#include "freebos/evolution.hpp"
#include "freebos/model.hpp"
#include "freebos/observables.hpp"
#include "freebos/rng.hpp"
#include "freebos/sampling.hpp"
#include "freebos/text.hpp"
#include "json.hpp"

#ifndef FREEBOS_VERSION
#define FREEBOS_VERSION "0.1.0"
#endif

namespace freebos {

using json = nlohmann::json;

inline constexpr const char *kCodeVersion = FREEBOS_VERSION;

/// Malformed experiment configuration (exit code 2).
struct InvalidExperimentConfig : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A realization kept annihilating its rows after every retry (exit code 3).
struct PersistentZeroRow : std::runtime_error {
    PersistentZeroRow(int realization, int period)
        : std::runtime_error("realization " + std::to_string(realization) + " produced a zero row (last at period " +
                             std::to_string(period) + ") after " + std::to_string(kMaxRetries) + " retries"),
          realization(realization),
          period(period) {
    }
    static constexpr int kMaxRetries = 10;
    int realization;
    int period;
};

enum class Experiment { Wander, IprScan, Distance, Overlap, SampleCompare, BetaSweep };

inline std::string_view to_string(Experiment e) {
    switch (e) {
        case Experiment::Wander:
            return "wander";
        case Experiment::IprScan:
            return "ipr-scan";
        case Experiment::Distance:
            return "distance";
        case Experiment::Overlap:
            return "overlap";
        case Experiment::SampleCompare:
            return "sample-compare";
        case Experiment::BetaSweep:
            return "beta-sweep";
    }
    return "?";
}

inline Experiment parse_experiment(std::string_view s) {
    for (Experiment e : {Experiment::Wander, Experiment::IprScan, Experiment::Distance, Experiment::Overlap,
                         Experiment::SampleCompare, Experiment::BetaSweep}) {
        if (to_string(e) == s) {
            return e;
        }
    }
    throw InvalidExperimentConfig("unknown experiment '" + std::string(s) + "'");
}

inline int default_realizations(Experiment e) {
    switch (e) {
        case Experiment::Wander:
            return 200;
        case Experiment::IprScan:
        case Experiment::BetaSweep:
            return 100;
        case Experiment::Distance:
        case Experiment::Overlap:
            return 20;
        case Experiment::SampleCompare:
            return 1;
    }
    return 1;
}

struct ExperimentConfig {
    Experiment experiment = Experiment::Wander;
    /// Circuit shape; circuit.seed is the master seed of the ensemble.
    CircuitSpec circuit;
    int realizations = 1;
    std::vector<int> L_list;
    std::vector<double> beta_list;
    /// Empty means the experiment's default schedule.
    std::vector<int> snapshot_times;
    /// Boson count for distance, overlap and sample-compare.
    int N = 3;
    /// Wander origin; defaults to M / 2.
    std::optional<int> origin;
    /// Power-law window for wander; defaults to [T / 8, T].
    std::optional<std::pair<int, int>> fit_window;
    /// Evolution time as a multiple of L for ipr-scan and beta-sweep.
    int time_factor = 2;
    /// Multinomial draws for sample-compare.
    int samples = 100000;
    /// Realizations evolved together in one work item. Part of the result
    /// definition (it fixes the order of floating-point operations in the
    /// dense hopping step), unlike `workers`.
    int batch = 16;
    int workers = 1;
    std::string output_dir = "out";

    int wander_origin() const {
        return origin.value_or(circuit.M / 2);
    }
    std::pair<int, int> wander_window() const {
        return fit_window.value_or(std::pair<int, int>{std::max(1, circuit.T / 8), circuit.T});
    }
    bool scans_sizes() const {
        return experiment == Experiment::IprScan || experiment == Experiment::BetaSweep;
    }

    void validate() const {
        if (realizations < 1) {
            throw InvalidExperimentConfig("realizations must be at least 1");
        }
        if (batch < 1) {
            throw InvalidExperimentConfig("batch must be at least 1");
        }
        if (workers < 1) {
            throw InvalidExperimentConfig("workers must be at least 1");
        }
        try {
            if (scans_sizes()) {
                if (L_list.empty()) {
                    throw InvalidExperimentConfig("L_list must not be empty");
                }
                if (time_factor < 1) {
                    throw InvalidExperimentConfig("time_factor must be at least 1");
                }
                for (size_t i = 0; i < L_list.size(); i++) {
                    if (i > 0 && L_list[i] <= L_list[i - 1]) {
                        throw InvalidExperimentConfig("L_list must be strictly ascending");
                    }
                    CircuitSpec s = circuit;
                    s.M = L_list[i];
                    s.T = time_factor * L_list[i];
                    s.validate();
                    if (L_list[i] < 8) {
                        throw InvalidExperimentConfig("L_list entries must be at least 8");
                    }
                }
            } else {
                circuit.validate();
            }
            if (experiment == Experiment::BetaSweep) {
                if (beta_list.empty()) {
                    throw InvalidExperimentConfig("beta_list must not be empty");
                }
                for (double b : beta_list) {
                    CircuitSpec s = circuit;
                    s.beta = b;
                    s.validate();
                }
            }
        } catch (const InvalidSpec &e) {
            throw InvalidExperimentConfig(e.what());
        }
        if (!scans_sizes()) {
            for (int t : snapshot_times) {
                if (t < 0 || t > circuit.T) {
                    throw InvalidExperimentConfig("snapshot time " + std::to_string(t) + " outside [0, T]");
                }
            }
        }
        if (experiment == Experiment::Wander) {
            int o = wander_origin();
            if (o < 0 || o >= circuit.M) {
                throw InvalidExperimentConfig("origin outside of the chain");
            }
            auto [lo, hi] = wander_window();
            if (lo < 1 || lo > hi) {
                throw InvalidExperimentConfig("fit_window must satisfy 1 <= t_min <= t_max");
            }
        }
        if (experiment == Experiment::Distance || experiment == Experiment::Overlap ||
            experiment == Experiment::SampleCompare) {
            if (N < 1 || N > circuit.M) {
                throw InvalidExperimentConfig("N must lie in [1, M]");
            }
            if (experiment != Experiment::SampleCompare && N < 2) {
                throw InvalidExperimentConfig("distance and overlap need N >= 2");
            }
            if (experiment == Experiment::SampleCompare && N > 10) {
                throw InvalidExperimentConfig("sample-compare is limited to N <= 10");
            }
        }
        if (samples < 0) {
            throw InvalidExperimentConfig("samples must be nonnegative");
        }
    }
};

/// Reads a config from its JSON form. Unknown keys are rejected; missing
/// keys keep their defaults (realizations defaults per experiment).
inline ExperimentConfig config_from_json(const json &j) {
    static const std::vector<std::string> known{
        "experiment", "model",    "dissipation", "M",       "T",          "beta",        "p",
        "boundary",   "gate",     "dt",          "seed",    "realizations", "L_list",    "beta_list",
        "snapshot_times", "N",    "origin",      "fit_window", "time_factor", "samples", "batch",
        "workers",    "output_dir"};
    if (!j.is_object()) {
        throw InvalidExperimentConfig("config must be a JSON object");
    }
    for (const auto &[key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidExperimentConfig("unknown config key '" + key + "'");
        }
    }
    ExperimentConfig c;
    try {
        if (!j.contains("experiment")) {
            throw InvalidExperimentConfig("config lacks 'experiment'");
        }
        c.experiment = parse_experiment(j.at("experiment").get<std::string>());
        c.realizations = default_realizations(c.experiment);
        CircuitSpec &s = c.circuit;
        if (j.contains("model")) s.model = parse_model(j["model"].get<std::string>());
        if (j.contains("dissipation")) s.dissipation = parse_dissipation(j["dissipation"].get<std::string>());
        if (j.contains("M")) s.M = j["M"].get<int>();
        if (j.contains("T")) s.T = j["T"].get<int>();
        if (j.contains("beta")) s.beta = j["beta"].get<double>();
        if (j.contains("p")) s.p = j["p"].get<double>();
        if (j.contains("boundary")) s.boundary = parse_boundary(j["boundary"].get<std::string>());
        if (j.contains("gate")) s.gate = parse_gate(j["gate"].get<std::string>());
        if (j.contains("dt")) s.dt = j["dt"].get<double>();
        if (j.contains("seed")) s.seed = j["seed"].get<uint64_t>();
        if (j.contains("realizations")) c.realizations = j["realizations"].get<int>();
        if (j.contains("L_list")) c.L_list = j["L_list"].get<std::vector<int>>();
        if (j.contains("beta_list")) c.beta_list = j["beta_list"].get<std::vector<double>>();
        if (j.contains("snapshot_times")) c.snapshot_times = j["snapshot_times"].get<std::vector<int>>();
        if (j.contains("N")) c.N = j["N"].get<int>();
        if (j.contains("origin") && !j["origin"].is_null()) c.origin = j["origin"].get<int>();
        if (j.contains("fit_window") && !j["fit_window"].is_null()) {
            auto w = j["fit_window"].get<std::vector<int>>();
            if (w.size() != 2) {
                throw InvalidExperimentConfig("fit_window must have two entries");
            }
            c.fit_window = std::pair<int, int>{w[0], w[1]};
        }
        if (j.contains("time_factor")) c.time_factor = j["time_factor"].get<int>();
        if (j.contains("samples")) c.samples = j["samples"].get<int>();
        if (j.contains("batch")) c.batch = j["batch"].get<int>();
        if (j.contains("workers")) c.workers = j["workers"].get<int>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    } catch (const json::exception &e) {
        throw InvalidExperimentConfig(std::string("bad config value: ") + e.what());
    } catch (const InvalidSpec &e) {
        throw InvalidExperimentConfig(e.what());
    }
    c.validate();
    return c;
}

/// Everything that defines the results; worker count and output directory
/// are execution details and stay out.
inline json config_to_json(const ExperimentConfig &c) {
    json j;
    j["experiment"] = to_string(c.experiment);
    j["model"] = to_string(c.circuit.model);
    j["dissipation"] = to_string(c.circuit.dissipation);
    j["M"] = c.circuit.M;
    j["T"] = c.circuit.T;
    j["beta"] = c.circuit.beta;
    j["p"] = c.circuit.p;
    j["boundary"] = to_string(c.circuit.boundary);
    j["gate"] = gate_name(c.circuit.gate);
    j["dt"] = c.circuit.dt;
    j["seed"] = c.circuit.seed;
    j["realizations"] = c.realizations;
    j["L_list"] = c.L_list;
    j["beta_list"] = c.beta_list;
    j["snapshot_times"] = c.snapshot_times;
    j["N"] = c.N;
    j["origin"] = c.origin ? json(*c.origin) : json(nullptr);
    j["fit_window"] = c.fit_window ? json({c.fit_window->first, c.fit_window->second}) : json(nullptr);
    j["time_factor"] = c.time_factor;
    j["samples"] = c.samples;
    j["batch"] = c.batch;
    return j;
}

/// Tag mixed into retry sub-seeds so they never coincide with first attempts.
inline constexpr uint64_t kRetryTag = 0x7E7A000000000000ULL;

/// Seed of attempt `attempt` of a realization whose first seed is `base`.
inline uint64_t retry_seed(uint64_t base, int attempt) {
    return attempt == 0 ? base : derive_seed(base, kRetryTag + static_cast<uint64_t>(attempt));
}

/// N distinct sites of an M-site chain, drawn without replacement, sorted.
inline std::vector<int> random_fock_origins(int M, int N, uint64_t realization_seed) {
    Stream rng = derive_stream(realization_seed, 1);
    std::vector<int> sites(static_cast<size_t>(M));
    for (int i = 0; i < M; i++) {
        sites[i] = i;
    }
    rng.shuffle(sites.begin(), sites.end());
    sites.resize(static_cast<size_t>(N));
    std::sort(sites.begin(), sites.end());
    return sites;
}

/// `count` origins spread evenly: the centres of `count` equal segments.
inline std::vector<int> evenly_spaced_origins(int M, int count) {
    std::vector<int> out;
    for (int k = 0; k < count; k++) {
        out.push_back(static_cast<int>((2 * static_cast<int64_t>(k) + 1) * M / (2 * count)));
    }
    return out;
}

struct RetryEvent {
    int realization = 0;
    int attempt = 0;
    int failed_period = 0;
    std::string system;
};

/// One ensemble of independent trajectories of the same circuit shape.
struct EnsemblePlan {
    /// Shape of every trajectory; seed is the ensemble master seed.
    CircuitSpec circuit;
    int realizations = 1;
    int batch = 16;
    int workers = 1;
    std::vector<int> times;
    /// Origins of a realization given its first-attempt seed.
    std::function<std::vector<int>(uint64_t)> origins;
    /// Label for retry records.
    std::string system;
};

/// Runs every realization and returns one Record per realization, in index
/// order. `observe(record, t, k)` sees the normalized rows at each snapshot.
///
/// Realizations are grouped into fixed chunks of `batch` consecutive indices
/// that workers pull from a shared counter; each record is written only by
/// the worker owning its chunk, so results do not depend on the worker
/// count. A realization whose rows vanish is restarted from a fresh record
/// with the next retry seed.
template <typename Record, typename Observe>
std::vector<Record> run_ensemble(const EnsemblePlan &plan, Observe observe, std::vector<RetryEvent> *retries) {
    const int n = plan.realizations;
    const int chunks = (n + plan.batch - 1) / plan.batch;
    std::vector<Record> records(static_cast<size_t>(n));
    std::vector<std::vector<RetryEvent>> chunk_retries(static_cast<size_t>(chunks));
    std::vector<std::exception_ptr> errors(static_cast<size_t>(chunks));
    std::atomic<int> next{0};

    auto process = [&](int c) {
        const int first = c * plan.batch;
        const int last = std::min(n, first + plan.batch);
        std::vector<TrajectoryRequest> requests;
        std::vector<uint64_t> base;
        for (int r = first; r < last; r++) {
            TrajectoryRequest req{plan.circuit, {}};
            req.spec.seed = derive_seed(plan.circuit.seed, static_cast<uint64_t>(r));
            req.origins = plan.origins(req.spec.seed);
            base.push_back(req.spec.seed);
            requests.push_back(std::move(req));
        }
        auto results = evolve_batch<double>(requests, plan.times, [&](size_t b, int t, const ModeMatrix &k) {
            observe(records[static_cast<size_t>(first) + b], t, k);
        });
        for (size_t b = 0; b < results.size(); b++) {
            std::optional<int> failed = results[b].zero_row_period;
            const int r = first + static_cast<int>(b);
            for (int attempt = 1; failed; attempt++) {
                chunk_retries[c].push_back({r, attempt, *failed, plan.system});
                if (attempt > PersistentZeroRow::kMaxRetries) {
                    throw PersistentZeroRow(r, *failed);
                }
                records[static_cast<size_t>(r)] = Record{};
                TrajectoryRequest req = requests[b];
                req.spec.seed = retry_seed(base[b], attempt);
                auto again = evolve_batch<double>(std::span<const TrajectoryRequest>(&req, 1), plan.times,
                                                  [&](size_t, int t, const ModeMatrix &k) {
                                                      observe(records[static_cast<size_t>(r)], t, k);
                                                  });
                failed = again[0].zero_row_period;
            }
        }
    };
    auto worker = [&]() {
        for (int c = next++; c < chunks; c = next++) {
            try {
                process(c);
            } catch (...) {
                errors[static_cast<size_t>(c)] = std::current_exception();
            }
        }
    };
    const int threads = std::min(plan.workers, chunks);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; w++) {
            pool.emplace_back(worker);
        }
        for (auto &th : pool) {
            th.join();
        }
    }
    for (auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    if (retries != nullptr) {
        for (auto &cr : chunk_retries) {
            retries->insert(retries->end(), cr.begin(), cr.end());
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Results

struct WanderResult {
    int origin = 0;
    std::vector<SeriesPoint> x2;
    std::vector<SeriesPoint> s2;
    std::optional<ScalingFit> x2_fit;
    std::optional<ScalingFit> s2_fit;
    std::string x2_fit_error;
    std::string s2_fit_error;
    /// Realizations with more than 1e-6 weight within 5 sites of an open edge.
    int boundary_flagged = 0;
    std::optional<int> first_flagged_t;
};

struct Tau2Point {
    int L = 0;
    double beta = 0;
    double tau2 = 0;
    double std_error = 0;
    /// Same quantity at half the evolution time, for the saturation check.
    double tau2_half = 0;
    double std_error_half = 0;
    bool saturated = false;
};

struct Tau2Scan {
    double beta = 0;
    std::vector<Tau2Point> points;
    std::optional<Tau2Extrapolation> extrapolation;
    bool saturated = false;
    bool decreasing = false;
};

struct DistanceResult {
    std::vector<SeriesPoint> distance;
    /// Minimum over realizations of the per-realization minimum row overlap.
    std::vector<std::pair<int, double>> min_overlap;
};

struct SampleCompareResult {
    std::vector<double> tvd;
    std::vector<double> normalization;
    std::vector<int> support;
    OutputDistribution exact;
    OutputDistribution multinomial;
    std::optional<double> sampled_tvd;
};

struct RunOutcome {
    std::vector<RetryEvent> retries;
    std::vector<uint64_t> seeds;
};

inline std::vector<uint64_t> realization_seeds(const ExperimentConfig &cfg) {
    std::vector<uint64_t> seeds;
    for (int r = 0; r < cfg.realizations; r++) {
        seeds.push_back(derive_seed(cfg.circuit.seed, static_cast<uint64_t>(r)));
    }
    return seeds;
}

inline std::vector<SeriesPoint> reduce_series(const std::vector<std::vector<double>> &per_realization,
                                              const std::vector<int> &times) {
    std::vector<SeriesPoint> out;
    for (size_t k = 0; k < times.size(); k++) {
        std::vector<double> xs;
        xs.reserve(per_realization.size());
        for (const auto &r : per_realization) {
            xs.push_back(r[k]);
        }
        MeanStderr m = mean_stderr(xs);
        out.push_back({times[k], m.mean, m.std_error, static_cast<int>(xs.size())});
    }
    return out;
}

inline std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline WanderResult run_wander(const ExperimentConfig &cfg, RunOutcome *outcome = nullptr) {
    cfg.validate();
    struct Record {
        std::vector<double> x2, s2;
        std::optional<int> flagged_t;
    };
    std::vector<int> times = cfg.snapshot_times;
    if (times.empty()) {
        for (int t = 1; t <= cfg.circuit.T; t++) {
            times.push_back(t);
        }
    }
    times = sorted_unique(times);
    const int origin = cfg.wander_origin();
    const bool open = cfg.circuit.boundary == Boundary::Open;
    EnsemblePlan plan{cfg.circuit, cfg.realizations, cfg.batch, cfg.workers, times,
                      [origin](uint64_t) { return std::vector<int>{origin}; }, "wander"};
    std::vector<RetryEvent> retries;
    auto records = run_ensemble<Record>(
        plan,
        [&](Record &rec, int t, const ModeMatrix &k) {
            auto row = k.rows.row(0);
            double d = mean_position(row) - origin;
            rec.x2.push_back(d * d);
            rec.s2.push_back(packet_spread(row));
            if (open && !rec.flagged_t && edge_weight(row, 5) > 1e-6) {
                rec.flagged_t = t;
            }
        },
        &retries);
    std::vector<std::vector<double>> x2, s2;
    WanderResult res;
    res.origin = origin;
    for (auto &r : records) {
        x2.push_back(std::move(r.x2));
        s2.push_back(std::move(r.s2));
        if (r.flagged_t) {
            res.boundary_flagged++;
            res.first_flagged_t = std::min(res.first_flagged_t.value_or(*r.flagged_t), *r.flagged_t);
        }
    }
    res.x2 = reduce_series(x2, times);
    res.s2 = reduce_series(s2, times);
    auto window = cfg.wander_window();
    try {
        res.x2_fit = power_law_fit(res.x2, window);
    } catch (const std::invalid_argument &e) {
        res.x2_fit_error = e.what();
    }
    try {
        res.s2_fit = power_law_fit(res.s2, window);
    } catch (const std::invalid_argument &e) {
        res.s2_fit_error = e.what();
    }
    if (outcome != nullptr) {
        outcome->retries = std::move(retries);
        outcome->seeds = realization_seeds(cfg);
    }
    return res;
}

/// tau2(L) at evolution times L * time_factor (and half of it) for one beta.
inline Tau2Scan run_tau2_scan(const ExperimentConfig &cfg, double beta, std::vector<RetryEvent> *retries) {
    Tau2Scan scan;
    scan.beta = beta;
    for (int L : cfg.L_list) {
        CircuitSpec spec = cfg.circuit;
        spec.M = L;
        spec.T = cfg.time_factor * L;
        spec.beta = beta;
        const int half = spec.T / 2;
        struct Record {
            double log_i2 = 0;
            double log_i2_half = 0;
        };
        const std::vector<int> origins = evenly_spaced_origins(L, 4);
        EnsemblePlan plan{spec, cfg.realizations, cfg.batch, cfg.workers, sorted_unique({half, spec.T}),
                          [origins](uint64_t) { return origins; },
                          "L=" + std::to_string(L) + ",beta=" + format_double(beta)};
        auto records = run_ensemble<Record>(
            plan,
            [&](Record &rec, int t, const ModeMatrix &k) {
                std::vector<double> logs;
                for (Eigen::Index i = 0; i < k.rows.rows(); i++) {
                    logs.push_back(std::log(ipr(k.rows.row(i), 2)));
                }
                double mean = pairwise_sum(logs) / static_cast<double>(logs.size());
                if (t == spec.T) {
                    rec.log_i2 = mean;
                }
                if (t == half) {
                    rec.log_i2_half = mean;
                }
            },
            retries);
        std::vector<double> full, halfway;
        for (const auto &r : records) {
            full.push_back(r.log_i2);
            halfway.push_back(r.log_i2_half);
        }
        MeanStderr mf = mean_stderr(full);
        MeanStderr mh = mean_stderr(halfway);
        const double logL = std::log(static_cast<double>(L));
        Tau2Point pt;
        pt.L = L;
        pt.beta = beta;
        pt.tau2 = tau2_of_L(mf.mean, L);
        pt.std_error = mf.std_error / logL;
        pt.tau2_half = tau2_of_L(mh.mean, L);
        pt.std_error_half = mh.std_error / logL;
        double combined = std::sqrt(pt.std_error * pt.std_error + pt.std_error_half * pt.std_error_half);
        pt.saturated = std::abs(pt.tau2 - pt.tau2_half) <= combined;
        scan.points.push_back(pt);
    }
    scan.saturated = std::all_of(scan.points.begin(), scan.points.end(), [](const Tau2Point &p) { return p.saturated; });
    scan.decreasing = true;
    for (size_t i = 1; i < scan.points.size(); i++) {
        if (!(scan.points[i].tau2 < scan.points[i - 1].tau2)) {
            scan.decreasing = false;
        }
    }
    if (scan.points.size() >= 3) {
        std::vector<std::pair<int, double>> pts;
        for (const auto &p : scan.points) {
            pts.push_back({p.L, p.tau2});
        }
        scan.extrapolation = extrapolate_tau2(pts);
    }
    return scan;
}

inline Tau2Scan run_ipr_scan(const ExperimentConfig &cfg, RunOutcome *outcome = nullptr) {
    cfg.validate();
    std::vector<RetryEvent> retries;
    Tau2Scan scan = run_tau2_scan(cfg, cfg.circuit.beta, &retries);
    if (outcome != nullptr) {
        outcome->retries = std::move(retries);
        outcome->seeds = realization_seeds(cfg);
    }
    return scan;
}

inline std::vector<Tau2Scan> run_beta_sweep(const ExperimentConfig &cfg, RunOutcome *outcome = nullptr) {
    cfg.validate();
    std::vector<RetryEvent> retries;
    std::vector<Tau2Scan> scans;
    for (double beta : cfg.beta_list) {
        scans.push_back(run_tau2_scan(cfg, beta, &retries));
    }
    if (outcome != nullptr) {
        outcome->retries = std::move(retries);
        outcome->seeds = realization_seeds(cfg);
    }
    return scans;
}

/// Default distance/overlap schedule: about 50 evenly spaced times plus T.
inline std::vector<int> default_distance_times(int T) {
    std::vector<int> times;
    int step = std::max(1, T / 50);
    for (int t = 0; t <= T; t += step) {
        times.push_back(t);
    }
    times.push_back(T);
    return sorted_unique(times);
}

inline DistanceResult run_distance(const ExperimentConfig &cfg, RunOutcome *outcome = nullptr) {
    cfg.validate();
    std::vector<int> times =
        cfg.snapshot_times.empty() ? default_distance_times(cfg.circuit.T) : sorted_unique(cfg.snapshot_times);
    struct Record {
        std::vector<double> d, overlap;
    };
    const bool want_distance = cfg.experiment != Experiment::Overlap;
    const int M = cfg.circuit.M;
    const int N = cfg.N;
    EnsemblePlan plan{cfg.circuit, cfg.realizations, cfg.batch, cfg.workers, times,
                      [M, N](uint64_t seed) { return random_fock_origins(M, N, seed); }, "distance"};
    std::vector<RetryEvent> retries;
    auto records = run_ensemble<Record>(
        plan,
        [&](Record &rec, int, const ModeMatrix &k) {
            if (want_distance) {
                rec.d.push_back(pair_distance(k.rows));
            }
            rec.overlap.push_back(row_overlap(k.rows));
        },
        &retries);
    DistanceResult res;
    if (want_distance) {
        std::vector<std::vector<double>> d;
        for (auto &r : records) {
            d.push_back(std::move(r.d));
        }
        res.distance = reduce_series(d, times);
    }
    for (size_t k = 0; k < times.size(); k++) {
        double worst = 1;
        for (const auto &r : records) {
            worst = std::min(worst, r.overlap[k]);
        }
        res.min_overlap.emplace_back(times[k], worst);
    }
    if (outcome != nullptr) {
        outcome->retries = std::move(retries);
        outcome->seeds = realization_seeds(cfg);
    }
    return res;
}

inline SampleCompareResult run_sample_compare(const ExperimentConfig &cfg, RunOutcome *outcome = nullptr) {
    cfg.validate();
    const int M = cfg.circuit.M;
    const int N = cfg.N;
    const int T = cfg.circuit.T;
    struct Record {
        ModeRows<double> rows;
    };
    EnsemblePlan plan{cfg.circuit, cfg.realizations, cfg.batch, cfg.workers, {T},
                      [M, N](uint64_t seed) { return random_fock_origins(M, N, seed); }, "sample-compare"};
    std::vector<RetryEvent> retries;
    auto records = run_ensemble<Record>(
        plan, [](Record &rec, int, const ModeMatrix &k) { rec.rows = k.rows; }, &retries);
    SampleCompareResult res;
    for (size_t r = 0; r < records.size(); r++) {
        OutputDistribution exact = exact_distribution(records[r].rows);
        SharedMode mode = extract_shared_mode(records[r].rows.row(0));
        OutputDistribution multi = multinomial_distribution(mode, N);
        res.tvd.push_back(tvd(exact, multi));
        res.normalization.push_back(exact.normalization);
        res.support.push_back(static_cast<int>(mode.sites.size()));
        if (r == 0) {
            if (cfg.samples > 0) {
                Stream rng = derive_stream(derive_seed(cfg.circuit.seed, 0), 2);
                auto draws = multinomial_sample(mode, N, rng, cfg.samples);
                res.sampled_tvd = tvd(empirical_distribution(draws, M), exact);
            }
            res.exact = std::move(exact);
            res.multinomial = std::move(multi);
        }
    }
    if (outcome != nullptr) {
        outcome->retries = std::move(retries);
        outcome->seeds = realization_seeds(cfg);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Artifacts

/// 64-bit FNV-1a, as 16 hex digits.
inline std::string fnv1a_hex(const std::string &s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct RunManifest {
    json config;
    uint64_t master_seed = 0;
    std::vector<uint64_t> realization_seeds;
    std::vector<RetryEvent> retries;
    std::string code_version = kCodeVersion;
    double wall_time_seconds = 0;
    std::vector<std::string> files;

    /// Hash of everything that determines the outputs (wall time excluded).
    std::string hash() const {
        return fnv1a_hex(deterministic_part().dump());
    }

    json deterministic_part() const {
        json retry_list = json::array();
        for (const auto &r : retries) {
            retry_list.push_back(
                {{"realization", r.realization}, {"attempt", r.attempt}, {"failed_period", r.failed_period},
                 {"system", r.system}});
        }
        return {{"config", config},
                {"master_seed", master_seed},
                {"realization_seeds", realization_seeds},
                {"retries", retry_list},
                {"code_version", code_version}};
    }

    json to_json() const {
        json j = deterministic_part();
        j["retry_count"] = retries.size();
        j["wall_time_seconds"] = wall_time_seconds;
        j["files"] = files;
        j["manifest_hash"] = hash();
        return j;
    }
};

/// CSV file whose first line records the manifest hash as a '#' comment.
class CsvFile {
   public:
    CsvFile(const std::filesystem::path &path, const std::string &manifest_hash, const std::string &header)
        : out_(path) {
        if (!out_) {
            throw std::runtime_error("cannot write " + path.string());
        }
        out_ << "# manifest_hash=" << manifest_hash << '\n' << header << '\n';
    }

    template <typename... Cells>
    void row(const Cells &...cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    std::ostream &stream() {
        return out_;
    }

   private:
    static std::string cell(double x) {
        return format_double(x);
    }
    static std::string cell(int x) {
        return std::to_string(x);
    }
    static std::string cell(const std::string &x) {
        return x;
    }
    std::ofstream out_;
};

inline void write_json(const std::filesystem::path &path, const json &j) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

inline json fit_to_json(const std::optional<ScalingFit> &fit, const std::string &error) {
    if (!fit) {
        return {{"exponent", nullptr}, {"error", error}};
    }
    return {{"exponent", fit->exponent},
            {"amplitude_log", fit->amplitude_log},
            {"window", {fit->window.first, fit->window.second}},
            {"residual", fit->residual},
            {"points", fit->points}};
}

inline json scan_to_json(const Tau2Scan &scan) {
    json j{{"beta", scan.beta}, {"decreasing", scan.decreasing}, {"saturated", scan.saturated}};
    if (scan.extrapolation) {
        j["tau2_inf"] = scan.extrapolation->tau2_inf;
        j["slope"] = scan.extrapolation->slope;
    } else {
        j["tau2_inf"] = nullptr;
        j["slope"] = nullptr;
    }
    json sat = json::array();
    for (const auto &p : scan.points) {
        sat.push_back({{"L", p.L}, {"tau2_half", p.tau2_half}, {"stderr_half", p.std_error_half},
                       {"saturated", p.saturated}});
    }
    j["saturation"] = sat;
    return j;
}

/// Runs the configured experiment, writes its artifacts and manifest.json
/// into cfg.output_dir, and returns the manifest.
inline RunManifest run(const ExperimentConfig &cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    RunManifest manifest;
    manifest.config = config_to_json(cfg);
    manifest.master_seed = cfg.circuit.seed;
    RunOutcome outcome;

    // Results are computed first; the hash covers retries, so files are
    // written once the ensemble is complete.
    std::function<void(const std::string &)> write;
    switch (cfg.experiment) {
        case Experiment::Wander: {
            auto res = std::make_shared<WanderResult>(run_wander(cfg, &outcome));
            write = [res, dir, &manifest](const std::string &h) {
                CsvFile csv(dir / "series.csv", h, "t,X2_mean,X2_stderr,S2_mean");
                for (size_t k = 0; k < res->x2.size(); k++) {
                    csv.row(res->x2[k].t, res->x2[k].value, res->x2[k].std_error, res->s2[k].value);
                }
                json fit = fit_to_json(res->x2_fit, res->x2_fit_error);
                fit["S2"] = fit_to_json(res->s2_fit, res->s2_fit_error);
                fit["origin"] = res->origin;
                fit["boundary_flagged_realizations"] = res->boundary_flagged;
                fit["first_flagged_t"] = res->first_flagged_t ? json(*res->first_flagged_t) : json(nullptr);
                fit["manifest_hash"] = h;
                write_json(dir / "fit.json", fit);
                manifest.files = {"series.csv", "fit.json"};
            };
            break;
        }
        case Experiment::IprScan: {
            auto scan = std::make_shared<Tau2Scan>(run_ipr_scan(cfg, &outcome));
            write = [scan, dir, &manifest](const std::string &h) {
                CsvFile csv(dir / "tau2.csv", h, "L,tau2,stderr");
                for (const auto &p : scan->points) {
                    csv.row(p.L, p.tau2, p.std_error);
                }
                json j = scan_to_json(*scan);
                j["manifest_hash"] = h;
                write_json(dir / "extrapolation.json", j);
                manifest.files = {"tau2.csv", "extrapolation.json"};
            };
            break;
        }
        case Experiment::BetaSweep: {
            auto scans = std::make_shared<std::vector<Tau2Scan>>(run_beta_sweep(cfg, &outcome));
            write = [scans, dir, &manifest](const std::string &h) {
                CsvFile csv(dir / "tau2.csv", h, "beta,L,tau2,stderr");
                json list = json::array();
                for (const auto &scan : *scans) {
                    for (const auto &p : scan.points) {
                        csv.row(p.beta, p.L, p.tau2, p.std_error);
                    }
                    list.push_back(scan_to_json(scan));
                }
                write_json(dir / "extrapolation.json", {{"betas", list}, {"manifest_hash", h}});
                manifest.files = {"tau2.csv", "extrapolation.json"};
            };
            break;
        }
        case Experiment::Distance:
        case Experiment::Overlap: {
            auto res = std::make_shared<DistanceResult>(run_distance(cfg, &outcome));
            const bool with_distance = cfg.experiment == Experiment::Distance;
            write = [res, dir, with_distance, &manifest](const std::string &h) {
                manifest.files.clear();
                if (with_distance) {
                    CsvFile csv(dir / "distance.csv", h, "t,D_mean,D_stderr");
                    for (const auto &p : res->distance) {
                        csv.row(p.t, p.value, p.std_error);
                    }
                    manifest.files.push_back("distance.csv");
                }
                CsvFile csv(dir / "overlap.csv", h, "t,min_overlap");
                for (const auto &[t, o] : res->min_overlap) {
                    csv.row(t, o);
                }
                manifest.files.push_back("overlap.csv");
            };
            break;
        }
        case Experiment::SampleCompare: {
            auto res = std::make_shared<SampleCompareResult>(run_sample_compare(cfg, &outcome));
            write = [res, dir, &manifest](const std::string &h) {
                {
                    CsvFile csv(dir / "exact.csv", h, "config,prob,amplitude_re,amplitude_im");
                    for (size_t i = 0; i < res->exact.configs.size(); i++) {
                        csv.row(format_config(res->exact.configs[i]), res->exact.probs[i],
                                res->exact.amplitudes[i].real(), res->exact.amplitudes[i].imag());
                    }
                }
                {
                    CsvFile csv(dir / "multinomial.csv", h, "config,prob,amplitude_re,amplitude_im");
                    for (size_t i = 0; i < res->multinomial.configs.size(); i++) {
                        csv.row(format_config(res->multinomial.configs[i]), res->multinomial.probs[i],
                                res->multinomial.amplitudes[i].real(), res->multinomial.amplitudes[i].imag());
                    }
                }
                double worst = *std::max_element(res->tvd.begin(), res->tvd.end());
                json j{{"tvd", res->tvd.front()},
                       {"tvd_per_realization", res->tvd},
                       {"tvd_max", worst},
                       {"gram_permanent", res->normalization},
                       {"support_size", res->support},
                       {"sampled_tvd", res->sampled_tvd ? json(*res->sampled_tvd) : json(nullptr)},
                       {"manifest_hash", h}};
                write_json(dir / "tvd.json", j);
                manifest.files = {"exact.csv", "multinomial.csv", "tvd.json"};
            };
            break;
        }
    }
    manifest.realization_seeds = outcome.seeds;
    manifest.retries = outcome.retries;
    write(manifest.hash());
    manifest.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(dir / "manifest.json", manifest.to_json());
    return manifest;
}

}  // namespace freebos
