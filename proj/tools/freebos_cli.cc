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

// Command-line driver: one subcommand per experiment.
//
// Exit codes: 0 success, 2 invalid configuration, 3 persistent zero rows.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "freebos/experiments.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<uint64_t> seed;
    std::optional<int> workers, M, T, realizations, N, origin, batch, samples, time_factor;
    std::optional<double> beta, p, dt;
    std::optional<std::string> model, dissipation, boundary, gate, out;
    std::vector<int> L_list, snapshot_times, fit_window;
    std::vector<double> beta_list;
};

void add_flags(CLI::App *cmd, Overrides &o) {
    cmd->add_option("--config", o.config, "JSON config file");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--workers", o.workers, "worker threads");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--model", o.model, "brickwork-gate | hopping-hamiltonian | nonlocal-matching");
    cmd->add_option("--dissipation", o.dissipation, "imaginary-beta | projective-p | none");
    cmd->add_option("--boundary", o.boundary, "open | periodic");
    cmd->add_option("--gate", o.gate, "quantum | classical | identity");
    cmd->add_option("--M", o.M, "number of sites");
    cmd->add_option("--T", o.T, "number of periods");
    cmd->add_option("--beta", o.beta, "dissipation strength");
    cmd->add_option("--p", o.p, "projection probability");
    cmd->add_option("--dt", o.dt, "hopping time step");
    cmd->add_option("--realizations", o.realizations, "number of realizations");
    cmd->add_option("--N", o.N, "number of bosons");
    cmd->add_option("--origin", o.origin, "wander origin");
    cmd->add_option("--batch", o.batch, "realizations per work item");
    cmd->add_option("--samples", o.samples, "multinomial draws");
    cmd->add_option("--time-factor", o.time_factor, "evolution time in units of L");
    cmd->add_option("--L-list", o.L_list, "system sizes")->delimiter(',');
    cmd->add_option("--beta-list", o.beta_list, "beta values")->delimiter(',');
    cmd->add_option("--snapshot-times", o.snapshot_times, "snapshot times")->delimiter(',');
    cmd->add_option("--fit-window", o.fit_window, "t_min,t_max")->delimiter(',');
}

freebos::json merge(const std::string &experiment, const Overrides &o) {
    freebos::json j = freebos::json::object();
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) {
            throw freebos::InvalidExperimentConfig("cannot read config " + o.config);
        }
        try {
            j = freebos::json::parse(in);
        } catch (const freebos::json::exception &e) {
            throw freebos::InvalidExperimentConfig(std::string("config is not valid JSON: ") + e.what());
        }
        if (j.contains("experiment") && j["experiment"] != experiment) {
            throw freebos::InvalidExperimentConfig("config is for experiment " + j["experiment"].dump());
        }
    }
    j["experiment"] = experiment;
    auto set = [&j](const char *key, const auto &v) {
        if (v) j[key] = *v;
    };
    set("seed", o.seed);
    set("workers", o.workers);
    set("output_dir", o.out);
    set("model", o.model);
    set("dissipation", o.dissipation);
    set("boundary", o.boundary);
    set("gate", o.gate);
    set("M", o.M);
    set("T", o.T);
    set("beta", o.beta);
    set("p", o.p);
    set("dt", o.dt);
    set("realizations", o.realizations);
    set("N", o.N);
    set("origin", o.origin);
    set("batch", o.batch);
    set("samples", o.samples);
    set("time_factor", o.time_factor);
    if (!o.L_list.empty()) j["L_list"] = o.L_list;
    if (!o.beta_list.empty()) j["beta_list"] = o.beta_list;
    if (!o.snapshot_times.empty()) j["snapshot_times"] = o.snapshot_times;
    if (!o.fit_window.empty()) j["fit_window"] = o.fit_window;
    return j;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Non-unitary free-boson circuit experiments"};
    app.set_version_flag("--version", std::string(freebos::kCodeVersion));
    app.require_subcommand(1);
    Overrides o;
    for (const char *name : {"wander", "ipr-scan", "distance", "overlap", "sample-compare", "beta-sweep"}) {
        add_flags(app.add_subcommand(name, std::string("run the ") + name + " experiment"), o);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string experiment = app.get_subcommands().front()->get_name();
    try {
        freebos::ExperimentConfig cfg = freebos::config_from_json(merge(experiment, o));
        freebos::RunManifest m = freebos::run(cfg);
        std::cout << "wrote " << cfg.output_dir << " (manifest_hash=" << m.hash() << ", retries=" << m.retries.size()
                  << ", " << m.wall_time_seconds << " s)\n";
        return 0;
    } catch (const freebos::PersistentZeroRow &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
