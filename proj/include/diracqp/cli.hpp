// Copyright 2026 The diracqp Authors
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

// Subcommands of the diracqp tool. Each one reads its inputs, computes, and
// publishes all outputs through one FileTransaction.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bayesprop.hpp"
#include "config.hpp"
#include "dirac.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "qstate.hpp"
#include "weaksim.hpp"

namespace diracqp::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

struct Options {
    std::optional<fs::path> config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    bool no_noise = false;
    bool no_correction = false;
    fs::path input; // state, dirac or propagated file, depending on the command
    bool write_kernels = false;
};

/// Defaults < config file < environment < command-line flags.
inline config::RunConfig resolve(const Options &opt, const config::EnvLookup &env = config::process_env) {
    config::RunConfig cfg = opt.config ? config::load(*opt.config, env) : config::parse("", env);
    if (opt.out) cfg.output.dir = *opt.out;
    if (opt.seed) cfg.pipeline.seed = *opt.seed;
    if (opt.no_noise) cfg.pipeline.noise = false;
    if (opt.no_correction) cfg.pipeline.correction = false;
    config::validate(cfg);
    return cfg;
}

inline fs::path out_path(const config::RunConfig &cfg, const std::string &name) {
    return fs::path(cfg.output.dir) / name;
}

/// Loads a density file written by gen-state and checks it is a valid state.
inline qstate::DensityMatrix load_state(const fs::path &path) {
    const auto raw = io::density_from_table(io::read_table(path));
    const auto report = qstate::check_invariants(raw.matrix());
    if (!report.ok()) {
        throw NumericalIntegrityError(path.string() + ": not a valid density matrix (trace error " +
                                      std::to_string(report.trace_error) + ", min eigenvalue " +
                                      std::to_string(report.min_eigenvalue) + ")");
    }
    return raw;
}

inline std::string format_dz(double dz) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", dz);
    return buf;
}

// ---------------------------------------------------------------------------

inline void gen_state(const config::RunConfig &cfg, std::ostream &log) {
    const auto g = cfg.grid();
    const auto rho = qstate::build_bench_state(cfg.bench, g);
    io::FileTransaction tx;
    const auto path = out_path(cfg, "state.txt");
    io::Table t = io::density_table(rho);
    t.header.set("mixed", cfg.bench.mixed ? "true" : "false");
    tx.add(path, io::write_table(t));
    tx.commit();
    log << "wrote " << path.string() << "\n";
}

inline void exact(const config::RunConfig &cfg, const fs::path &state, std::ostream &log) {
    const auto rho = load_state(state);
    const auto D = dirac::dirac_distribution(rho);
    io::Header extra;
    extra.set("source", "exact");
    io::FileTransaction tx;
    const auto path = out_path(cfg, "dirac_exact.txt");
    tx.add(path, io::write_table(io::dirac_table(D, extra)));
    tx.commit();
    log << "wrote " << path.string() << "\n";
}

inline void measure(const config::RunConfig &cfg, const fs::path &state, std::ostream &log) {
    const auto rho = load_state(state);
    const auto opts = cfg.scan_options();
    auto res = weaksim::scan_in_basis(rho, lattice::overlap_matrix(rho.grid()), cfg.bench.phi,
                                      cfg.bench.photon_budget, opts);
    const dirac::DiracDistribution D{rho.grid(), std::move(res.measured)};

    io::Header extra;
    extra.set("source", "measured");
    extra.set("phi", cfg.bench.phi);
    extra.set("photon_budget", cfg.bench.photon_budget);
    extra.set("scans", std::to_string(opts.scans));
    extra.set("sliver_width", std::to_string(opts.sliver_width));
    extra.set("noise", opts.noise ? "true" : "false");
    extra.set("seed", opts.noise ? std::to_string(opts.seed) : std::string("none"));
    extra.set("correction", opts.correct_backaction ? "true" : "false");

    io::FileTransaction tx;
    tx.add(out_path(cfg, "dirac_measured.txt"), io::write_table(io::dirac_table(D, extra)));
    const std::size_t per_sliver = opts.keep == weaksim::RecordKeeping::All ? opts.scans : 1;
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "counts/sliver%04zu_scan%02zu.txt", i / per_sliver,
                      i % per_sliver);
        tx.add(out_path(cfg, name), io::write_table(io::counts_table(res.records[i], rho.grid())));
    }
    if (opts.correct_backaction) {
        io::Table t = io::density_table(dirac::reconstruct_density(D));
        t.header.set("source", "measured");
        tx.add(out_path(cfg, "density_measured.txt"), io::write_table(t));
    }
    const std::size_t files = tx.size();
    tx.commit();
    log << "wrote " << files << " files to " << cfg.output.dir << "\n";
}

inline void reconstruct(const config::RunConfig &cfg, const fs::path &dirac_file, std::ostream &log) {
    const auto D = io::dirac_from_table(io::read_table(dirac_file));
    io::FileTransaction tx;
    const auto path = out_path(cfg, "density.txt");
    tx.add(path, io::write_table(io::density_table(dirac::reconstruct_density(D))));
    tx.commit();
    log << "wrote " << path.string() << "\n";
}

inline std::string propagated_name(double dz) { return "propagated_dz" + format_dz(dz) + ".txt"; }

inline void propagate(const config::RunConfig &cfg, const fs::path &dirac_file, bool write_kernels,
                      std::ostream &log) {
    const auto file = io::dirac_from_table(io::read_table(dirac_file));
    // Propagation needs the optical units even if the file was made without them.
    dirac::DiracDistribution D = file;
    if (!D.grid.unit_map()) {
        if (D.grid.n() != cfg.n) throw DataError("grid of " + dirac_file.string() + " differs from config");
        D.grid = lattice::Grid(D.grid.n(), D.grid.dx(), D.grid.x0(), cfg.units);
    }
    io::FileTransaction tx;
    for (double dz : cfg.propagation.dz) {
        tx.add(out_path(cfg, propagated_name(dz)),
               io::write_table(io::propagated_table(bayesprop::propagate(D, dz, cfg.propagation.kernel))));
        if (write_kernels) {
            const auto K = cfg.propagation.kernel == bayesprop::KernelKind::AnalyticFresnel && dz != 0.0
                               ? bayesprop::build_kernel_analytic(D.grid, dz)
                               : bayesprop::build_kernel_unitary(
                                     D.grid, bayesprop::fresnel_unitary(D.grid, dz), dz);
            tx.add(out_path(cfg, "kernel_dz" + format_dz(dz) + ".txt"), io::write_table(io::kernel_table(K)));
        }
    }
    const std::size_t files = tx.size();
    tx.commit();
    log << "wrote " << files << " files to " << cfg.output.dir << "\n";
}

/// Property report; returns true if every check passed.
inline bool props(const fs::path &dirac_file, std::ostream &out, double tol = 1e-9) {
    const auto D = io::dirac_from_table(io::read_table(dirac_file));
    const auto r = dirac::check_invariants(D);
    const double pur = dirac::purity(D);
    const double n = static_cast<double>(D.n());
    auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };
    const bool norm_ok = std::abs(r.normalization - cplx(1.0, 0.0)) <= tol;
    const bool pur_ok = pur <= 1.0 + tol && pur >= 1.0 / n - tol;
    const bool imag_ok = r.max_marginal_imag <= tol;
    const bool neg_ok = r.min_marginal >= -tol;
    out << "file: " << dirac_file.string() << "\n";
    out << "n: " << D.n() << "\n";
    out << "tolerance: " << io::format_number(tol) << "\n";
    out << "normalization: " << io::format_number(r.normalization.real()) << " "
        << io::format_number(r.normalization.imag()) << " " << verdict(norm_ok) << "\n";
    out << "purity: " << io::format_number(pur) << " " << verdict(pur_ok) << "\n";
    out << "marginal_max_imag: " << io::format_number(r.max_marginal_imag) << " " << verdict(imag_ok)
        << "\n";
    out << "marginal_min: " << io::format_number(r.min_marginal) << " " << verdict(neg_ok) << "\n";
    return norm_ok && pur_ok && imag_ok && neg_ok;
}

/// Phase in (-pi, pi].
inline double principal_phase(cplx z) {
    const double a = std::arg(z);
    return a <= -std::numbers::pi ? std::numbers::pi : a;
}

/// Heat-map table: header row of column coordinates, then one row per x.
inline std::string heatmap_csv(const lattice::Grid &g, const CMatrix &a, const std::string &table) {
    std::string s = "x";
    for (std::size_t k = 0; k < g.n(); ++k) s += "," + io::format_number(g.p(k));
    s += "\n";
    for (std::size_t m = 0; m < g.n(); ++m) {
        s += io::format_number(g.x(m));
        for (std::size_t k = 0; k < g.n(); ++k) {
            const cplx z = a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
            double v = 0.0;
            if (table == "magnitude") v = std::abs(z);
            else if (table == "phase") v = principal_phase(z);
            else if (table == "real") v = z.real();
            else if (table == "imag") v = z.imag();
            else throw ConfigError("output.tables: unknown table '" + table + "'");
            s += "," + io::format_number(v);
        }
        s += "\n";
    }
    return s;
}

inline void figures(const config::RunConfig &cfg, const fs::path &input, std::ostream &log) {
    const io::Table t = io::read_table(input);
    const std::string type = t.header.require("type");
    lattice::Grid g = io::grid_from_header(t.header);
    CMatrix a;
    if (type == "dirac") {
        a = io::dirac_from_table(t).d;
    } else if (type == "propagated") {
        a = io::propagated_from_table(t).e;
    } else {
        throw FormatError("figures expects a dirac or propagated file, found '" + type + "'");
    }
    const std::string stem = input.stem().string();
    io::FileTransaction tx;
    for (const auto &table : cfg.output.tables) {
        tx.add(out_path(cfg, stem + "_" + table + ".csv"), heatmap_csv(g, a, table));
    }
    const std::size_t files = tx.size();
    tx.commit();
    log << "wrote " << files << " files to " << cfg.output.dir << "\n";
}

// ---------------------------------------------------------------------------

/// Runs the tool; returns the process exit status.
inline int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err,
               const config::EnvLookup &env = config::process_env) {
    CLI::App app{"Dirac quasi-probability simulation tool", "diracqp"};
    app.require_subcommand(1);
    Options opt;
    std::string config_path, out_dir;
    std::uint64_t seed = 0;

    auto common = [&](CLI::App *sub) {
        sub->add_option("--config", config_path, "configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "master seed (overrides pipeline.seed)");
        sub->add_flag("--no-noise", opt.no_noise, "analytic counts, no Poisson sampling");
        sub->add_flag("--no-correction", opt.no_correction, "skip the back-action correction");
    };
    auto with_input = [&](CLI::App *sub, const char *flag, const char *what) {
        sub->add_option(flag, opt.input, what)->required()->check(CLI::ExistingFile);
    };

    auto *gen = app.add_subcommand("gen-state", "write the bench state (state.txt)");
    common(gen);
    auto *meas = app.add_subcommand("measure", "simulate the weak-strong scan of a state");
    common(meas);
    with_input(meas, "--state", "state file");
    auto *ex = app.add_subcommand("exact", "exact Dirac distribution of a state");
    common(ex);
    with_input(ex, "--state", "state file");
    auto *rec = app.add_subcommand("reconstruct", "density matrix from a Dirac distribution");
    common(rec);
    with_input(rec, "--dirac", "dirac file");
    auto *prop = app.add_subcommand("propagate", "Bayes-propagate to each propagation.dz");
    common(prop);
    with_input(prop, "--dirac", "dirac file");
    prop->add_flag("--write-kernels", opt.write_kernels, "also write the n^3 kernels");
    auto *pr = app.add_subcommand("props", "normalization, purity and marginal checks");
    common(pr);
    with_input(pr, "--dirac", "dirac file");
    auto *fig = app.add_subcommand("figures", "CSV heat-map tables");
    common(fig);
    with_input(fig, "--input", "dirac or propagated file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp &e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "diracqp: " << e.what() << "\n";
        return kExitConfig;
    }
    if (!config_path.empty()) opt.config = config_path;
    if (!out_dir.empty()) opt.out = out_dir;
    for (auto *sub : {gen, meas, ex, rec, prop, pr, fig}) {
        if (sub->parsed() && sub->count("--seed")) opt.seed = seed;
    }

    try {
        const auto cfg = resolve(opt, env);
        if (gen->parsed()) gen_state(cfg, out);
        else if (meas->parsed()) measure(cfg, opt.input, out);
        else if (ex->parsed()) exact(cfg, opt.input, out);
        else if (rec->parsed()) reconstruct(cfg, opt.input, out);
        else if (prop->parsed()) propagate(cfg, opt.input, opt.write_kernels, out);
        else if (pr->parsed()) {
            std::ostringstream report;
            const bool ok = props(opt.input, report);
            out << report.str();
            if (opt.out) {
                io::FileTransaction tx;
                tx.add(out_path(cfg, "props.txt"), report.str());
                tx.commit();
            }
            return ok ? kExitOk : kExitData;
        } else if (fig->parsed()) figures(cfg, opt.input, out);
        return kExitOk;
    } catch (const ConfigError &e) {
        err << "diracqp: configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception &e) {
        err << "diracqp: error: " << e.what() << "\n";
        return kExitData;
    }
}

} // namespace diracqp::cli
