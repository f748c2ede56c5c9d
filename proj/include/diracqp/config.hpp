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

// Run configuration: flat "section.key = value" lines, '#' comments.
// Every key can be overridden by DIRACQP_SECTION_KEY in the environment.

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bayesprop.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "qstate.hpp"
#include "weaksim.hpp"

namespace diracqp::config {

struct PipelineConfig {
    bool noise = true;
    std::uint64_t seed = 1;
    std::size_t scans = 10;
    bool correction = true;
    std::size_t sliver_width = 1;
};

struct PropagationConfig {
    std::vector<double> dz{0.084, 0.16, 0.325};
    bayesprop::KernelKind kernel = bayesprop::KernelKind::DiscreteUnitary;
};

struct OutputConfig {
    std::string dir = "out";
    weaksim::RecordKeeping counts = weaksim::RecordKeeping::FirstScan;
    std::vector<std::string> tables{"magnitude", "phase", "real", "imag"};
};

struct RunConfig {
    std::size_t n = 256;
    double dx = 0.25e-3;
    double x0 = 22e-3;
    bool units_enabled = true;
    lattice::UnitMap units{780e-9, 1.0, 4.935};
    qstate::BenchConfig bench;
    PipelineConfig pipeline;
    PropagationConfig propagation;
    OutputConfig output;

    lattice::Grid grid() const {
        return lattice::Grid(n, dx, x0,
                             units_enabled ? std::optional<lattice::UnitMap>(units) : std::nullopt);
    }

    weaksim::ScanOptions scan_options() const {
        weaksim::ScanOptions o;
        o.sliver_width = pipeline.sliver_width;
        o.noise = pipeline.noise;
        o.seed = pipeline.seed;
        o.scans = pipeline.scans;
        o.correct_backaction = pipeline.correction;
        o.keep = output.counts;
        return o;
    }
};

/// Returns the value of an environment variable, if set.
using EnvLookup = std::function<std::optional<std::string>(const std::string &)>;

inline std::optional<std::string> process_env(const std::string &name) {
    if (const char *v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void bad(const std::string &key, const std::string &expect,
                             const std::string &value) {
    throw ConfigError(key + ": expected " + expect + ", got '" + value + "'");
}

inline double as_double(const std::string &key, const std::string &v) {
    auto d = io::detail::parse_double(v);
    if (!d) bad(key, "a finite number", v);
    return *d;
}

inline std::uint64_t as_uint(const std::string &key, const std::string &v) {
    std::uint64_t u = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), u);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
        bad(key, "a non-negative integer", v);
    }
    return u;
}

inline bool as_bool(const std::string &key, const std::string &v) {
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    bad(key, "true or false", v);
}

inline std::vector<std::string> split_list(const std::string &v) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto end = comma == std::string::npos ? v.size() : comma;
        std::string item = trim(std::string_view(v).substr(start, end - start));
        if (!item.empty()) out.push_back(std::move(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

using Setter = std::function<void(RunConfig &, const std::string &key, const std::string &value)>;

inline const std::map<std::string, Setter> &setters() {
    constexpr double deg = std::numbers::pi / 180.0;
    static const std::map<std::string, Setter> table = {
        {"grid.n", [](RunConfig &c, auto &k, auto &v) { c.n = static_cast<std::size_t>(as_uint(k, v)); }},
        {"grid.dx", [](RunConfig &c, auto &k, auto &v) { c.dx = as_double(k, v); }},
        {"grid.x0", [](RunConfig &c, auto &k, auto &v) { c.x0 = as_double(k, v); }},
        {"units.enabled", [](RunConfig &c, auto &k, auto &v) { c.units_enabled = as_bool(k, v); }},
        {"units.wavelength", [](RunConfig &c, auto &k, auto &v) { c.units.wavelength = as_double(k, v); }},
        {"units.f_ft", [](RunConfig &c, auto &k, auto &v) { c.units.f_ft = as_double(k, v); }},
        {"units.magnification",
         [](RunConfig &c, auto &k, auto &v) { c.units.magnification = as_double(k, v); }},
        {"bench.aperture_halfwidth",
         [](RunConfig &c, auto &k, auto &v) { c.bench.aperture_halfwidth = as_double(k, v); }},
        {"bench.edge_position",
         [](RunConfig &c, auto &k, auto &v) { c.bench.edge_position = as_double(k, v); }},
        {"bench.phase_step",
         [](RunConfig &c, auto &k, auto &v) { c.bench.static_phase_step = as_double(k, v); }},
        {"bench.wedge_tilt", [](RunConfig &c, auto &k, auto &v) { c.bench.wedge_tilt = as_double(k, v); }},
        {"bench.edge_loss", [](RunConfig &c, auto &k, auto &v) { c.bench.edge_loss = as_double(k, v); }},
        {"bench.mixed", [](RunConfig &c, auto &k, auto &v) { c.bench.mixed = as_bool(k, v); }},
        {"bench.phi_deg", [deg](RunConfig &c, auto &k, auto &v) { c.bench.phi = as_double(k, v) * deg; }},
        {"bench.photon_budget",
         [](RunConfig &c, auto &k, auto &v) { c.bench.photon_budget = as_double(k, v); }},
        {"pipeline.noise", [](RunConfig &c, auto &k, auto &v) { c.pipeline.noise = as_bool(k, v); }},
        {"pipeline.seed", [](RunConfig &c, auto &k, auto &v) { c.pipeline.seed = as_uint(k, v); }},
        {"pipeline.scans",
         [](RunConfig &c, auto &k, auto &v) { c.pipeline.scans = static_cast<std::size_t>(as_uint(k, v)); }},
        {"pipeline.correction",
         [](RunConfig &c, auto &k, auto &v) { c.pipeline.correction = as_bool(k, v); }},
        {"pipeline.sliver_width",
         [](RunConfig &c, auto &k, auto &v) {
             c.pipeline.sliver_width = static_cast<std::size_t>(as_uint(k, v));
         }},
        {"propagation.dz",
         [](RunConfig &c, auto &k, auto &v) {
             c.propagation.dz.clear();
             for (const auto &item : split_list(v)) c.propagation.dz.push_back(as_double(k, item));
         }},
        {"propagation.kernel",
         [](RunConfig &c, auto &k, auto &v) {
             auto kind = bayesprop::parse_kind(v);
             if (!kind) bad(k, "unitary or analytic", v);
             c.propagation.kernel = *kind;
         }},
        {"output.dir", [](RunConfig &c, auto &, auto &v) { c.output.dir = v; }},
        {"output.counts",
         [](RunConfig &c, auto &k, auto &v) {
             if (v == "none") c.output.counts = weaksim::RecordKeeping::None;
             else if (v == "first") c.output.counts = weaksim::RecordKeeping::FirstScan;
             else if (v == "all") c.output.counts = weaksim::RecordKeeping::All;
             else bad(k, "none, first or all", v);
         }},
        {"output.tables",
         [](RunConfig &c, auto &k, auto &v) {
             c.output.tables = split_list(v);
             for (const auto &t : c.output.tables) {
                 if (t != "magnitude" && t != "phase" && t != "real" && t != "imag") {
                     bad(k, "a list drawn from magnitude, phase, real, imag", t);
                 }
             }
         }},
    };
    return table;
}

} // namespace detail

/// All recognised keys, in sorted order.
inline std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    for (const auto &[k, _] : detail::setters()) keys.push_back(k);
    return keys;
}

/// DIRACQP_ + key with dots as underscores, upper case.
inline std::string env_name(std::string_view key) {
    std::string out = "DIRACQP_";
    for (char ch : key) {
        out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    return out;
}

inline void set_value(RunConfig &cfg, const std::string &key, const std::string &value) {
    const auto &table = detail::setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second(cfg, key, value);
}

/// Cross-field checks. Messages name the offending key.
inline void validate(const RunConfig &cfg) {
    const lattice::Grid g = [&] {
        try {
            return cfg.grid();
        } catch (const ConfigError &e) {
            throw ConfigError(std::string("grid/units: ") + e.what());
        }
    }();
    qstate::validate(cfg.bench, g);
    if (cfg.pipeline.scans == 0) throw ConfigError("pipeline.scans must be at least 1");
    if (cfg.pipeline.sliver_width == 0 || cfg.pipeline.sliver_width > cfg.n) {
        throw ConfigError("pipeline.sliver_width must be between 1 and grid.n");
    }
    for (double dz : cfg.propagation.dz) {
        if (dz < 0.0) throw ConfigError("propagation.dz entries must be non-negative");
    }
    if (!cfg.propagation.dz.empty() && !cfg.units_enabled) {
        throw ConfigError("propagation.dz requires units.enabled = true");
    }
    if (cfg.output.dir.empty()) throw ConfigError("output.dir must not be empty");
}

/// Parses `text` over the defaults, applies environment overrides, validates.
inline RunConfig parse(std::string_view text, const EnvLookup &env = process_env) {
    RunConfig cfg;
    std::size_t lineno = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = detail::trim(std::string_view(trimmed).substr(0, eq));
        const std::string value = detail::trim(std::string_view(trimmed).substr(eq + 1));
        try {
            set_value(cfg, key, value);
        } catch (const ConfigError &e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (env) {
        for (const auto &[key, _] : detail::setters()) {
            if (auto v = env(env_name(key))) {
                try {
                    set_value(cfg, key, detail::trim(*v));
                } catch (const ConfigError &e) {
                    throw ConfigError("environment " + env_name(key) + ": " + e.what());
                }
            }
        }
    }
    validate(cfg);
    return cfg;
}

inline RunConfig load(const std::filesystem::path &path, const EnvLookup &env = process_env) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const DataError &) {
        throw ConfigError("cannot read config file " + path.string());
    }
    try {
        return parse(text, env);
    } catch (const ConfigError &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace diracqp::config
