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

// Line-oriented text tables shared by every file the tools read or write:
//
//   # key=value            (header, order preserved)
//   i j real imag          (body, fixed order, 17 significant digits)
//
// Writing, reading and writing again reproduces the same bytes.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <unistd.h>

#include "bayesprop.hpp"
#include "dirac.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "qstate.hpp"
#include "weaksim.hpp"

namespace diracqp::io {

inline constexpr std::string_view kFormatTag = "diracqp-table-1";

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Header {
public:
    void set(const std::string &key, const std::string &value) {
        for (auto &[k, v] : entries_) {
            if (k == key) {
                v = value;
                return;
            }
        }
        entries_.emplace_back(key, value);
    }
    void set(const std::string &key, double value) { set(key, format_number(value)); }

    std::optional<std::string> get(std::string_view key) const {
        for (const auto &[k, v] : entries_) {
            if (k == key) return v;
        }
        return std::nullopt;
    }
    std::string require(std::string_view key) const {
        auto v = get(key);
        if (!v) throw FormatError("missing header key '" + std::string(key) + "'");
        return *v;
    }
    double require_number(std::string_view key) const;
    std::size_t require_index(std::string_view key) const;

    const std::vector<std::pair<std::string, std::string>> &entries() const noexcept {
        return entries_;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

struct Row {
    std::size_t i = 0;
    std::size_t j = 0;
    double re = 0.0;
    double im = 0.0;
};

struct Table {
    Header header;
    std::vector<Row> rows;
};

namespace detail {

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto *end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<std::size_t> parse_index(std::string_view s) {
    std::size_t v = 0;
    const auto *end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

} // namespace detail

inline double Header::require_number(std::string_view key) const {
    const std::string v = require(key);
    auto d = detail::parse_double(v);
    if (!d) throw FormatError("header key '" + std::string(key) + "' is not a number: " + v);
    return *d;
}

inline std::size_t Header::require_index(std::string_view key) const {
    const std::string v = require(key);
    auto d = detail::parse_index(v);
    if (!d) throw FormatError("header key '" + std::string(key) + "' is not an integer: " + v);
    return *d;
}

inline std::string write_table(const Table &t) {
    std::string out;
    out.reserve(64 * (t.rows.size() + t.header.entries().size()));
    for (const auto &[k, v] : t.header.entries()) {
        out += "# ";
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    for (const Row &r : t.rows) {
        out += std::to_string(r.i);
        out += ' ';
        out += std::to_string(r.j);
        out += ' ';
        out += format_number(r.re);
        out += ' ';
        out += format_number(r.im);
        out += '\n';
    }
    return out;
}

inline Table parse_table(std::string_view text) {
    Table t;
    std::size_t lineno = 0;
    bool in_body = false;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (in_body) throw FormatError("header line after body rows", lineno);
            std::string_view kv = line.substr(1);
            while (!kv.empty() && kv.front() == ' ') kv.remove_prefix(1);
            const std::size_t eq = kv.find('=');
            if (eq == std::string_view::npos || eq == 0) {
                throw FormatError("header line is not key=value", lineno);
            }
            t.header.set(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
            continue;
        }
        in_body = true;
        const auto f = detail::split_ws(line);
        if (f.size() != 4) throw FormatError("expected 'row col real imag'", lineno);
        const auto i = detail::parse_index(f[0]);
        const auto j = detail::parse_index(f[1]);
        const auto re = detail::parse_double(f[2]);
        const auto im = detail::parse_double(f[3]);
        if (!i || !j || !re || !im) throw FormatError("malformed body row", lineno);
        t.rows.push_back(Row{*i, *j, *re, *im});
    }
    if (t.header.get("format") != std::optional<std::string>(std::string(kFormatTag))) {
        throw FormatError("not a " + std::string(kFormatTag) + " file");
    }
    return t;
}

inline std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Table read_table(const std::filesystem::path &path) {
    try {
        return parse_table(read_text(path));
    } catch (const FormatError &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

/// Collects output files and publishes them together: everything is written
/// to temporaries first and renamed only when all writes succeeded.
class FileTransaction {
public:
    void add(std::filesystem::path path, std::string content) {
        files_.emplace_back(std::move(path), std::move(content));
    }

    void commit() {
        namespace fs = std::filesystem;
        std::vector<fs::path> temps;
        auto cleanup = [&] {
            std::error_code ec;
            for (const auto &p : temps) fs::remove(p, ec);
        };
        for (const auto &[path, content] : files_) {
            std::error_code ec;
            if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
            fs::path tmp = path;
            tmp += ".tmp." + std::to_string(::getpid());
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (out) temps.push_back(tmp);
            out << content;
            out.close();
            if (!out) {
                cleanup();
                throw DataError("cannot write " + path.string());
            }
        }
        for (std::size_t i = 0; i < files_.size(); ++i) {
            std::error_code ec;
            fs::rename(temps[i], files_[i].first, ec);
            if (ec) {
                cleanup();
                throw DataError("cannot move output into place: " + files_[i].first.string());
            }
        }
        files_.clear();
    }

    std::size_t size() const noexcept { return files_.size(); }

private:
    std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

// ---------------------------------------------------------------------------
// Typed files

inline Header base_header(std::string_view type, const lattice::Grid &g) {
    Header h;
    h.set("format", std::string(kFormatTag));
    h.set("type", std::string(type));
    h.set("n", std::to_string(g.n()));
    h.set("dx", g.dx());
    h.set("x0", g.x0());
    if (g.unit_map()) {
        h.set("wavelength", g.unit_map()->wavelength);
        h.set("f_ft", g.unit_map()->f_ft);
        h.set("magnification", g.unit_map()->magnification);
    }
    return h;
}

inline lattice::Grid grid_from_header(const Header &h) {
    const std::size_t n = h.require_index("n");
    const double dx = h.require_number("dx");
    const double x0 = h.require_number("x0");
    std::optional<lattice::UnitMap> units;
    if (h.get("wavelength")) {
        units = lattice::UnitMap{h.require_number("wavelength"), h.require_number("f_ft"),
                                 h.require_number("magnification")};
    }
    try {
        return lattice::Grid(n, dx, x0, units);
    } catch (const ConfigError &e) {
        throw FormatError(std::string("invalid grid in header: ") + e.what());
    }
}

inline void require_type(const Table &t, std::string_view type) {
    const std::string got = t.header.require("type");
    if (got != type) {
        throw FormatError("expected a '" + std::string(type) + "' file, found '" + got + "'");
    }
}

inline Table matrix_table(Header h, const CMatrix &a) {
    Table t{std::move(h), {}};
    t.rows.reserve(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            t.rows.push_back(Row{static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                 a(i, j).real(), a(i, j).imag()});
        }
    }
    return t;
}

/// Dense rows x cols body; every entry must appear exactly once.
inline CMatrix matrix_from_rows(const Table &t, std::size_t rows, std::size_t cols) {
    if (t.rows.size() != rows * cols) {
        throw FormatError("expected " + std::to_string(rows * cols) + " body rows, found " +
                          std::to_string(t.rows.size()));
    }
    CMatrix a(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<bool> seen(rows * cols, false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Row &row = t.rows[r];
        if (row.i >= rows || row.j >= cols) {
            throw FormatError("body row " + std::to_string(r + 1) + " index out of range");
        }
        const std::size_t flat = row.i * cols + row.j;
        if (seen[flat]) {
            throw FormatError("duplicate entry (" + std::to_string(row.i) + ", " +
                              std::to_string(row.j) + ")");
        }
        seen[flat] = true;
        a(static_cast<Eigen::Index>(row.i), static_cast<Eigen::Index>(row.j)) = cplx(row.re, row.im);
    }
    return a;
}

inline Table density_table(const qstate::DensityMatrix &rho) {
    return matrix_table(base_header("density", rho.grid()), rho.matrix());
}

inline qstate::DensityMatrix density_from_table(const Table &t) {
    require_type(t, "density");
    const auto g = grid_from_header(t.header);
    return qstate::DensityMatrix::unvalidated(g, matrix_from_rows(t, g.n(), g.n()));
}

/// `extra` entries (source, phi, seed...) go after the grid keys.
inline Table dirac_table(const dirac::DiracDistribution &D, const Header &extra = {}) {
    Header h = base_header("dirac", D.grid);
    for (const auto &[k, v] : extra.entries()) h.set(k, v);
    return matrix_table(std::move(h), D.d);
}

inline dirac::DiracDistribution dirac_from_table(const Table &t) {
    require_type(t, "dirac");
    const auto g = grid_from_header(t.header);
    return dirac::DiracDistribution{g, matrix_from_rows(t, g.n(), g.n())};
}

inline Table propagated_table(const bayesprop::PropagatedDistribution &P, const Header &extra = {}) {
    Header h = base_header("propagated", P.grid);
    h.set("dz", P.dz);
    h.set("kind", std::string(bayesprop::kind_name(P.kind)));
    for (const auto &[k, v] : extra.entries()) h.set(k, v);
    return matrix_table(std::move(h), P.e);
}

inline bayesprop::PropagatedDistribution propagated_from_table(const Table &t) {
    require_type(t, "propagated");
    const auto g = grid_from_header(t.header);
    const auto kind = bayesprop::parse_kind(t.header.require("kind"));
    if (!kind) throw FormatError("unknown kernel kind '" + t.header.require("kind") + "'");
    return bayesprop::PropagatedDistribution{g, t.header.require_number("dz"), *kind,
                                             matrix_from_rows(t, g.n(), g.n())};
}

/// Counts: body row (k, j) holds N for momentum k and polarisation j
/// (0..3 = D, A, L, R) in the real column.
inline Table counts_table(const weaksim::MeasurementRecord &rec, const lattice::Grid &g) {
    Header h = base_header("counts", g);
    h.set("sliver", std::to_string(rec.sliver.begin));
    h.set("sliver_width", std::to_string(rec.sliver.width));
    h.set("phi", rec.phi);
    h.set("photon_budget", rec.photon_budget);
    h.set("seed", rec.seed ? std::to_string(*rec.seed) : std::string("none"));
    h.set("columns", "D,A,L,R");
    Table t{std::move(h), {}};
    for (std::size_t k = 0; k < rec.n(); ++k) {
        for (weaksim::Pol j : weaksim::kPolarizations) {
            t.rows.push_back(
                Row{k, static_cast<std::size_t>(j), rec[j](static_cast<Eigen::Index>(k)), 0.0});
        }
    }
    return t;
}

inline weaksim::MeasurementRecord record_from_table(const Table &t) {
    require_type(t, "counts");
    const auto g = grid_from_header(t.header);
    const CMatrix a = matrix_from_rows(t, g.n(), 4);
    weaksim::MeasurementRecord rec;
    rec.sliver = weaksim::Sliver{t.header.require_index("sliver"), t.header.require_index("sliver_width")};
    rec.phi = t.header.require_number("phi");
    rec.photon_budget = t.header.require_number("photon_budget");
    const std::string seed = t.header.require("seed");
    if (seed != "none") {
        std::uint64_t s = 0;
        auto [ptr, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), s);
        if (ec != std::errc() || ptr != seed.data() + seed.size()) {
            throw FormatError("seed is neither an integer nor 'none'");
        }
        rec.seed = s;
    }
    for (weaksim::Pol j : weaksim::kPolarizations) {
        RVector c = a.col(static_cast<Eigen::Index>(j)).real();
        if ((c.array() < 0.0).any()) throw FormatError("negative photon count");
        rec[j] = std::move(c);
    }
    return rec;
}

/// Kernel: body row (j * n + m, kp) holds P(k'_j | x_m, p_kp).
inline Table kernel_table(const bayesprop::PropagatorKernel &K) {
    Header h = base_header("kernel", K.grid);
    h.set("dz", K.dz);
    h.set("kind", std::string(bayesprop::kind_name(K.kind)));
    Table t{std::move(h), {}};
    const std::size_t n = K.n();
    t.rows.reserve(n * n * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t m = 0; m < n; ++m) {
            for (std::size_t kp = 0; kp < n; ++kp) {
                const cplx c = K(j, m, kp);
                t.rows.push_back(Row{j * n + m, kp, c.real(), c.imag()});
            }
        }
    }
    return t;
}

inline bayesprop::PropagatorKernel kernel_from_table(const Table &t) {
    require_type(t, "kernel");
    const auto g = grid_from_header(t.header);
    const auto kind = bayesprop::parse_kind(t.header.require("kind"));
    if (!kind) throw FormatError("unknown kernel kind");
    const std::size_t n = g.n();
    const CMatrix a = matrix_from_rows(t, n * n, n);
    bayesprop::PropagatorKernel K{g, t.header.require_number("dz"), *kind, CMatrix(), {}};
    K.cond.resize(n * n * n);
    for (std::size_t r = 0; r < n * n; ++r) {
        for (std::size_t kp = 0; kp < n; ++kp) {
            K.cond[r * n + kp] = a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(kp));
        }
    }
    return K;
}

} // namespace diracqp::io
