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

// Position/momentum lattice and the single Fourier convention used by every
// other module. Natural units (hbar = 1): momenta are wavenumbers in rad/m.
//
//   x_m = (m - n/2) dx + x0,   p_k = (k - n/2) dp,   dp dx n = 2 pi
//   <x_m|p_k> = exp(i x_m p_k) / sqrt(n)

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"

namespace diracqp {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

namespace lattice {

/// Physical constants of the optical bench, used only to convert lattice
/// momenta to camera coordinates and to size free-space propagation.
struct UnitMap {
    double wavelength = 780e-9;   // m
    double f_ft = 1.0;            // Fourier lens focal length, m
    double magnification = 4.935; // camera relay magnification

    /// Camera coordinate of wavenumber p: p = 2 pi x_cam / (f_FT M lambda).
    double camera_coordinate(double p) const {
        return p * f_ft * magnification * wavelength / (2.0 * std::numbers::pi);
    }
    double momentum_from_camera(double x_cam) const {
        return 2.0 * std::numbers::pi * x_cam / (f_ft * magnification * wavelength);
    }
    /// Coordinate in the Fourier plane itself, before the magnifier.
    double ft_plane_coordinate(double p) const {
        return p * f_ft * wavelength / (2.0 * std::numbers::pi);
    }
    /// A camera shift dz behind the magnifier images the plane dz/M^2 past the
    /// Fourier plane (longitudinal magnification M^2).
    double ft_plane_displacement(double dz_camera) const {
        return dz_camera / (magnification * magnification);
    }

    bool operator==(const UnitMap &) const = default;
};

class Grid {
public:
    Grid(std::size_t n, double dx, double x0, std::optional<UnitMap> units = std::nullopt)
        : n_(n), dx_(dx), x0_(x0), units_(units) {
        if (n < 2) {
            throw ConfigError("grid.n must be at least 2 (got " + std::to_string(n) + ")");
        }
        if (!(dx > 0.0)) {
            throw ConfigError("grid.dx must be positive");
        }
        if (units_) {
            if (!(units_->wavelength > 0.0) || !(units_->f_ft > 0.0) ||
                !(units_->magnification > 0.0)) {
                throw ConfigError("unit map constants must be positive");
            }
        }
    }

    std::size_t n() const noexcept { return n_; }
    double dx() const noexcept { return dx_; }
    double x0() const noexcept { return x0_; }
    double dp() const noexcept { return 2.0 * std::numbers::pi / (static_cast<double>(n_) * dx_); }
    std::size_t center() const noexcept { return n_ / 2; }

    double x(std::size_t m) const { return offset(m) * dx_ + x0_; }
    double p(std::size_t k) const { return offset(k) * dp(); }
    /// Position relative to the optical axis (the lattice centre).
    double axial_x(std::size_t m) const { return offset(m) * dx_; }

    /// Index of the lattice site closest to coordinate x (clamped to range).
    std::size_t nearest_site(double xc) const {
        const double f = (xc - x0_) / dx_ + static_cast<double>(center());
        if (f <= 0.0) return 0;
        const auto m = static_cast<std::size_t>(std::llround(f));
        return m >= n_ ? n_ - 1 : m;
    }
    std::size_t momentum_index(double pc) const {
        const double f = pc / dp() + static_cast<double>(center());
        if (f <= 0.0) return 0;
        const auto k = static_cast<std::size_t>(std::llround(f));
        return k >= n_ ? n_ - 1 : k;
    }

    double x_min() const { return x(0); }
    double x_max() const { return x(n_ - 1); }

    const std::optional<UnitMap> &unit_map() const noexcept { return units_; }
    const UnitMap &require_units(const char *who) const {
        if (!units_) {
            throw ConfigError(std::string(who) + " requires a unit map (units.* in the config)");
        }
        return *units_;
    }

    void check_index(std::size_t i, const char *what) const {
        if (i >= n_) {
            throw ContractViolation(std::string(what) + " index " + std::to_string(i) +
                                    " out of range for n = " + std::to_string(n_));
        }
    }

    bool operator==(const Grid &) const = default;

private:
    double offset(std::size_t i) const {
        return static_cast<double>(static_cast<long long>(i) - static_cast<long long>(center()));
    }

    std::size_t n_;
    double dx_;
    double x0_;
    std::optional<UnitMap> units_;
};

inline Grid make_grid(std::size_t n, double dx, double x0,
                      std::optional<UnitMap> units = std::nullopt) {
    return Grid(n, dx, x0, units);
}

inline void require_same_grid(const Grid &a, const Grid &b, const char *who) {
    if (a.n() != b.n() || a.dx() != b.dx() || a.x0() != b.x0()) {
        throw ContractViolation(std::string(who) + ": grid mismatch");
    }
}

namespace detail {

// x_m p_k split as 2 pi ((m-c)(k-c) mod n)/n + x0 p_k so the integer part of
// the phase is reduced exactly before it reaches floating point.
inline double overlap_phase(const Grid &g, std::size_t m, std::size_t k) {
    const auto n = static_cast<long long>(g.n());
    const auto c = static_cast<long long>(g.center());
    long long r = ((static_cast<long long>(m) - c) * (static_cast<long long>(k) - c)) % n;
    if (r < 0) r += n;
    // The x0 term is common to a column; reducing it first keeps the exact
    // fraction from being rounded away when |x0 p| is large.
    return 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n) +
           std::fmod(g.x0() * g.p(k), 2.0 * std::numbers::pi);
}

} // namespace detail

/// <x_m|p_k>.
inline cplx overlap(const Grid &g, std::size_t m, std::size_t k) {
    g.check_index(m, "position");
    g.check_index(k, "momentum");
    return std::polar(1.0 / std::sqrt(static_cast<double>(g.n())), detail::overlap_phase(g, m, k));
}

/// Full n x n matrix U[m,k] = <x_m|p_k>. Columns are momentum eigenvectors in
/// the position basis.
inline CMatrix overlap_matrix(const Grid &g) {
    const std::size_t n = g.n();
    const double amp = 1.0 / std::sqrt(static_cast<double>(n));
    CMatrix u(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t m = 0; m < n; ++m) {
            u(m, k) = std::polar(amp, detail::overlap_phase(g, m, k));
        }
    }
    return u;
}

inline void check_length(const Grid &g, const CVector &v, const char *who) {
    if (static_cast<std::size_t>(v.size()) != g.n()) {
        throw ContractViolation(std::string(who) + ": vector length " + std::to_string(v.size()) +
                                " does not match grid n = " + std::to_string(g.n()));
    }
}

/// Position amplitudes to momentum amplitudes: v~[k] = sum_m conj(<x_m|p_k>) v[m].
inline CVector to_momentum(const Grid &g, const CVector &v) {
    check_length(g, v, "to_momentum");
    return overlap_matrix(g).adjoint() * v;
}

inline CVector from_momentum(const Grid &g, const CVector &vt) {
    check_length(g, vt, "from_momentum");
    return overlap_matrix(g) * vt;
}

} // namespace lattice
} // namespace diracqp
