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

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lattice.hpp"

namespace diracqp::qstate {

using lattice::Grid;

/// Position-basis amplitudes Psi(x_m), normalised.
struct PureState {
    Grid grid;
    CVector amp;
};

/// Tolerances for the density-matrix invariants.
struct DensityTolerance {
    double hermitian = 1e-10;
    double trace = 1e-10;
    double eigenvalue = 1e-9;
};

struct InvariantReport {
    double hermiticity_error = 0.0; // max |rho - rho^dagger|
    double trace_error = 0.0;       // |Tr rho - 1|
    double min_eigenvalue = 0.0;

    bool ok(const DensityTolerance &tol = {}) const {
        return hermiticity_error <= tol.hermitian && trace_error <= tol.trace &&
               min_eigenvalue >= -tol.eigenvalue;
    }
};

inline InvariantReport check_invariants(const CMatrix &rho) {
    InvariantReport r;
    r.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    r.trace_error = std::abs(rho.trace() - cplx(1.0, 0.0));
    const CMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    return r;
}

/// N x N position-basis density operator rho(x_m, x_m').
///
/// make() enforces Hermiticity, unit trace and positivity. Reconstructions
/// from measured data are generally not physical, so unvalidated() exists
/// for those; callers can still inspect them with check_invariants().
class DensityMatrix {
public:
    static DensityMatrix make(Grid grid, CMatrix rho, const DensityTolerance &tol = {}) {
        check_shape(grid, rho);
        const InvariantReport r = check_invariants(rho);
        if (!r.ok(tol)) {
            throw NumericalIntegrityError(
                "density matrix invariants violated: hermiticity " +
                std::to_string(r.hermiticity_error) + ", trace error " +
                std::to_string(r.trace_error) + ", min eigenvalue " +
                std::to_string(r.min_eigenvalue));
        }
        return DensityMatrix(std::move(grid), std::move(rho));
    }

    static DensityMatrix unvalidated(Grid grid, CMatrix rho) {
        check_shape(grid, rho);
        return DensityMatrix(std::move(grid), std::move(rho));
    }

    const Grid &grid() const noexcept { return grid_; }
    const CMatrix &matrix() const noexcept { return rho_; }
    std::size_t n() const noexcept { return grid_.n(); }
    cplx operator()(std::size_t m, std::size_t mp) const {
        return rho_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(mp));
    }

    cplx trace() const { return rho_.trace(); }
    /// Tr rho^2 computed directly from the matrix.
    double purity() const { return (rho_ * rho_).trace().real(); }
    RVector diagonal() const { return rho_.diagonal().real(); }

private:
    DensityMatrix(Grid grid, CMatrix rho) : grid_(std::move(grid)), rho_(std::move(rho)) {}

    static void check_shape(const Grid &grid, const CMatrix &rho) {
        const auto n = static_cast<Eigen::Index>(grid.n());
        if (rho.rows() != n || rho.cols() != n) {
            throw ContractViolation("density matrix shape does not match grid n = " +
                                    std::to_string(grid.n()));
        }
    }

    Grid grid_;
    CMatrix rho_;
};

inline PureState pure_from_samples(const Grid &grid, const CVector &raw) {
    lattice::check_length(grid, raw, "pure_from_samples");
    const double norm = raw.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw DegenerateInputError("cannot normalise a zero (or non-finite) amplitude vector");
    }
    return PureState{grid, raw / norm};
}

inline DensityMatrix density_from_pure(const PureState &psi) {
    return DensityMatrix::unvalidated(psi.grid, psi.amp * psi.amp.adjoint());
}

/// Convex combination sum_j w_j rho_j.
inline DensityMatrix mix(const std::vector<std::pair<DensityMatrix, double>> &states) {
    if (states.empty()) {
        throw ConfigError("mix: empty state list");
    }
    const Grid &grid = states.front().first.grid();
    double total = 0.0;
    CMatrix acc = CMatrix::Zero(static_cast<Eigen::Index>(grid.n()),
                                static_cast<Eigen::Index>(grid.n()));
    for (const auto &[rho, w] : states) {
        lattice::require_same_grid(grid, rho.grid(), "mix");
        if (!(w >= 0.0)) {
            throw ConfigError("mix: weights must be non-negative");
        }
        total += w;
        acc += w * rho.matrix();
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("mix: weights sum to " + std::to_string(total) + ", expected 1");
    }
    return DensityMatrix::unvalidated(grid, std::move(acc));
}

// ---------------------------------------------------------------------------
// Optical bench scenarios

struct BenchConfig {
    double aperture_halfwidth = 22e-3; // centred on the optical axis (grid x0)
    double edge_position = 25e-3;      // glass plate edge
    double static_phase_step = std::numbers::pi;
    double wedge_tilt = 0.4 / 3600.0 * std::numbers::pi / 180.0; // 0.4 arcsec
    double edge_loss = 0.3;
    bool mixed = false;
    double phi = 12.92 * std::numbers::pi / 180.0;
    double photon_budget = 1e8;
};

inline void validate(const BenchConfig &cfg, const Grid &grid) {
    if (!(cfg.aperture_halfwidth > 0.0)) {
        throw ConfigError("bench.aperture_halfwidth must be positive");
    }
    const double slack = 0.5 * grid.dx();
    const double lo = grid.x0() - cfg.aperture_halfwidth;
    const double hi = grid.x0() + cfg.aperture_halfwidth;
    if (lo < grid.x_min() - slack || hi > grid.x_max() + slack) {
        throw ConfigError("bench.aperture_halfwidth: aperture extends beyond the grid");
    }
    if (!(cfg.edge_position > lo && cfg.edge_position < hi)) {
        throw ConfigError("bench.edge_position: glass edge lies outside the aperture");
    }
    if (!(cfg.edge_loss >= 0.0 && cfg.edge_loss <= 1.0)) {
        throw ConfigError("bench.edge_loss must lie in [0, 1]");
    }
    if (!(cfg.phi > 0.0 && cfg.phi < std::numbers::pi / 2)) {
        throw ConfigError("bench.phi_deg must lie strictly between 0 and 90 degrees");
    }
    if (!(cfg.photon_budget >= 0.0) || !std::isfinite(cfg.photon_budget)) {
        throw ConfigError("bench.photon_budget must be a finite non-negative number");
    }
    if (!std::isfinite(cfg.static_phase_step) || !std::isfinite(cfg.wedge_tilt)) {
        throw ConfigError("bench phase parameters must be finite");
    }
    if (cfg.wedge_tilt != 0.0) {
        grid.require_units("bench.wedge_tilt");
    }
}

/// Sites strictly past the glass edge (the half covered by the plate).
inline std::vector<bool> plate_side(const BenchConfig &cfg, const Grid &grid) {
    std::vector<bool> right(grid.n());
    const double eps = 1e-9 * grid.dx();
    for (std::size_t m = 0; m < grid.n(); ++m) {
        right[m] = grid.x(m) > cfg.edge_position + eps;
    }
    return right;
}

/// Pure bench amplitude: top-hat aperture, scattering dip at the edge site,
/// static phase step plus wedge tilt on the plate side.
inline PureState bench_amplitude(const BenchConfig &cfg, const Grid &grid) {
    validate(cfg, grid);
    const std::size_t n = grid.n();
    const auto right = plate_side(cfg, grid);
    const double k0 =
        cfg.wedge_tilt != 0.0 ? 2.0 * std::numbers::pi / grid.unit_map()->wavelength : 0.0;
    const double tol = 1e-9 * grid.dx();
    CVector amp = CVector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m) {
        if (std::abs(grid.axial_x(m)) > cfg.aperture_halfwidth + tol) continue;
        cplx a = 1.0;
        if (right[m]) {
            a = std::polar(1.0, cfg.static_phase_step +
                                    k0 * cfg.wedge_tilt * (grid.x(m) - cfg.edge_position));
        }
        amp(static_cast<Eigen::Index>(m)) = a;
    }
    amp(static_cast<Eigen::Index>(grid.nearest_site(cfg.edge_position))) *= (1.0 - cfg.edge_loss);
    return pure_from_samples(grid, amp);
}

/// Bench state. With mixed = true the oscillating plate destroys coherence
/// between the two halves, so every cross-edge coherence is zeroed.
inline DensityMatrix build_bench_state(const BenchConfig &cfg, const Grid &grid) {
    const PureState psi = bench_amplitude(cfg, grid);
    CMatrix rho = psi.amp * psi.amp.adjoint();
    if (cfg.mixed) {
        const auto right = plate_side(cfg, grid);
        for (std::size_t a = 0; a < grid.n(); ++a) {
            for (std::size_t b = 0; b < grid.n(); ++b) {
                if (right[a] != right[b]) {
                    rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 0.0;
                }
            }
        }
    }
    return DensityMatrix::make(grid, std::move(rho));
}

/// Time-averaged version of the oscillating plate: incoherent average over
/// K plate phases theta_j = 2 pi j / K applied to the plate side.
inline DensityMatrix build_bench_state_ensemble(const BenchConfig &cfg, const Grid &grid,
                                                std::size_t samples = 64) {
    if (samples == 0) {
        throw ConfigError("plate phase ensemble needs at least one sample");
    }
    const PureState psi = bench_amplitude(cfg, grid);
    if (!cfg.mixed) {
        return density_from_pure(psi);
    }
    const auto right = plate_side(cfg, grid);
    const auto n = static_cast<Eigen::Index>(grid.n());
    CMatrix acc = CMatrix::Zero(n, n);
    for (std::size_t j = 0; j < samples; ++j) {
        const cplx shift = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(j) /
                                               static_cast<double>(samples));
        CVector v = psi.amp;
        for (Eigen::Index m = 0; m < n; ++m) {
            if (right[static_cast<std::size_t>(m)]) v(m) *= shift;
        }
        acc += v * v.adjoint();
    }
    acc /= static_cast<double>(samples);
    return DensityMatrix::make(grid, std::move(acc));
}

} // namespace diracqp::qstate
