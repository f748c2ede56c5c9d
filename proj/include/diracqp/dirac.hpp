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

// Dirac (standard-ordered Kirkwood) quasi-probability on the lattice:
//
//   d[m,k] = <p_k|x_m> <x_m|rho|p_k> = Tr[pi_p pi_x rho]
//
// Sums over phase space pick up a factor n wherever the continuum carries
// 2 pi, since |<x|p>|^2 = 1/n on the lattice.

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lattice.hpp"
#include "qstate.hpp"

namespace diracqp::dirac {

using lattice::Grid;
using qstate::DensityMatrix;

struct DiracDistribution {
    Grid grid;
    CMatrix d; // d(m, k) over (x_m, p_k)

    cplx operator()(std::size_t m, std::size_t k) const {
        return d(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
    }
    std::size_t n() const noexcept { return grid.n(); }
};

/// Lattice analogue of the continuum 2 pi in the phase-space overlap formulas.
inline double phase_space_weight(const Grid &g) { return static_cast<double>(g.n()); }

/// Dirac distribution of an arbitrary operator A (no trace or positivity
/// requirement): d_A[m,k] = <p_k|x_m><x_m|A|p_k>.
inline DiracDistribution dirac_of_operator(const Grid &g, const CMatrix &op) {
    const auto n = static_cast<Eigen::Index>(g.n());
    if (op.rows() != n || op.cols() != n) {
        throw ContractViolation("dirac_of_operator: operator shape does not match grid");
    }
    const CMatrix u = lattice::overlap_matrix(g);
    const CMatrix y = op * u; // <x_m|A|p_k>
    return DiracDistribution{g, u.conjugate().cwiseProduct(y)};
}

inline DiracDistribution dirac_distribution(const DensityMatrix &rho) {
    return dirac_of_operator(rho.grid(), rho.matrix());
}

/// Anti-standard ordered counterpart Tr[pi_x pi_p rho].
inline DiracDistribution anti_standard(const DiracDistribution &D) {
    return DiracDistribution{D.grid, D.d.conjugate()};
}

inline cplx normalization(const DiracDistribution &D) { return D.d.sum(); }

inline constexpr double kMarginalTolerance = 1e-10;
inline constexpr double kConditionEpsilon = 1e-8;

namespace detail {

inline RVector strip_imaginary(const CVector &sums, const char *what) {
    RVector out(sums.size());
    for (Eigen::Index i = 0; i < sums.size(); ++i) {
        if (std::abs(sums(i).imag()) > kMarginalTolerance) {
            throw NumericalIntegrityError(std::string(what) + " has imaginary residual " +
                                          std::to_string(sums(i).imag()) + " at index " +
                                          std::to_string(i));
        }
        if (sums(i).real() < -kMarginalTolerance) {
            throw NumericalIntegrityError(std::string(what) + " is negative (" +
                                          std::to_string(sums(i).real()) + ") at index " +
                                          std::to_string(i));
        }
        out(i) = sums(i).real();
    }
    return out;
}

} // namespace detail

/// Prob(x_m) = sum_k d[m,k].
inline RVector marginal_x(const DiracDistribution &D) {
    return detail::strip_imaginary(D.d.rowwise().sum(), "x marginal");
}

/// Prob(p_k) = sum_m d[m,k].
inline RVector marginal_p(const DiracDistribution &D) {
    return detail::strip_imaginary(D.d.colwise().sum().transpose(), "p marginal");
}

/// P(x|p_k) = d[., k] / Prob(p_k). For a pure state and p = 0 this is the
/// wavefunction up to a global factor.
inline CVector conditional_x_given_p(const DiracDistribution &D, std::size_t k,
                                     double eps = kConditionEpsilon) {
    D.grid.check_index(k, "momentum");
    const RVector pm = marginal_p(D);
    const double prob = pm(static_cast<Eigen::Index>(k));
    if (!(prob > eps)) {
        throw NullConditioningError("cannot condition on p index " + std::to_string(k) +
                                    ": Prob(p) = " + std::to_string(prob));
    }
    return D.d.col(static_cast<Eigen::Index>(k)) / prob;
}

/// rho(x, x') from the distribution: divide out <p|x> to recover <x|rho|p>,
/// then transform back over p. Overlaps never vanish on the lattice.
inline DensityMatrix reconstruct_density(const DiracDistribution &D) {
    const CMatrix u = lattice::overlap_matrix(D.grid);
    const double n = static_cast<double>(D.grid.n());
    // 1 / conj(u) = n u because |u|^2 = 1/n.
    const CMatrix x_rho_p = n * D.d.cwiseProduct(u);
    return DensityMatrix::unvalidated(D.grid, x_rho_p * u.adjoint());
}

/// <A> = n sum d_rho conj(d_A) = Tr[A rho].
inline cplx expectation_overlap(const DiracDistribution &d_rho, const DiracDistribution &d_a) {
    lattice::require_same_grid(d_rho.grid, d_a.grid, "expectation_overlap");
    return phase_space_weight(d_rho.grid) * d_rho.d.cwiseProduct(d_a.d.conjugate()).sum();
}

/// Tr rho^2 = n sum |d|^2.
inline double purity(const DiracDistribution &D) {
    return phase_space_weight(D.grid) * D.d.cwiseAbs2().sum();
}

struct DistributionReport {
    cplx normalization;
    double max_marginal_imag = 0.0;
    double min_marginal = 0.0;

    bool ok(double tol = 1e-10) const {
        return std::abs(normalization - cplx(1.0, 0.0)) <= tol && max_marginal_imag <= tol &&
               min_marginal >= -tol;
    }
};

inline DistributionReport check_invariants(const DiracDistribution &D) {
    DistributionReport r;
    r.normalization = normalization(D);
    const CVector rows = D.d.rowwise().sum();
    const CVector cols = D.d.colwise().sum().transpose();
    r.max_marginal_imag =
        std::max(rows.imag().cwiseAbs().maxCoeff(), cols.imag().cwiseAbs().maxCoeff());
    r.min_marginal = std::min(rows.real().minCoeff(), cols.real().minCoeff());
    return r;
}

} // namespace diracqp::dirac
