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

// Bayesian transport of the Dirac distribution to a displaced camera plane.
//
// The camera moved dz past the Fourier plane measures K' instead of P. With
// |k'_j> the displaced-plane position eigenstates pulled back to the sliver
// plane, the state-independent conditional
//
//   P(k'|x,p) = <p|k'><k'|x> / <p|x>
//
// turns the measured d[x,p] into e[x,k'] = sum_p P(k'|x,p) d[x,p], which is
// exactly Tr[pi_k' pi_x rho] when |k'> comes from a unitary.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dirac.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "qstate.hpp"
#include "weaksim.hpp"

namespace diracqp::bayesprop {

using dirac::DiracDistribution;
using lattice::Grid;
using qstate::DensityMatrix;

enum class KernelKind { AnalyticFresnel, DiscreteUnitary };

inline std::string_view kind_name(KernelKind k) {
    return k == KernelKind::AnalyticFresnel ? "analytic-fresnel" : "discrete-unitary";
}

inline std::optional<KernelKind> parse_kind(std::string_view s) {
    if (s == "analytic-fresnel" || s == "analytic") return KernelKind::AnalyticFresnel;
    if (s == "discrete-unitary" || s == "unitary") return KernelKind::DiscreteUnitary;
    return std::nullopt;
}

/// Paraxial free-space propagation by a camera displacement dz, as an
/// operator on sliver-plane amplitudes: the camera then reads <p_j|V|psi>.
/// The Fourier plane's own spatial frequency is conjugate to sliver x, so the
/// Fresnel transfer function is diagonal here:
///   V = diag exp(-i pi dz' (x - x0)^2 / (lambda f^2)),  dz' = dz / M^2.
inline CMatrix fresnel_unitary(const Grid &g, double dz) {
    if (!(dz >= 0.0) || !std::isfinite(dz)) {
        throw ConfigError("propagation distance must be finite and non-negative");
    }
    const auto &u = g.require_units("fresnel_unitary");
    const double dz_ft = u.ft_plane_displacement(dz);
    const auto n = static_cast<Eigen::Index>(g.n());
    CMatrix v = CMatrix::Zero(n, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        const double x = g.axial_x(static_cast<std::size_t>(m));
        v(m, m) = std::polar(1.0, -std::numbers::pi * dz_ft * x * x / (u.wavelength * u.f_ft * u.f_ft));
    }
    return v;
}

/// Camera displacement at which the Fresnel chirp sampled on the lattice is
/// exactly periodic: dz' = lambda f^2 / (n dx^2) in the Fourier plane.
inline double critical_displacement(const Grid &g) {
    const auto &u = g.require_units("critical_displacement");
    const double dz_ft = u.wavelength * u.f_ft * u.f_ft /
                         (static_cast<double>(g.n()) * g.dx() * g.dx());
    return dz_ft * u.magnification * u.magnification;
}

struct PropagatorKernel {
    Grid grid;
    double dz = 0.0;
    KernelKind kind = KernelKind::DiscreteUnitary;
    CMatrix k_basis;        // columns |k'_j> in the x basis; empty for analytic kernels
    std::vector<cplx> cond; // cond[(j * n + m) * n + kp] = P(k'_j | x_m, p_kp)

    std::size_t n() const noexcept { return grid.n(); }
    std::size_t index(std::size_t kprime, std::size_t m, std::size_t kp) const noexcept {
        return (kprime * grid.n() + m) * grid.n() + kp;
    }
    cplx operator()(std::size_t kprime, std::size_t m, std::size_t kp) const {
        return cond[index(kprime, m, kp)];
    }
};

struct PropagatedDistribution {
    Grid grid;
    double dz = 0.0;
    KernelKind kind = KernelKind::DiscreteUnitary;
    CMatrix e; // e(m, j) over (weak x_m, displaced-plane k'_j)
};

inline void check_unitary(const CMatrix &v, std::size_t n, double tol, const char *who) {
    const auto nn = static_cast<Eigen::Index>(n);
    if (v.rows() != nn || v.cols() != nn) {
        throw ContractViolation(std::string(who) + ": unitary shape does not match grid");
    }
    const double err = (v.adjoint() * v - CMatrix::Identity(nn, nn)).cwiseAbs().maxCoeff();
    if (err > tol) {
        throw ContractViolation(std::string(who) + ": matrix is not unitary (error " +
                                std::to_string(err) + ")");
    }
}

/// Kernel from an exact unitary V acting before the momentum-plane camera:
/// |k'_j> = V^dagger |p_j>.
inline PropagatorKernel build_kernel_unitary(const Grid &g, const CMatrix &v, double dz = 0.0) {
    check_unitary(v, g.n(), 1e-10, "build_kernel_unitary");
    const std::size_t n = g.n();
    const CMatrix u = lattice::overlap_matrix(g);
    if (u.cwiseAbs().minCoeff() <= 0.0) {
        throw DegenerateKernelError("vanishing <p|x> overlap");
    }
    PropagatorKernel ker{g, dz, KernelKind::DiscreteUnitary, v.adjoint() * u, {}};
    const CMatrix p_k = u.adjoint() * ker.k_basis; // <p_kp|k'_j>
    const double nd = static_cast<double>(n);
    ker.cond.resize(n * n * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t m = 0; m < n; ++m) {
            const auto mi = static_cast<Eigen::Index>(m);
            const cplx k_x = std::conj(ker.k_basis(mi, static_cast<Eigen::Index>(j)));
            cplx *row = &ker.cond[ker.index(j, m, 0)];
            for (std::size_t kp = 0; kp < n; ++kp) {
                // 1 / <p|x> = n <x|p>
                row[kp] = p_k(static_cast<Eigen::Index>(kp), static_cast<Eigen::Index>(j)) * k_x *
                          nd * u(mi, static_cast<Eigen::Index>(kp));
            }
        }
    }
    return ker;
}

/// Literal closed-form conditional (without the normalisation R):
///   exp[2 pi i (r / lambda + (x k' - x_FT x)/(f lambda) + alpha)] / r,
///   r = sqrt(dz^2 + (x_FT - k')^2),  alpha = x dz / (lambda sqrt(x^2 + f^2)).
/// x is the sliver position from the axis; x_FT and k' are Fourier-plane
/// coordinates of p and of the camera pixel.
inline cplx fresnel_conditional_formula(double x, double x_ft, double kprime, double dz,
                                        double wavelength, double f_ft) {
    const double r = std::sqrt(dz * dz + (x_ft - kprime) * (x_ft - kprime));
    const double alpha = x * dz / (wavelength * std::sqrt(x * x + f_ft * f_ft));
    const double cycles = r / wavelength + (x * kprime - x_ft * x) / (f_ft * wavelength) + alpha;
    // Reduce whole cycles before scaling by 2 pi; r / lambda is ~1e5.
    const double frac = cycles - std::floor(cycles);
    return std::polar(1.0 / r, 2.0 * std::numbers::pi * frac);
}

namespace detail {

// The conjugated closed form splits as spherical(kp, j) * plane(m, j) *
// conj(plane(m, kp)) * exp(-2 pi i alpha(x_m)). The last two factors do not
// depend on k', so normalising over k' removes them:
//   P(k'_j | x_m, p_kp) = spherical(kp, j) plane(m, j) / S(m, kp),
//   S = plane * spherical^T.
struct AnalyticFactors {
    CMatrix spherical; // [kp, j]
    CMatrix plane;     // [m, j] = exp(-2 pi i x_m k'_j / (f lambda))
    CMatrix norm;      // S[m, kp]
};

inline AnalyticFactors analytic_factors(const Grid &g, double dz) {
    if (dz == 0.0) {
        throw DegenerateKernelError(
            "closed-form kernel is singular at dz = 0; use build_kernel_unitary(fresnel_unitary(grid, 0))");
    }
    if (!(dz > 0.0) || !std::isfinite(dz)) {
        throw ConfigError("propagation distance must be finite and non-negative");
    }
    const auto &u = g.require_units("build_kernel_analytic");
    const std::size_t n = g.n();
    const auto nn = static_cast<Eigen::Index>(n);
    const double dz_ft = u.ft_plane_displacement(dz);
    const double lam = u.wavelength;
    const double f = u.f_ft;

    std::vector<double> ft(n);
    for (std::size_t k = 0; k < n; ++k) ft[k] = u.ft_plane_coordinate(g.p(k));

    AnalyticFactors a{CMatrix(nn, nn), CMatrix(nn, nn), CMatrix()};
    for (std::size_t kp = 0; kp < n; ++kp) {
        for (std::size_t j = 0; j < n; ++j) {
            a.spherical(static_cast<Eigen::Index>(kp), static_cast<Eigen::Index>(j)) =
                std::conj(fresnel_conditional_formula(0.0, ft[kp], ft[j], dz_ft, lam, f));
        }
    }
    for (std::size_t m = 0; m < n; ++m) {
        const double x = g.axial_x(m);
        for (std::size_t j = 0; j < n; ++j) {
            const double cyc = x * ft[j] / (f * lam);
            a.plane(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
                std::polar(1.0, -2.0 * std::numbers::pi * (cyc - std::floor(cyc)));
        }
    }
    a.norm = a.plane * a.spherical.transpose();
    for (Eigen::Index m = 0; m < nn; ++m) {
        for (Eigen::Index kp = 0; kp < nn; ++kp) {
            if (!(std::abs(a.norm(m, kp)) > 1e-300)) {
                throw DegenerateKernelError("closed-form kernel normalisation vanishes at m = " +
                                            std::to_string(m) + ", kp = " + std::to_string(kp));
            }
        }
    }
    return a;
}

} // namespace detail

/// Kernel from the closed-form paraxial conditional. The textbook form
/// uses the opposite Fourier sign to <x|p> = exp(ixp)/sqrt(n), so it enters
/// conjugated; R is fixed per (x, p) by sum_k' P(k'|x,p) = 1.
inline PropagatorKernel build_kernel_analytic(const Grid &g, double dz) {
    const auto a = detail::analytic_factors(g, dz);
    const std::size_t n = g.n();
    PropagatorKernel ker{g, dz, KernelKind::AnalyticFresnel, CMatrix(), {}};
    ker.cond.resize(n * n * n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto J = static_cast<Eigen::Index>(j);
        for (std::size_t m = 0; m < n; ++m) {
            const auto M = static_cast<Eigen::Index>(m);
            cplx *row = &ker.cond[ker.index(j, m, 0)];
            for (std::size_t kp = 0; kp < n; ++kp) {
                const auto K = static_cast<Eigen::Index>(kp);
                row[kp] = a.spherical(K, J) * a.plane(M, J) / a.norm(M, K);
            }
        }
    }
    return ker;
}

/// e[m, k'] = sum_p P(k'|x_m, p) d[m, p]: only the momentum variable is
/// updated, the weak x stays.
inline PropagatedDistribution bayes_propagate(const DiracDistribution &D, const PropagatorKernel &K) {
    lattice::require_same_grid(D.grid, K.grid, "bayes_propagate");
    const std::size_t n = D.grid.n();
    const auto nn = static_cast<Eigen::Index>(n);
    PropagatedDistribution out{D.grid, K.dz, K.kind, CMatrix::Zero(nn, nn)};
    std::vector<cplx> drow(n);
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t kp = 0; kp < n; ++kp) {
            drow[kp] = D.d(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(kp));
        }
        for (std::size_t j = 0; j < n; ++j) {
            const cplx *c = &K.cond[K.index(j, m, 0)];
            cplx acc = 0.0;
            for (std::size_t kp = 0; kp < n; ++kp) acc += c[kp] * drow[kp];
            out.e(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = acc;
        }
    }
    return out;
}

/// bayes_propagate with the unitary kernel of V, without storing the n^3
/// kernel: e = conj(K) o ((n U o d) (U^dagger K)), K = V^dagger U.
inline PropagatedDistribution bayes_propagate_unitary(const DiracDistribution &D, const CMatrix &v,
                                                      double dz = 0.0) {
    check_unitary(v, D.grid.n(), 1e-10, "bayes_propagate_unitary");
    const CMatrix u = lattice::overlap_matrix(D.grid);
    const CMatrix kb = v.adjoint() * u;
    const double nd = static_cast<double>(D.grid.n());
    CMatrix e = ((nd * D.d.cwiseProduct(u)) * (u.adjoint() * kb)).cwiseProduct(kb.conjugate());
    return PropagatedDistribution{D.grid, dz, KernelKind::DiscreteUnitary, std::move(e)};
}

/// bayes_propagate with the closed-form kernel, without storing it.
inline PropagatedDistribution bayes_propagate_analytic(const DiracDistribution &D, double dz) {
    const auto a = detail::analytic_factors(D.grid, dz);
    CMatrix e = (D.d.cwiseQuotient(a.norm) * a.spherical).cwiseProduct(a.plane);
    return PropagatedDistribution{D.grid, dz, KernelKind::AnalyticFresnel, std::move(e)};
}

/// Propagation to a camera displaced by dz with either kernel. dz = 0 always
/// uses the (identity) unitary kernel since the closed form is singular there.
inline PropagatedDistribution propagate(const DiracDistribution &D, double dz, KernelKind kind) {
    if (kind == KernelKind::AnalyticFresnel && dz != 0.0) {
        return bayes_propagate_analytic(D, dz);
    }
    return bayes_propagate_unitary(D, fresnel_unitary(D.grid, dz), dz);
}

/// Four-variable distribution Tr[pi_p pi_k' pi_q' pi_x rho] with
/// |q'_i> = V1^dagger |x_i> and |k'_j> = V2^dagger |p_j>.
class FourVariableJoint {
public:
    FourVariableJoint(const DensityMatrix &rho, const CMatrix &v1, const CMatrix &v2)
        : grid_(rho.grid()) {
        check_unitary(v1, grid_.n(), 1e-10, "joint4 (V1)");
        check_unitary(v2, grid_.n(), 1e-10, "joint4 (V2)");
        const CMatrix u = lattice::overlap_matrix(grid_);
        const CMatrix kb = v2.adjoint() * u;
        const CMatrix qb = v1.adjoint();
        p_k_ = u.adjoint() * kb;
        k_q_ = kb.adjoint() * qb;
        q_x_ = qb.adjoint();
        x_rho_p_ = rho.matrix() * u;
    }

    cplx operator()(std::size_t x, std::size_t q, std::size_t k, std::size_t p) const {
        for (std::size_t i : {x, q, k, p}) grid_.check_index(i, "joint4");
        const auto X = static_cast<Eigen::Index>(x), Q = static_cast<Eigen::Index>(q),
                   K = static_cast<Eigen::Index>(k), P = static_cast<Eigen::Index>(p);
        return p_k_(P, K) * k_q_(K, Q) * q_x_(Q, X) * x_rho_p_(X, P);
    }

    /// sum over x and p: the (q', k') Dirac distribution, matrix indexed [q', k'].
    CMatrix sum_over_x_p() const {
        const CMatrix qp = q_x_ * x_rho_p_; // [q, p]
        const CMatrix qk = qp * p_k_;       // [q, k]
        return qk.cwiseProduct(k_q_.transpose());
    }

private:
    Grid grid_;
    CMatrix p_k_, k_q_, q_x_, x_rho_p_;
};

inline cplx joint4(const DensityMatrix &rho, std::size_t x, std::size_t q, std::size_t k,
                   std::size_t p, const CMatrix &v1, const CMatrix &v2) {
    return FourVariableJoint(rho, v1, v2)(x, q, k, p);
}

/// Weak-strong measurement with the camera behind an arbitrary unitary V.
inline PropagatedDistribution direct_measure_with_unitary(const DensityMatrix &rho, const CMatrix &v,
                                                          double phi, double photon_budget,
                                                          const weaksim::ScanOptions &opts,
                                                          double dz = 0.0) {
    check_unitary(v, rho.n(), 1e-10, "direct_measure");
    const CMatrix basis = v.adjoint() * lattice::overlap_matrix(rho.grid());
    auto res = weaksim::scan_in_basis(rho, basis, phi, photon_budget, opts);
    return PropagatedDistribution{rho.grid(), dz, KernelKind::DiscreteUnitary, std::move(res.measured)};
}

/// Weak-strong measurement of (X, K') with the camera displaced by dz.
inline PropagatedDistribution direct_measure_displaced(const DensityMatrix &rho,
                                                       const qstate::BenchConfig &cfg, double dz,
                                                       const weaksim::ScanOptions &opts = {}) {
    return direct_measure_with_unitary(rho, fresnel_unitary(rho.grid(), dz), cfg.phi,
                                       cfg.photon_budget, opts, dz);
}

} // namespace diracqp::bayesprop
