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

// Simulation of the weak-strong measurement: a birefringent sliver rotates
// the polarisation of photons at x by phi, the camera in the Fourier plane
// resolves momentum, and four polarisation projections (D/A, L/R) are
// recorded. Everything is exact in phi; "weak" is only ever a limit.
//
// Joint space ordering is position (x) polarisation: index 2 m + s with
// s = 0 for H and s = 1 for V.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dirac.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "qstate.hpp"

namespace diracqp::weaksim {

using dirac::DiracDistribution;
using lattice::Grid;
using qstate::BenchConfig;
using qstate::DensityMatrix;

enum class Pol : std::size_t { D = 0, A = 1, L = 2, R = 3 };
inline constexpr std::array<Pol, 4> kPolarizations = {Pol::D, Pol::A, Pol::L, Pol::R};

inline std::string_view pol_name(Pol j) {
    switch (j) {
    case Pol::D: return "D";
    case Pol::A: return "A";
    case Pol::L: return "L";
    case Pol::R: return "R";
    }
    return "?";
}

/// Projection state in the {H, V} basis. L = (H + iV)/sqrt2.
inline std::array<cplx, 2> pol_vector(Pol j) {
    const double r = 1.0 / std::sqrt(2.0);
    switch (j) {
    case Pol::D: return {cplx(r, 0), cplx(r, 0)};
    case Pol::A: return {cplx(r, 0), cplx(-r, 0)};
    case Pol::L: return {cplx(r, 0), cplx(0, r)};
    case Pol::R: return {cplx(r, 0), cplx(0, -r)};
    }
    return {};
}

/// Contiguous run of lattice sites covered by the sliver.
struct Sliver {
    std::size_t begin = 0;
    std::size_t width = 1;

    std::size_t end() const noexcept { return begin + width; }
    bool contains(std::size_t m) const noexcept { return m >= begin && m < end(); }
    bool operator==(const Sliver &) const = default;
};

inline void check_sliver(const Grid &g, const Sliver &s) {
    if (s.width == 0) {
        throw ConfigError("sliver width must be at least one site");
    }
    if (s.end() > g.n()) {
        throw ContractViolation("sliver [" + std::to_string(s.begin) + ", " +
                                std::to_string(s.end()) + ") exceeds grid of " +
                                std::to_string(g.n()) + " sites");
    }
}

inline void check_coupling_angle(double phi) {
    if (!(phi >= 0.0 && phi <= std::numbers::pi / 2)) {
        throw ConfigError("coupling angle must lie in [0, pi/2]");
    }
}

struct JointState {
    Grid grid;
    CMatrix rho; // 2n x 2n
    Sliver sliver;
    double phi = 0.0;
};

/// rho_joint = U (rho (x) |H><H|) U^dagger with U = exp(-i phi sigma_y pi_S).
/// On sliver sites H -> cos(phi) H + sin(phi) V.
inline JointState couple(const DensityMatrix &rho, const Sliver &sliver, double phi) {
    check_sliver(rho.grid(), sliver);
    check_coupling_angle(phi);
    const auto n = static_cast<Eigen::Index>(rho.n());
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    CMatrix joint = CMatrix::Zero(2 * n, 2 * n);
    auto pointer = [&](Eigen::Index m) -> std::array<double, 2> {
        if (sliver.contains(static_cast<std::size_t>(m))) return {c, s};
        return {1.0, 0.0};
    };
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto am = pointer(m);
        for (Eigen::Index mp = 0; mp < n; ++mp) {
            const auto bm = pointer(mp);
            const cplx r = rho.matrix()(m, mp);
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    joint(2 * m + a, 2 * mp + b) = r * am[static_cast<std::size_t>(a)] *
                                                   bm[static_cast<std::size_t>(b)];
                }
            }
        }
    }
    return JointState{rho.grid(), std::move(joint), sliver, phi};
}

/// Counts N_{k,j} for one sliver position, indexed by Pol then momentum.
struct MeasurementRecord {
    Sliver sliver;
    double phi = 0.0;
    double photon_budget = 0.0;
    std::optional<std::uint64_t> seed; // empty: analytic (noise-free) intensities
    std::array<RVector, 4> counts;

    const RVector &operator[](Pol j) const { return counts[static_cast<std::size_t>(j)]; }
    RVector &operator[](Pol j) { return counts[static_cast<std::size_t>(j)]; }
    std::size_t n() const noexcept { return static_cast<std::size_t>(counts[0].size()); }
};

namespace detail {

// Counts from the 2x2 polarisation matrix M = [[hh, hv], [conj(hv), vv]].
inline void fill_counts(MeasurementRecord &rec, Eigen::Index k, double hh, double vv, cplx hv,
                        double budget) {
    const double tr = hh + vv;
    auto put = [&](Pol j, double v) { rec[j](k) = budget * std::max(0.0, v); };
    put(Pol::D, 0.5 * tr + hv.real());
    put(Pol::A, 0.5 * tr - hv.real());
    put(Pol::L, 0.5 * tr - hv.imag());
    put(Pol::R, 0.5 * tr + hv.imag());
}

inline MeasurementRecord empty_record(std::size_t n, const Sliver &s, double phi, double budget) {
    MeasurementRecord rec;
    rec.sliver = s;
    rec.phi = phi;
    rec.photon_budget = budget;
    for (auto &c : rec.counts) c = RVector::Zero(static_cast<Eigen::Index>(n));
    return rec;
}

inline void check_basis(const Grid &g, const CMatrix &basis) {
    const auto n = static_cast<Eigen::Index>(g.n());
    if (basis.rows() != n || basis.cols() != n) {
        throw ContractViolation("readout basis shape does not match grid");
    }
}

} // namespace detail

/// Analytic counts: budget * <w_k, j| rho_joint |w_k, j>, where w_k are the
/// columns of `basis` (momentum eigenvectors unless a propagated camera
/// basis is supplied).
inline MeasurementRecord readout_intensities(const JointState &js, double photon_budget,
                                             const CMatrix &basis) {
    detail::check_basis(js.grid, basis);
    const auto n = static_cast<Eigen::Index>(js.grid.n());
    // Polarisation blocks B_ab(m, m') = rho_joint(2m + a, 2m' + b).
    std::array<CMatrix, 4> blocks;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            blocks[static_cast<std::size_t>(2 * a + b)] =
                js.rho(Eigen::seqN(a, n, 2), Eigen::seqN(b, n, 2));
        }
    }
    auto project = [&](const CMatrix &blk) -> CVector {
        const CMatrix bw = blk * basis;
        return basis.conjugate().cwiseProduct(bw).colwise().sum().transpose();
    };
    const CVector hh = project(blocks[0]);
    const CVector hv = project(blocks[1]);
    const CVector vv = project(blocks[3]);
    MeasurementRecord rec =
        detail::empty_record(js.grid.n(), js.sliver, js.phi, photon_budget);
    for (Eigen::Index k = 0; k < n; ++k) {
        detail::fill_counts(rec, k, hh(k).real(), vv(k).real(), hv(k), photon_budget);
    }
    return rec;
}

inline MeasurementRecord readout_intensities(const JointState &js, double photon_budget) {
    return readout_intensities(js, photon_budget, lattice::overlap_matrix(js.grid));
}

/// Same counts as couple() followed by readout_intensities(), exploiting
/// that the coupling only touches the sliver rows: after one O(n^3)
/// product rho W, every sliver position costs O(n * width^2).
class SliverReadout {
public:
    SliverReadout(const DensityMatrix &rho, CMatrix basis)
        : grid_(rho.grid()), rho_(rho.matrix()), basis_(std::move(basis)) {
        detail::check_basis(grid_, basis_);
        rho_w_ = rho_ * basis_;
        full_ = basis_.conjugate().cwiseProduct(rho_w_).colwise().sum().transpose();
    }

    explicit SliverReadout(const DensityMatrix &rho)
        : SliverReadout(rho, lattice::overlap_matrix(rho.grid())) {}

    const CMatrix &basis() const noexcept { return basis_; }
    const Grid &grid() const noexcept { return grid_; }

    MeasurementRecord record(const Sliver &sliver, double phi, double photon_budget) const {
        check_sliver(grid_, sliver);
        check_coupling_angle(phi);
        const auto n = static_cast<Eigen::Index>(grid_.n());
        const double c = std::cos(phi);
        const double s = std::sin(phi);
        const double q = 1.0 - c;
        MeasurementRecord rec = detail::empty_record(grid_.n(), sliver, phi, photon_budget);
        const auto b = static_cast<Eigen::Index>(sliver.begin);
        const auto w = static_cast<Eigen::Index>(sliver.width);
        for (Eigen::Index k = 0; k < n; ++k) {
            cplx t1 = 0.0; // (P_S w)^dagger rho w
            cplx t2 = 0.0; // (P_S w)^dagger rho (P_S w)
            for (Eigen::Index m = b; m < b + w; ++m) {
                const cplx wm = std::conj(basis_(m, k));
                t1 += wm * rho_w_(m, k);
                for (Eigen::Index mp = b; mp < b + w; ++mp) {
                    t2 += wm * rho_(m, mp) * basis_(mp, k);
                }
            }
            const double hh = (full_(k) - 2.0 * q * t1.real() + q * q * t2).real();
            const double vv = s * s * t2.real();
            const cplx hv = s * (std::conj(t1) - q * t2.real());
            detail::fill_counts(rec, k, hh, vv, hv, photon_budget);
        }
        return rec;
    }

private:
    Grid grid_;
    CMatrix rho_;
    CMatrix basis_;
    CMatrix rho_w_;
    CVector full_;
};

/// Replace every count by an independent Poisson draw with that mean.
inline MeasurementRecord sample_counts(const MeasurementRecord &analytic, std::uint64_t seed) {
    MeasurementRecord out = analytic;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    for (Pol j : kPolarizations) {
        RVector &c = out[j];
        for (Eigen::Index k = 0; k < c.size(); ++k) {
            const double mean = analytic[j](k);
            if (!(mean > 0.0)) {
                c(k) = 0.0;
                continue;
            }
            std::poisson_distribution<long long> pd(mean);
            c(k) = static_cast<double>(pd(rng));
        }
    }
    return out;
}

/// Proportionality constants between normalised count differences and the
/// real/imaginary parts of d * sin(phi). standard() holds the values that
/// calibrate_estimator() derives against the exact trace formula.
struct EstimatorCalibration {
    double c_re = 0.5;
    double c_im = 0.5;
    int sign_circ = -1;

    static constexpr EstimatorCalibration standard() { return {0.5, 0.5, -1}; }
};

namespace detail {

inline double total_photons(const MeasurementRecord &rec) {
    return rec[Pol::D].sum() + rec[Pol::A].sum();
}

inline double checked_sin(double phi) {
    const double s = std::sin(phi);
    if (!(s > 0.0) || !(phi < std::numbers::pi)) {
        throw ConfigError("estimator needs a positive coupling angle");
    }
    return s;
}

} // namespace detail

/// Dirac column at the sliver from the four polarisation records:
///   est[k] = [c_re (N_D - N_A) - i sign c_im (N_L - N_R)] / (T sin phi)
/// with T the total D+A count over all momenta, so the estimate targets the
/// joint distribution (not the per-momentum conditional).
inline CVector estimate_dirac_column(const MeasurementRecord &rec,
                                     const EstimatorCalibration &cal = EstimatorCalibration::standard()) {
    const double s = detail::checked_sin(rec.phi);
    const double total = detail::total_photons(rec);
    if (!(total > 0.0)) {
        throw NoPhotonsError("no photons recorded (T = 0)");
    }
    const RVector re = cal.c_re * (rec[Pol::D] - rec[Pol::A]);
    const RVector im = -static_cast<double>(cal.sign_circ) * cal.c_im * (rec[Pol::L] - rec[Pol::R]);
    CVector est(re.size());
    for (Eigen::Index k = 0; k < re.size(); ++k) {
        est(k) = cplx(re(k), im(k)) / (total * s);
    }
    return est;
}

/// Per-momentum normalisation; estimates the
/// conditional P(x|p) rather than the joint. Momentum bins without photons
/// in a pair carry no information and are returned as 0.
inline CVector estimate_conditional_column(
    const MeasurementRecord &rec, const EstimatorCalibration &cal = EstimatorCalibration::standard()) {
    const double s = detail::checked_sin(rec.phi);
    CVector est(static_cast<Eigen::Index>(rec.n()));
    for (Eigen::Index k = 0; k < est.size(); ++k) {
        const double lin = rec[Pol::D](k) + rec[Pol::A](k);
        const double circ = rec[Pol::L](k) + rec[Pol::R](k);
        const double re = lin > 0.0 ? cal.c_re * (rec[Pol::D](k) - rec[Pol::A](k)) / lin : 0.0;
        const double im = circ > 0.0 ? -static_cast<double>(cal.sign_circ) * cal.c_im *
                                           (rec[Pol::L](k) - rec[Pol::R](k)) / circ
                                     : 0.0;
        est(k) = cplx(re, im) / s;
    }
    return est;
}

/// Exact finite-phi correction: rows in the sliver hold
/// (1 - cos phi) <w_k|x_m><x_m|rho P_S|w_k>, so that
/// estimate + sum over sliver rows = sum of the true rows.
/// For a one-site sliver this is (1 - cos phi) Prob(x) |<x|p>|^2.
inline CMatrix backaction_offset(const DensityMatrix &rho, const Sliver &sliver, double phi,
                                 const CMatrix &basis) {
    check_sliver(rho.grid(), sliver);
    check_coupling_angle(phi);
    detail::check_basis(rho.grid(), basis);
    const auto n = static_cast<Eigen::Index>(rho.n());
    const double q = 1.0 - std::cos(phi);
    CMatrix off = CMatrix::Zero(n, n);
    const auto b = static_cast<Eigen::Index>(sliver.begin);
    const auto w = static_cast<Eigen::Index>(sliver.width);
    for (Eigen::Index m = b; m < b + w; ++m) {
        for (Eigen::Index k = 0; k < n; ++k) {
            cplx acc = 0.0;
            for (Eigen::Index mp = b; mp < b + w; ++mp) {
                acc += rho.matrix()(m, mp) * basis(mp, k);
            }
            off(m, k) = q * std::conj(basis(m, k)) * acc;
        }
    }
    return off;
}

inline CMatrix backaction_offset(const DensityMatrix &rho, const Sliver &sliver, double phi) {
    return backaction_offset(rho, sliver, phi, lattice::overlap_matrix(rho.grid()));
}

/// Undo the cos(phi) suppression of the reconstructed diagonals.
inline DensityMatrix correct_diagonals(const DensityMatrix &measured, double phi) {
    if (!(phi >= 0.0 && phi < std::numbers::pi / 2)) {
        throw ConfigError("diagonal correction needs 0 <= phi < pi/2");
    }
    const double c = std::cos(phi);
    CMatrix out = measured.matrix();
    out.diagonal() /= c;
    return DensityMatrix::unvalidated(measured.grid(), std::move(out));
}

/// Re-derive the estimator constants from a simulated pure state with both
/// real and imaginary Dirac components, against the exact trace formula.
inline EstimatorCalibration calibrate_estimator(std::size_t n = 16,
                                                double phi = 12.92 * std::numbers::pi / 180.0) {
    const Grid g(n, 1.0, 0.0);
    CVector raw(static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m) {
        const double x = g.x(m);
        const double sig = 0.18 * static_cast<double>(n);
        raw(static_cast<Eigen::Index>(m)) =
            std::polar(std::exp(-0.5 * (x - 0.7) * (x - 0.7) / (sig * sig)), 0.9 * x / sig);
    }
    const auto rho = qstate::density_from_pure(qstate::pure_from_samples(g, raw));
    const auto truth = dirac::dirac_distribution(rho);
    const Sliver sliver{g.center() - 1, 1};
    const auto rec = readout_intensities(couple(rho, sliver, phi), 1.0);
    const CMatrix off = backaction_offset(rho, sliver, phi);
    const double total = detail::total_photons(rec);
    const double s = std::sin(phi);
    double re_ab = 0, re_bb = 0, im_ab = 0, im_bb = 0;
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) {
        const auto m = static_cast<Eigen::Index>(sliver.begin);
        const cplx target = truth.d(m, k) - off(m, k);
        const double lin = (rec[Pol::D](k) - rec[Pol::A](k)) / (total * s);
        const double circ = (rec[Pol::L](k) - rec[Pol::R](k)) / (total * s);
        re_ab += target.real() * lin;
        re_bb += lin * lin;
        im_ab += target.imag() * circ;
        im_bb += circ * circ;
    }
    // est = c_re lin - i sign c_im circ  (imaginary part: -sign c_im circ)
    const double signed_im = -im_ab / im_bb;
    EstimatorCalibration cal;
    cal.c_re = re_ab / re_bb;
    cal.c_im = std::abs(signed_im);
    cal.sign_circ = signed_im >= 0.0 ? 1 : -1;
    return cal;
}

// ---------------------------------------------------------------------------
// Full scans

enum class RecordKeeping { None, FirstScan, All };

struct ScanOptions {
    std::size_t sliver_width = 1;
    bool noise = false;
    std::uint64_t seed = 0;
    std::size_t scans = 1; // repeats averaged together
    bool correct_backaction = true;
    EstimatorCalibration calibration = EstimatorCalibration::standard();
    RecordKeeping keep = RecordKeeping::None;
};

struct ScanResult {
    CMatrix measured; // row m: estimate with the sliver starting at site m
    std::vector<MeasurementRecord> records;
};

/// Seed for (scan repeat, sliver) so serial and parallel runs agree.
inline std::uint64_t column_seed(std::uint64_t master, std::size_t repeat, std::size_t sliver) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(repeat), static_cast<std::uint32_t>(sliver)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace detail {

template <class Fn>
auto with_sliver_context(std::size_t m, Fn &&fn) -> decltype(fn()) {
    const std::string where = "sliver at site " + std::to_string(m) + ": ";
    try {
        return fn();
    } catch (const NoPhotonsError &e) {
        throw NoPhotonsError(where + e.what());
    } catch (const NumericalIntegrityError &e) {
        throw NumericalIntegrityError(where + e.what());
    } catch (const DataError &e) {
        throw DataError(where + e.what());
    }
}

} // namespace detail

/// Moves the sliver across every site, reading out in `basis`. With
/// correction on, the back-action offset is rebuilt from the record itself:
/// Prob(S) = Re sum_k est / cos(phi), offset_k = (1 - cos phi) Prob(S) |w_k(S)|^2
/// (exact for one-site slivers).
inline ScanResult scan_in_basis(const DensityMatrix &rho, const CMatrix &basis, double phi,
                                double photon_budget, const ScanOptions &opts) {
    if (opts.scans == 0) {
        throw ConfigError("pipeline.scans must be at least 1");
    }
    if (opts.sliver_width == 0 || opts.sliver_width > rho.n()) {
        throw ConfigError("pipeline.sliver_width must be between 1 and grid.n");
    }
    const SliverReadout readout(rho, basis);
    const auto n = static_cast<Eigen::Index>(rho.n());
    const double c = std::cos(phi);
    ScanResult result;
    result.measured = CMatrix::Zero(n, n);
    for (std::size_t m = 0; m < rho.n(); ++m) {
        const Sliver sliver{m, std::min(opts.sliver_width, rho.n() - m)};
        CVector col = detail::with_sliver_context(m, [&] {
            CVector acc = CVector::Zero(n);
            for (std::size_t r = 0; r < opts.scans; ++r) {
                MeasurementRecord rec = readout.record(sliver, phi, photon_budget);
                if (opts.noise) {
                    rec = sample_counts(rec, column_seed(opts.seed, r, m));
                }
                acc += estimate_dirac_column(rec, opts.calibration);
                if (opts.keep == RecordKeeping::All ||
                    (opts.keep == RecordKeeping::FirstScan && r == 0)) {
                    result.records.push_back(std::move(rec));
                }
            }
            return CVector(acc / static_cast<double>(opts.scans));
        });
        if (opts.correct_backaction) {
            const double prob = col.sum().real() / c;
            for (Eigen::Index k = 0; k < n; ++k) {
                double weight = 0.0;
                for (std::size_t s = sliver.begin; s < sliver.end(); ++s) {
                    weight += std::norm(basis(static_cast<Eigen::Index>(s), k));
                }
                col(k) += (1.0 - c) * prob * weight / static_cast<double>(sliver.width);
            }
        }
        // A wide sliver measures the sum over its sites; store the per-site mean.
        col /= static_cast<double>(sliver.width);
        result.measured.row(static_cast<Eigen::Index>(m)) = col.transpose();
    }
    return result;
}

inline DiracDistribution scan(const DensityMatrix &rho, const BenchConfig &cfg,
                              const ScanOptions &opts = {}) {
    auto res = scan_in_basis(rho, lattice::overlap_matrix(rho.grid()), cfg.phi,
                             cfg.photon_budget, opts);
    return DiracDistribution{rho.grid(), std::move(res.measured)};
}

} // namespace diracqp::weaksim
