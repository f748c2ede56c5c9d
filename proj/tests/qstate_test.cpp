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

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <diracqp/qstate.hpp>

#include "oracles.hpp"

using namespace diracqp;
using lattice::Grid;
using qstate::BenchConfig;
using qstate::DensityMatrix;

namespace {

Grid bench_grid() { return Grid(256, 0.25e-3, 22e-3, lattice::UnitMap{}); }

CVector basis(std::size_t n, std::size_t i) {
    CVector v = CVector::Zero(static_cast<Eigen::Index>(n));
    v(static_cast<Eigen::Index>(i)) = 1.0;
    return v;
}

} // namespace

TEST(PureFromSamples, Normalises) {
    const Grid g(4, 1.0, 0.0);
    CVector raw(4);
    raw << 2.0, 0.0, 0.0, 0.0;
    const auto psi = qstate::pure_from_samples(g, raw);
    EXPECT_NEAR(std::abs(psi.amp(0) - cplx(1.0)), 0.0, 1e-15);
    EXPECT_EQ(psi.amp.tail(3).norm(), 0.0);

    const auto again = qstate::pure_from_samples(g, psi.amp);
    EXPECT_LT((again.amp - psi.amp).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PureFromSamples, GaussianSamples) {
    std::mt19937_64 rng(3);
    const Grid g(64, 0.1, 0.0);
    for (int t = 0; t < 20; ++t) {
        const auto psi = qstate::pure_from_samples(g, oracle::ginibre(64, 1, rng).col(0));
        EXPECT_NEAR(psi.amp.squaredNorm(), 1.0, 1e-12);
    }
}

TEST(PureFromSamples, ZeroVectorRejected) {
    const Grid g(4, 1.0, 0.0);
    EXPECT_THROW(qstate::pure_from_samples(g, CVector::Zero(4)), DegenerateInputError);
    EXPECT_THROW(qstate::pure_from_samples(g, CVector::Zero(3)), ContractViolation);
}

TEST(DensityFromPure, Examples) {
    const Grid g(4, 1.0, 0.0);
    const auto e0 = qstate::density_from_pure({g, basis(4, 0)});
    EXPECT_EQ(e0(0, 0), cplx(1.0));
    EXPECT_EQ(e0.matrix().cwiseAbs().sum(), 1.0);

    const Grid g2(2, 1.0, 0.0);
    CVector u(2);
    u << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    const auto uni = qstate::density_from_pure({g2, u});
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(uni(i, j) - 0.5), 0.0, 1e-15);
    }
}

TEST(DensityFromPure, PurityOne) {
    std::mt19937_64 rng(11);
    const Grid g(32, 1.0, 0.0);
    for (int t = 0; t < 10; ++t) {
        const auto rho = qstate::density_from_pure({g, oracle::random_vector(32, rng)});
        EXPECT_NEAR(rho.purity(), 1.0, 1e-12);
        EXPECT_TRUE(qstate::check_invariants(rho.matrix()).ok());
    }
}

TEST(DensityMatrix, MakeValidates) {
    const Grid g(2, 1.0, 0.0);
    CMatrix bad(2, 2);
    bad << 1.0, 0.0, 0.0, 1.0; // trace 2
    EXPECT_THROW(DensityMatrix::make(g, bad), NumericalIntegrityError);
    bad << 0.5, cplx(0, 0.1), cplx(0, 0.1), 0.5; // not Hermitian
    EXPECT_THROW(DensityMatrix::make(g, bad), NumericalIntegrityError);
    bad << 1.5, 0.0, 0.0, -0.5; // negative eigenvalue
    EXPECT_THROW(DensityMatrix::make(g, bad), NumericalIntegrityError);
    EXPECT_THROW(DensityMatrix::make(g, CMatrix::Identity(3, 3) / 3.0), ContractViolation);
    EXPECT_NO_THROW(DensityMatrix::make(g, CMatrix::Identity(2, 2) / 2.0));
}

TEST(Mix, Examples) {
    const Grid g(4, 1.0, 0.0);
    const auto r0 = qstate::density_from_pure({g, basis(4, 0)});
    const auto r1 = qstate::density_from_pure({g, basis(4, 1)});

    const auto same = qstate::mix({{r0, 1.0}});
    EXPECT_EQ((same.matrix() - r0.matrix()).cwiseAbs().maxCoeff(), 0.0);

    const auto half = qstate::mix({{r0, 0.5}, {r1, 0.5}});
    EXPECT_NEAR(half(0, 0).real(), 0.5, 1e-15);
    EXPECT_NEAR(half(1, 1).real(), 0.5, 1e-15);
    EXPECT_NEAR(half.matrix().cwiseAbs().sum(), 1.0, 1e-15);
    EXPECT_NEAR(half.purity(), 0.5, 1e-15);
}

TEST(Mix, Errors) {
    const Grid g(4, 1.0, 0.0);
    const auto r0 = qstate::density_from_pure({g, basis(4, 0)});
    EXPECT_THROW(qstate::mix({{r0, 0.6}, {r0, 0.6}}), ConfigError);
    EXPECT_THROW(qstate::mix({}), ConfigError);
    const auto other = qstate::density_from_pure({Grid(4, 2.0, 0.0), basis(4, 0)});
    EXPECT_THROW(qstate::mix({{r0, 0.5}, {other, 0.5}}), ContractViolation);
}

TEST(Mix, RandomStatesStayValid) {
    std::mt19937_64 rng(5);
    const Grid g(8, 1.0, 0.0);
    for (int t = 0; t < 10; ++t) {
        const auto a = DensityMatrix::make(g, oracle::random_density(8, rng, 2));
        const auto b = DensityMatrix::make(g, oracle::random_density(8, rng, 1));
        const auto m = qstate::mix({{a, 0.3}, {b, 0.7}});
        EXPECT_TRUE(qstate::check_invariants(m.matrix()).ok());
    }
}

TEST(Bench, PlainTopHatIsSquare) {
    const Grid g = bench_grid();
    BenchConfig cfg;
    cfg.static_phase_step = 0.0;
    cfg.wedge_tilt = 0.0;
    cfg.edge_loss = 0.0;
    const auto rho = qstate::build_bench_state(cfg, g);
    std::size_t support = 0;
    for (std::size_t m = 0; m < g.n(); ++m) support += rho(m, m).real() > 0;
    EXPECT_EQ(support, 177u); // |x - 22 mm| <= 22 mm in 0.25 mm steps
    const double level = 1.0 / static_cast<double>(support);
    for (std::size_t a = 0; a < g.n(); ++a) {
        for (std::size_t b = 0; b < g.n(); ++b) {
            const bool inside = rho(a, a).real() > 0 && rho(b, b).real() > 0;
            EXPECT_NEAR(std::abs(rho(a, b) - cplx(inside ? level : 0.0)), 0.0, 1e-15);
        }
    }
}

TEST(Bench, PhaseStepAndEdgeDip) {
    const Grid g = bench_grid();
    BenchConfig cfg;
    cfg.wedge_tilt = 0.0;
    const auto psi = qstate::bench_amplitude(cfg, g);
    const std::size_t edge = g.nearest_site(cfg.edge_position);
    const cplx left = psi.amp(static_cast<Eigen::Index>(edge - 5));
    const cplx right = psi.amp(static_cast<Eigen::Index>(edge + 5));
    EXPECT_NEAR(std::abs(right / left - cplx(-1.0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(psi.amp(static_cast<Eigen::Index>(edge))) / std::abs(left), 0.7, 1e-12);
}

TEST(Bench, WedgeIsLinearPhase) {
    const Grid g = bench_grid();
    BenchConfig cfg;
    const auto psi = qstate::bench_amplitude(cfg, g);
    const std::size_t edge = g.nearest_site(cfg.edge_position);
    const double expected = 2 * std::numbers::pi / 780e-9 * cfg.wedge_tilt * g.dx();
    for (std::size_t m = edge + 2; m < edge + 40; ++m) {
        const cplx r = psi.amp(static_cast<Eigen::Index>(m + 1)) / psi.amp(static_cast<Eigen::Index>(m));
        EXPECT_NEAR(std::arg(r), expected, 1e-12);
    }
}

TEST(Bench, MixedZeroesCrossEdgeBlocks) {
    const Grid g = bench_grid();
    BenchConfig cfg;
    cfg.mixed = true;
    const auto rho = qstate::build_bench_state(cfg, g);
    const auto right = qstate::plate_side(cfg, g);
    for (std::size_t a = 0; a < g.n(); ++a) {
        for (std::size_t b = 0; b < g.n(); ++b) {
            if (right[a] != right[b]) {
                EXPECT_EQ(std::abs(rho(a, b)), 0.0);
            }
        }
    }
    EXPECT_TRUE(qstate::check_invariants(rho.matrix()).ok());
}

TEST(Bench, EnsembleMatchesBlockZeroing) {
    const Grid g = bench_grid();
    BenchConfig cfg;
    cfg.mixed = true;
    const auto exact = qstate::build_bench_state(cfg, g);
    const auto ens = qstate::build_bench_state_ensemble(cfg, g, 64);
    EXPECT_LT((exact.matrix() - ens.matrix()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Bench, MixingLowersPurity) {
    const Grid g = bench_grid();
    BenchConfig cfg;
    const double pure = qstate::build_bench_state(cfg, g).purity();
    cfg.mixed = true;
    const double mixed = qstate::build_bench_state(cfg, g).purity();
    EXPECT_NEAR(pure, 1.0, 1e-12);
    EXPECT_LT(mixed, pure - 0.1);
}

TEST(Bench, Validation) {
    const Grid g = bench_grid();
    BenchConfig cfg;
    cfg.edge_position = 50e-3;
    EXPECT_THROW(qstate::build_bench_state(cfg, g), ConfigError);
    cfg = {};
    cfg.aperture_halfwidth = 40e-3;
    EXPECT_THROW(qstate::build_bench_state(cfg, g), ConfigError);
    cfg = {};
    cfg.edge_loss = 1.5;
    EXPECT_THROW(qstate::build_bench_state(cfg, g), ConfigError);
    cfg = {};
    cfg.phi = std::numbers::pi / 2;
    EXPECT_THROW(qstate::build_bench_state(cfg, g), ConfigError);
    cfg = {};
    EXPECT_THROW(qstate::build_bench_state(cfg, Grid(256, 0.25e-3, 22e-3)), ConfigError);
    cfg.wedge_tilt = 0.0;
    EXPECT_NO_THROW(qstate::build_bench_state(cfg, Grid(256, 0.25e-3, 22e-3)));
    EXPECT_THROW(qstate::build_bench_state_ensemble(cfg, g, 0), ConfigError);
}
