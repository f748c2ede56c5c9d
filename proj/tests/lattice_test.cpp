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

#include <diracqp/lattice.hpp>

#include "oracles.hpp"

using namespace diracqp;
using lattice::Grid;

TEST(Grid, MomentumSpacing) {
    EXPECT_DOUBLE_EQ(lattice::make_grid(8, 1.0, 0.0).dp(), std::numbers::pi / 4);
    EXPECT_DOUBLE_EQ(lattice::make_grid(2, 0.5, 0.0).dp(), 2 * std::numbers::pi);
    for (std::size_t n : {2u, 3u, 7u, 64u, 512u}) {
        const Grid g(n, 0.37, 1.5);
        EXPECT_NEAR(g.dp() * g.dx() * static_cast<double>(n), 2 * std::numbers::pi, 1e-12);
    }
}

TEST(Grid, ApertureSpan) {
    const Grid g = lattice::make_grid(256, 44e-3 / 256, 0.0);
    EXPECT_NEAR(static_cast<double>(g.n()) * g.dx(), 44e-3, 1e-15);
}

TEST(Grid, RejectsBadParameters) {
    EXPECT_THROW(lattice::make_grid(1, 1.0, 0.0), ConfigError);
    EXPECT_THROW(lattice::make_grid(0, 1.0, 0.0), ConfigError);
    EXPECT_THROW(lattice::make_grid(4, 0.0, 0.0), ConfigError);
    EXPECT_THROW(lattice::make_grid(4, -1.0, 0.0), ConfigError);
    EXPECT_THROW(Grid(4, 1.0, 0.0, lattice::UnitMap{-1.0, 1.0, 1.0}), ConfigError);
}

TEST(Grid, CoordinatesAreCentred) {
    const Grid g(8, 0.5, 3.0);
    EXPECT_DOUBLE_EQ(g.x(4), 3.0);
    EXPECT_DOUBLE_EQ(g.x(0), 3.0 - 2.0);
    EXPECT_DOUBLE_EQ(g.p(4), 0.0);
    EXPECT_DOUBLE_EQ(g.axial_x(5), 0.5);
    for (std::size_t m = 0; m < 8; ++m) {
        EXPECT_EQ(g.nearest_site(g.x(m)), m);
        EXPECT_EQ(g.momentum_index(g.p(m)), m);
    }
}

TEST(Grid, OddSizeCentre) {
    const Grid g(5, 1.0, 0.0);
    EXPECT_EQ(g.center(), 2u);
    EXPECT_DOUBLE_EQ(g.x(2), 0.0);
}

TEST(UnitMap, CameraRoundTrip) {
    const lattice::UnitMap u{780e-9, 1.0, 4.935};
    const Grid g(256, 0.25e-3, 22e-3, u);
    for (std::size_t k = 0; k < g.n(); ++k) {
        const double p = g.p(k);
        EXPECT_NEAR(u.momentum_from_camera(u.camera_coordinate(p)), p, 1e-12 * (1 + std::abs(p)));
    }
    // p = x_FT h / (f M lambda) with hbar = 1, so x_cam = p f M lambda / (2 pi).
    EXPECT_NEAR(u.camera_coordinate(1000.0), 1000.0 * 4.935 * 780e-9 / (2 * std::numbers::pi), 1e-18);
}

TEST(Overlap, Modulus) {
    const Grid g(16, 0.3, 1.1);
    for (std::size_t m = 0; m < 16; ++m) {
        for (std::size_t k = 0; k < 16; ++k) {
            EXPECT_NEAR(std::norm(lattice::overlap(g, m, k)), 1.0 / 16, 1e-15);
        }
    }
}

TEST(Overlap, ZeroPhaseRow) {
    const Grid g(4, 1.0, 0.0);
    for (std::size_t k = 0; k < 4; ++k) {
        const cplx o = lattice::overlap(g, 2, k);
        EXPECT_NEAR(o.real(), 0.5, 1e-15);
        EXPECT_NEAR(o.imag(), 0.0, 1e-15);
    }
}

TEST(Overlap, MatchesDefinition) {
    const Grid g(12, 0.7, 0.4);
    const oracle::Mat u = oracle::momentum_kets(g);
    EXPECT_LT(oracle::max_abs(lattice::overlap_matrix(g) - u), 1e-13);
}

TEST(Overlap, OutOfRange) {
    const Grid g(4, 1.0, 0.0);
    EXPECT_THROW(lattice::overlap(g, 4, 0), ContractViolation);
    EXPECT_THROW(lattice::overlap(g, 0, 4), ContractViolation);
}

TEST(Overlap, UnitaryUpTo512) {
    for (std::size_t n : {2u, 3u, 4u, 16u, 101u, 256u, 512u}) {
        const Grid g(n, 0.25e-3, 22e-3);
        const CMatrix u = lattice::overlap_matrix(g);
        const CMatrix id = CMatrix::Identity(u.rows(), u.cols());
        EXPECT_LT((u.adjoint() * u - id).cwiseAbs().maxCoeff(), 1e-12) << "n = " << n;
    }
}

TEST(Overlap, LargeOffsetKeepsPrecision) {
    // x0 far from the origin: the reduced phase must still give exact unitarity.
    const Grid g(64, 1.0, 1e6);
    const CMatrix u = lattice::overlap_matrix(g);
    EXPECT_LT((u.adjoint() * u - CMatrix::Identity(64, 64)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Transform, DeltaIsFlat) {
    const Grid g(8, 1.0, 0.5);
    CVector v = CVector::Zero(8);
    v(3) = 1.0;
    const CVector vt = lattice::to_momentum(g, v);
    for (Eigen::Index k = 0; k < 8; ++k) EXPECT_NEAR(std::abs(vt(k)), 1 / std::sqrt(8.0), 1e-15);
}

TEST(Transform, RoundTripAndNorm) {
    std::mt19937_64 rng(7);
    for (std::size_t n : {2u, 5u, 32u, 128u}) {
        const Grid g(n, 0.1, -0.3);
        const CVector v = oracle::ginibre(n, 1, rng).col(0);
        const CVector vt = lattice::to_momentum(g, v);
        EXPECT_NEAR(vt.norm(), v.norm(), 1e-12 * v.norm());
        EXPECT_LT((lattice::from_momentum(g, vt) - v).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Transform, LengthMismatch) {
    const Grid g(8, 1.0, 0.0);
    EXPECT_THROW(lattice::to_momentum(g, CVector::Zero(7)), ContractViolation);
    EXPECT_THROW(lattice::from_momentum(g, CVector::Zero(9)), ContractViolation);
}
