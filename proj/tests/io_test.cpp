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
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include <diracqp/io.hpp>

#include "oracles.hpp"

using namespace diracqp;
namespace fs = std::filesystem;
using lattice::Grid;

namespace {

const Grid kGrid(6, 0.25e-3, 22e-3, lattice::UnitMap{});

fs::path scratch(const std::string &name) {
    const fs::path p = fs::temp_directory_path() / ("diracqp_io_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// write -> parse -> write must reproduce the bytes.
void expect_stable(const io::Table &t) {
    const std::string once = io::write_table(t);
    const std::string twice = io::write_table(io::parse_table(once));
    EXPECT_EQ(once, twice);
}

qstate::DensityMatrix random_state(std::mt19937_64 &rng) {
    return qstate::DensityMatrix::make(kGrid, oracle::random_density(6, rng));
}

} // namespace

TEST(Numbers, SeventeenDigitsRoundTrip) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 10000; ++t) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        const auto back = io::detail::parse_double(io::format_number(v));
        ASSERT_TRUE(back.has_value());
        EXPECT_EQ(*back, v);
    }
    for (double v : {0.0, -0.0, std::numeric_limits<double>::min(), std::numeric_limits<double>::max(),
                     std::numeric_limits<double>::denorm_min(), 0.1, 1.0 / 3}) {
        EXPECT_EQ(*io::detail::parse_double(io::format_number(v)), v);
    }
    EXPECT_FALSE(io::detail::parse_double("nan").has_value());
    EXPECT_FALSE(io::detail::parse_double("inf").has_value());
    EXPECT_FALSE(io::detail::parse_double("1.5x").has_value());
    EXPECT_FALSE(io::detail::parse_double("").has_value());
}

TEST(Tables, DensityRoundTrip) {
    std::mt19937_64 rng(2);
    const auto rho = random_state(rng);
    const io::Table t = io::density_table(rho);
    expect_stable(t);
    const auto back = io::density_from_table(io::parse_table(io::write_table(t)));
    EXPECT_EQ(back.matrix(), rho.matrix());
    EXPECT_EQ(back.grid(), rho.grid());
}

TEST(Tables, DiracRoundTrip) {
    std::mt19937_64 rng(3);
    const auto D = dirac::dirac_distribution(random_state(rng));
    io::Header extra;
    extra.set("source", "exact");
    extra.set("phi", 0.2254);
    const io::Table t = io::dirac_table(D, extra);
    expect_stable(t);
    const io::Table parsed = io::parse_table(io::write_table(t));
    EXPECT_EQ(io::dirac_from_table(parsed).d, D.d);
    EXPECT_EQ(parsed.header.get("source"), std::optional<std::string>("exact"));
    EXPECT_EQ(parsed.header.require_number("phi"), 0.2254);
}

TEST(Tables, GridWithoutUnits) {
    const Grid g(4, 1.0, 0.0);
    const auto D = dirac::dirac_distribution(qstate::DensityMatrix::make(g, CMatrix::Identity(4, 4) / 4.0));
    const auto back = io::dirac_from_table(io::parse_table(io::write_table(io::dirac_table(D))));
    EXPECT_FALSE(back.grid.unit_map().has_value());
    EXPECT_EQ(back.grid, g);
}

TEST(Tables, CountsRoundTrip) {
    std::mt19937_64 rng(4);
    const auto rho = random_state(rng);
    const auto analytic = weaksim::readout_intensities(weaksim::couple(rho, {2, 1}, 0.3), 1e6);
    for (const auto &rec : {analytic, weaksim::sample_counts(analytic, 77)}) {
        const io::Table t = io::counts_table(rec, kGrid);
        expect_stable(t);
        const auto back = io::record_from_table(io::parse_table(io::write_table(t)));
        EXPECT_EQ(back.sliver, rec.sliver);
        EXPECT_EQ(back.phi, rec.phi);
        EXPECT_EQ(back.photon_budget, rec.photon_budget);
        EXPECT_EQ(back.seed, rec.seed);
        for (auto j : weaksim::kPolarizations) EXPECT_EQ(back[j], rec[j]);
    }
}

TEST(Tables, PropagatedRoundTrip) {
    std::mt19937_64 rng(5);
    const auto D = dirac::dirac_distribution(random_state(rng));
    const auto P = bayesprop::propagate(D, 0.16, bayesprop::KernelKind::AnalyticFresnel);
    const io::Table t = io::propagated_table(P);
    expect_stable(t);
    const auto back = io::propagated_from_table(io::parse_table(io::write_table(t)));
    EXPECT_EQ(back.e, P.e);
    EXPECT_EQ(back.dz, 0.16);
    EXPECT_EQ(back.kind, bayesprop::KernelKind::AnalyticFresnel);
}

TEST(Tables, KernelRoundTrip) {
    const auto K = bayesprop::build_kernel_unitary(kGrid, bayesprop::fresnel_unitary(kGrid, 0.084), 0.084);
    const io::Table t = io::kernel_table(K);
    EXPECT_EQ(t.rows.size(), 216u);
    expect_stable(t);
    const auto back = io::kernel_from_table(io::parse_table(io::write_table(t)));
    EXPECT_EQ(back.cond, K.cond);
    EXPECT_EQ(back.dz, K.dz);
}

TEST(Tables, LayoutIsFixed) {
    const Grid g(2, 0.5, 0.0);
    CMatrix rho(2, 2);
    rho << 0.75, cplx(0.25, -0.125), cplx(0.25, 0.125), 0.25;
    const std::string text = io::write_table(io::density_table(qstate::DensityMatrix::make(g, rho)));
    EXPECT_EQ(text,
              "# format=diracqp-table-1\n# type=density\n# n=2\n# dx=0.5\n# x0=0\n"
              "0 0 0.75 0\n0 1 0.25 -0.125\n1 0 0.25 0.125\n1 1 0.25 0\n");
}

TEST(Parse, Errors) {
    const std::string head = "# format=diracqp-table-1\n# type=density\n# n=2\n# dx=1\n# x0=0\n";
    auto line_of = [](const std::string &text) -> std::size_t {
        try {
            io::parse_table(text);
        } catch (const FormatError &e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of(head + "0 0 1\n"), 6u);
    EXPECT_EQ(line_of(head + "0 0 1 0\n0 x 1 0\n"), 7u);
    EXPECT_EQ(line_of(head + "0 0 nan 0\n"), 6u);
    EXPECT_EQ(line_of(head + "0 0 1 0\n# late=1\n"), 7u);
    EXPECT_EQ(line_of("# nokey\n"), 1u);
    EXPECT_THROW(io::parse_table("# type=density\n0 0 1 0\n"), FormatError);

    auto density = [&](const std::string &body) { return io::density_from_table(io::parse_table(head + body)); };
    EXPECT_THROW(density("0 0 1 0\n"), FormatError);                              // too few rows
    EXPECT_THROW(density("0 0 1 0\n0 0 1 0\n1 0 0 0\n1 1 0 0\n"), FormatError);   // duplicate
    EXPECT_THROW(density("0 0 1 0\n0 1 0 0\n1 0 0 0\n2 1 0 0\n"), FormatError);   // out of range
    EXPECT_NO_THROW(density("1 1 0 0\n0 1 0 0\n1 0 0 0\n0 0 1 0\n"));             // any order
    EXPECT_THROW(io::dirac_from_table(io::parse_table(head + "0 0 1 0\n0 1 0 0\n1 0 0 0\n1 1 0 0\n")),
                 FormatError); // wrong type

    const std::string bad_grid = "# format=diracqp-table-1\n# type=density\n# n=1\n# dx=1\n# x0=0\n0 0 1 0\n";
    EXPECT_THROW(io::density_from_table(io::parse_table(bad_grid)), FormatError);
}

TEST(Parse, ToleratesCrLfAndBlankLines) {
    const std::string text = "# format=diracqp-table-1\r\n# type=density\r\n# n=2\r\n# dx=1\r\n# x0=0\r\n\r\n"
                             "0 0 1 0\r\n0 1 0 0\r\n1 0 0 0\r\n1  1\t0 0\r\n";
    const auto rho = io::density_from_table(io::parse_table(text));
    EXPECT_EQ(rho(0, 0), cplx(1.0));
}

TEST(Transaction, CommitsAllFiles) {
    const fs::path dir = scratch("commit");
    io::FileTransaction tx;
    tx.add(dir / "a.txt", "alpha\n");
    tx.add(dir / "sub" / "b.txt", "beta\n");
    EXPECT_EQ(tx.size(), 2u);
    tx.commit();
    EXPECT_EQ(io::read_text(dir / "a.txt"), "alpha\n");
    EXPECT_EQ(io::read_text(dir / "sub" / "b.txt"), "beta\n");
    std::size_t entries = 0;
    for (const auto &e : fs::recursive_directory_iterator(dir)) entries += e.is_regular_file();
    EXPECT_EQ(entries, 2u);
    fs::remove_all(dir);
}

TEST(Transaction, FailureLeavesNothing) {
    const fs::path dir = scratch("fail");
    { std::ofstream(dir / "blocker") << "x"; }
    io::FileTransaction tx;
    tx.add(dir / "ok.txt", "fine\n");
    tx.add(dir / "blocker" / "nested.txt", "cannot be written\n");
    EXPECT_THROW(tx.commit(), DataError);
    EXPECT_FALSE(fs::exists(dir / "ok.txt"));
    std::size_t entries = 0;
    for (const auto &e : fs::directory_iterator(dir)) entries += e.path().filename() != "blocker";
    EXPECT_EQ(entries, 0u);
    fs::remove_all(dir);
}

TEST(Files, MissingInput) {
    EXPECT_THROW(io::read_table("/nonexistent/diracqp/file.txt"), DataError);
}
