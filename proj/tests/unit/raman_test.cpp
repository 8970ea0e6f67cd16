#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <fpcav/raman.hpp>

#include "oracles.hpp"

using namespace fpcav;
using namespace fpcav::raman;

TEST(Stokes, PaperPumps)
{
    EXPECT_NEAR(stokes_wavelength(532.0, 1335.0), 572.67, 0.005);
    EXPECT_NEAR(stokes_wavelength(636.0, 1335.0), 695.0, 0.05);
    EXPECT_NEAR(stokes_wavelength(532.0), 572.67, 0.005);
    EXPECT_DOUBLE_EQ(stokes_wavelength(612.3, 0.0), 612.3);
}

TEST(Stokes, MatchesEnergyConservation)
{
    for (double pump : {405.0, 532.0, 636.0, 780.0})
        for (double shift : {diamond_shift_invcm, diamond_shift_literature_invcm, 520.0})
            EXPECT_NEAR(stokes_wavelength(pump, shift), oracle::stokes_from_energy(pump, shift), 1e-9);
}

TEST(Stokes, RoundTrip)
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pump(300.0, 900.0);
    for (int i = 0; i < 200; ++i)
    {
        const double p = pump(rng);
        const double s = stokes_wavelength(p);
        EXPECT_NEAR(pump_wavelength(s) / p, 1.0, 1e-12);
    }
}

TEST(Stokes, Rejects)
{
    EXPECT_THROW(stokes_wavelength(0.0, 1335.0), invalid_argument);
    EXPECT_THROW(stokes_wavelength(532.0, -1.0), invalid_argument);
    // 1/7.5 um = 1333 cm^-1 < shift
    EXPECT_THROW(stokes_wavelength(7500.0, 1335.0), invalid_argument);
}

TEST(Linewidth, PaperConversions)
{
    const double l636 = stokes_wavelength(636.0);
    EXPECT_NEAR(linewidth_convert(77.0, LinewidthUnit::pm, LinewidthUnit::ghz, l636), 47.8, 0.1);
    EXPECT_NEAR(linewidth_convert(71.0, LinewidthUnit::pm, LinewidthUnit::ghz, 572.67), 64.9, 0.1);
    EXPECT_NEAR(linewidth_convert(70.0, LinewidthUnit::pm, LinewidthUnit::q, 572.67), 8200.0, 50.0);
}

TEST(Linewidth, SmallWidthMatchesEdgeFrequencies)
{
    for (double pm : {1.0, 10.0, 71.0})
        EXPECT_NEAR(linewidth_convert(pm, LinewidthUnit::pm, LinewidthUnit::ghz, 572.67),
                    oracle::width_ghz_from_edges(pm, 572.67), 1e-6 * pm * 1e3);
}

TEST(Linewidth, RoundTrips)
{
    const LinewidthUnit units[] = {LinewidthUnit::pm, LinewidthUnit::ghz, LinewidthUnit::q};
    for (double ref : {532.0, 572.67, 695.0})
        for (auto a : units)
            for (auto b : units)
            {
                const double v = 37.5;
                const double there = linewidth_convert(v, a, b, ref);
                EXPECT_NEAR(linewidth_convert(there, b, a, ref), v, 1e-12 * v);
            }
    // GHz <-> Q without going through pm: Q = nu / delta_nu.
    const double nu_ghz = 299792458.0 / 572.67e-9 * 1e-9;
    EXPECT_NEAR(linewidth_convert(64.9, LinewidthUnit::ghz, LinewidthUnit::q, 572.67), nu_ghz / 64.9, 1e-9);
}

TEST(Linewidth, ReferenceRequired)
{
    EXPECT_THROW(linewidth_convert(71.0, LinewidthUnit::pm, LinewidthUnit::ghz), invalid_argument);
    EXPECT_DOUBLE_EQ(linewidth_convert(71.0, LinewidthUnit::pm, LinewidthUnit::pm), 71.0);
    EXPECT_THROW(linewidth_convert(-1.0, LinewidthUnit::pm, LinewidthUnit::ghz, 500.0), invalid_argument);
    EXPECT_THROW(linewidth_convert(1.0, LinewidthUnit::pm, LinewidthUnit::ghz, 0.0), invalid_argument);
    const auto w = convert({71.0, LinewidthUnit::pm, 572.67}, LinewidthUnit::ghz);
    EXPECT_EQ(w.unit, LinewidthUnit::ghz);
    EXPECT_EQ(parse_linewidth_unit("GHz"), LinewidthUnit::ghz);
    EXPECT_THROW(parse_linewidth_unit("THz"), invalid_argument);
}

TEST(Deconvolution, LorentzianWidths)
{
    EXPECT_NEAR(deconvolve_lorentzian(64.9, 15.0), 49.9, 1e-12);
    EXPECT_DOUBLE_EQ(deconvolve_lorentzian(47.8, 0.0), 47.8);
    EXPECT_THROW(deconvolve_lorentzian(10.0, 10.0), invalid_argument);
    EXPECT_THROW(deconvolve_lorentzian(10.0, -1.0), invalid_argument);
}

TEST(Lifetime, PaperRange)
{
    EXPECT_NEAR(phonon_lifetime_ps(44.2), 3.6, 0.05);
    EXPECT_NEAR(phonon_lifetime_ps(40.8), 3.9, 0.05);
    EXPECT_NEAR(phonon_lifetime_ps(47.8), 3.3, 0.05);
    for (double w : {1.0, 44.2, 1000.0})
        EXPECT_NEAR(phonon_lifetime_ps(w) * 1e-12 * w * 1e9, 1.0 / (2.0 * std::numbers::pi), 1e-15);
    EXPECT_THROW(phonon_lifetime_ps(0.0), invalid_argument);
}
