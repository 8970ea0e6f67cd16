#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include <fpcav/gaussmodes.hpp>

#include "oracles.hpp"

using namespace fpcav;
using namespace fpcav::gauss;

namespace
{
constexpr double lambda_s = 572.67;
constexpr double inf = std::numeric_limits<double>::infinity();
} // namespace

TEST(EffectiveLength, PlanarLimit)
{
    for (int q = 1; q <= 40; ++q)
        EXPECT_DOUBLE_EQ(effective_length({q, 0, 0}, lambda_s, inf), oracle::planar_length_um(q, lambda_s));
    // transverse order irrelevant in the planar limit
    EXPECT_DOUBLE_EQ(effective_length({7, 2, 1}, lambda_s, inf), oracle::planar_length_um(7, lambda_s));
}

TEST(EffectiveLength, FixedPointResidual)
{
    const ModeIndex mode{23, 0, 0};
    const double L = effective_length(mode, lambda_s, 10.0);
    // substitute back by hand
    const double g = 1.0 - L / 10.0;
    const double rhs = (23 + std::acos(std::sqrt(g)) / constants::pi) * lambda_s * 1e-3 / 2.0;
    EXPECT_LT(std::abs(rhs - L) / L, 1e-9);
    EXPECT_LT(std::abs(effective_length_residual(mode, lambda_s, 10.0, L)), 1e-9);
    EXPECT_GT(L, oracle::planar_length_um(23, lambda_s));
}

TEST(EffectiveLength, ResidualOverManyModes)
{
    for (int q = 1; q <= 30; ++q)
        for (int t = 0; t <= 4; ++t)
        {
            const ModeIndex mode{q, t, 0};
            const double L = effective_length(mode, lambda_s, 10.0);
            EXPECT_LT(std::abs(effective_length_residual(mode, lambda_s, 10.0, L)), 1e-9);
        }
}

TEST(EffectiveLength, MonotonicInQ)
{
    double prev = 0.0;
    for (int q = 1; q <= 30; ++q)
    {
        const double L = effective_length({q, 1, 0}, lambda_s, 10.0);
        EXPECT_GT(L, prev);
        prev = L;
    }
}

TEST(EffectiveLength, TransverseDegeneracy)
{
    EXPECT_EQ(effective_length({20, 1, 0}, lambda_s, 10.0), effective_length({20, 0, 1}, lambda_s, 10.0));
    EXPECT_EQ(effective_length({20, 2, 0}, lambda_s, 10.0), effective_length({20, 1, 1}, lambda_s, 10.0));
    EXPECT_EQ(effective_length({20, 0, 2}, lambda_s, 10.0), effective_length({20, 1, 1}, lambda_s, 10.0));
}

TEST(EffectiveLength, TransverseSplitting)
{
    const double R = 10.0;
    const double L0 = effective_length({14, 0, 0}, lambda_s, R);
    const double L1 = effective_length({14, 1, 0}, lambda_s, R);
    // splitting (1/pi) acos(sqrt(g)) lambda/2, evaluated at the (q,1,0) length
    const double g = 1.0 - L1 / R;
    const double g0 = 1.0 - L0 / R;
    const double predicted = (2.0 * std::acos(std::sqrt(g)) - std::acos(std::sqrt(g0))) / constants::pi * lambda_s * 1e-3 / 2.0;
    EXPECT_NEAR(L1 - L0, predicted, 1e-12);
    EXPECT_GT(L1 - L0, 0.0);
    EXPECT_LT(L1 - L0, lambda_s * 1e-3 / 2.0);
}

TEST(EffectiveLength, Errors)
{
    EXPECT_THROW(effective_length({0, 0, 0}, lambda_s, 10.0), invalid_argument);
    EXPECT_THROW(effective_length({1, -1, 0}, lambda_s, 10.0), invalid_argument);
    EXPECT_THROW(effective_length({3, 0, 0}, -1.0, 10.0), invalid_argument);
    EXPECT_THROW(effective_length({3, 0, 0}, lambda_s, 0.0), invalid_argument);
    // q lambda/2 = 28.6 um exceeds R = 10 um
    EXPECT_THROW(effective_length({100, 0, 0}, lambda_s, 10.0), unstable_geometry_error);
}

TEST(DispersionMap, PlanarComb)
{
    const auto map = mode_dispersion_map(lambda_s, inf, 1.0, 8.0, {{0, 0}}, 4.07);
    ASSERT_GT(map.size(), 10u);
    for (std::size_t i = 1; i < map.size(); ++i)
    {
        EXPECT_NEAR(map[i].delta_length_nm - map[i - 1].delta_length_nm, lambda_s / 2.0, 1e-9);
        EXPECT_EQ(map[i].mode.q, map[i - 1].mode.q + 1);
    }
}

TEST(DispersionMap, SortedLadder)
{
    const auto map = mode_dispersion_map(lambda_s, 10.0, 3.5, 4.6, {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}}, 4.07);
    ASSERT_FALSE(map.empty());
    for (std::size_t i = 1; i < map.size(); ++i)
        EXPECT_LE(map[i - 1].delta_length_nm, map[i].delta_length_nm);
    for (const auto &e : map)
    {
        EXPECT_GE(e.length_um, 3.5);
        EXPECT_LE(e.length_um, 4.6);
        EXPECT_NEAR(e.delta_length_nm, (e.length_um - 4.07) * 1e3, 1e-9);
    }
    // higher transverse orders sit at larger length for equal q
    for (const auto &a : map)
        for (const auto &b : map)
        {
            if (a.mode.q == b.mode.q && a.mode.transverse_order() < b.mode.transverse_order())
            {
                EXPECT_LT(a.length_um, b.length_um);
            }
        }
}

TEST(DispersionMap, Errors)
{
    EXPECT_THROW(mode_dispersion_map(lambda_s, 10.0, 4.0, 4.0, {{0, 0}}, 4.0), invalid_argument);
    EXPECT_THROW(mode_dispersion_map(lambda_s, 10.0, -1.0, 4.0, {{0, 0}}, 4.0), invalid_argument);
}

TEST(RadiusFit, RecoversSyntheticRadius)
{
    const auto map = mode_dispersion_map(lambda_s, 10.0, 3.0, 5.0, {{0, 0}, {1, 0}, {2, 0}, {3, 0}}, 4.07);
    std::vector<ObservedResonance> obs;
    for (const auto &e : map)
        obs.push_back({e.delta_length_nm + 123.0, e.mode}); // unknown common offset
    const auto fit = fit_mirror_radius(obs, lambda_s);
    EXPECT_NEAR(fit.mirror_radius_um, 10.0, 0.1);
    EXPECT_LT(fit.rms_nm, 1e-6);
}

TEST(RadiusFit, RejectsTooFewPoints)
{
    EXPECT_THROW(fit_mirror_radius({{0.0, {3, 0, 0}}}, lambda_s), invalid_argument);
}

TEST(BeamWaists, PaperGeometry)
{
    const auto w = beam_waists(4.07, 10.0, lambda_s);
    EXPECT_NEAR(w.w_mirror_intensity_um, 0.87, 0.03);
    EXPECT_NEAR(w.average_intensity_um(), 0.77, 0.03);
    EXPECT_DOUBLE_EQ(w.w0_intensity_um, w.w0_field_um / std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(w.w_mirror_intensity_um, w.w_mirror_field_um / std::sqrt(2.0));
}

TEST(BeamWaists, MatchAbcdOracle)
{
    for (double L : {0.5, 2.0, 4.07, 7.0, 9.5})
    {
        const auto w = beam_waists(L, 10.0, lambda_s);
        const auto ref = oracle::plano_concave_waists(L, 10.0, lambda_s * 1e-3);
        EXPECT_NEAR(w.w0_field_um, ref.w0, 1e-9);
        EXPECT_NEAR(w.w_mirror_field_um, ref.wL, 1e-9);
    }
}

TEST(BeamWaists, ShortCavityWaistsCoincide)
{
    const auto w = beam_waists(1e-6, 10.0, lambda_s);
    EXPECT_NEAR(w.w_mirror_field_um / w.w0_field_um, 1.0, 1e-6);
}

TEST(BeamWaists, Unstable)
{
    EXPECT_THROW(beam_waists(10.0, 10.0, lambda_s), unstable_geometry_error);
    EXPECT_THROW(beam_waists(0.0, 10.0, lambda_s), unstable_geometry_error);
}

TEST(Hermite, Recurrence)
{
    const double x = 0.7;
    EXPECT_DOUBLE_EQ(hermite(0, x), 1.0);
    EXPECT_DOUBLE_EQ(hermite(1, x), 2 * x);
    EXPECT_NEAR(hermite(2, x), 4 * x * x - 2, 1e-14);
    EXPECT_NEAR(hermite(3, x), 8 * x * x * x - 12 * x, 1e-14);
    EXPECT_NEAR(hermite(4, x), 16 * std::pow(x, 4) - 48 * x * x + 12, 1e-12);
    EXPECT_THROW(hermite(-1, x), invalid_argument);
}

TEST(ModeImage, FundamentalRoundTrip)
{
    const auto img = hermite_gaussian_image(0, 0, 0.88, 0.05, 128);
    EXPECT_NEAR(fit_linecut_waist(img), 0.88, 0.01);
    EXPECT_NEAR(fit_linecut_waist(img, Axis::y), 0.88, 0.01);
    EXPECT_NEAR(fit_linecut_waist(img), 0.88, 0.0088);
    double peak = 0.0;
    for (double v : img.pixels)
    {
        EXPECT_GE(v, 0.0);
        peak = std::max(peak, v);
    }
    EXPECT_DOUBLE_EQ(peak, 1.0);
}

TEST(ModeImage, AmplitudeInvariance)
{
    auto img = hermite_gaussian_image(0, 0, 0.88, 0.05, 96);
    const double w1 = fit_linecut_waist(img);
    for (auto &v : img.pixels)
        v *= 2.0;
    EXPECT_NEAR(fit_linecut_waist(img), w1, 1e-6);
}

TEST(ModeImage, CalibrationInvariance)
{
    const auto a = hermite_gaussian_image(0, 0, 0.88, 0.05, 96);
    const auto b = hermite_gaussian_image(0, 0, 0.88, 0.025, 192);
    EXPECT_NEAR(fit_linecut_waist(a), fit_linecut_waist(b), 1e-4);
}

TEST(ModeImage, OddModeHasNodalLine)
{
    const auto img = hermite_gaussian_image(1, 0, 0.88, 0.05, 65); // odd size: a pixel column at x = 0
    for (int y = 0; y < img.height; ++y)
        EXPECT_NEAR(img.at(32, y), 0.0, 1e-15);
    // two lobes symmetric about x = 0
    EXPECT_NEAR(img.at(20, 32), img.at(44, 32), 1e-12);
    EXPECT_GT(img.at(20, 32), 0.1);
}

TEST(ModeImage, RotationSymmetry)
{
    const auto a = hermite_gaussian_image(1, 0, 0.88, 0.05, 48);
    const auto b = hermite_gaussian_image(0, 1, 0.88, 0.05, 48);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            EXPECT_NEAR(a.at(x, y), b.at(y, x), 1e-15);
}

TEST(ModeImage, Errors)
{
    EXPECT_THROW(hermite_gaussian_image(0, 0, 0.88, 0.05, 8), invalid_argument);
    EXPECT_THROW(hermite_gaussian_image(0, 0, 0.0, 0.05, 32), invalid_argument);
    ModeImage flat;
    flat.width = flat.height = 32;
    flat.pixels.assign(32 * 32, 0.5);
    EXPECT_THROW(fit_linecut_waist(flat), fit_error);
}

TEST(ModeImage, PgmRoundTrip)
{
    const auto img = hermite_gaussian_image(0, 0, 0.88, 0.05, 64);
    std::stringstream ss;
    io::write_pgm(ss, img);
    const auto back = io::read_pgm(ss, 0.05);
    ASSERT_EQ(back.width, 64);
    ASSERT_EQ(back.height, 64);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        EXPECT_NEAR(back.pixels[i], img.pixels[i], 1.0 / 65535.0);
    EXPECT_NEAR(fit_linecut_waist(back), 0.88, 0.01);
    std::istringstream bad("P5\n2 2\n255\n");
    EXPECT_THROW(io::read_pgm(bad, 1.0), format_error);
    std::istringstream truncated("P2\n2 2\n255\n1 2 3\n");
    EXPECT_THROW(io::read_pgm(truncated, 1.0), format_error);
}
