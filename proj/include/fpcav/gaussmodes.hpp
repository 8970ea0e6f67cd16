#pragma once

// Paraxial Gaussian-mode model of a plano-concave cavity: resonance lengths of the
// (q, n, m) Hermite-Gaussian modes, beam waists, and transverse intensity images.
//
// Lengths in micrometers, wavelengths in nanometers unless a name says otherwise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "constants.hpp"
#include "errors.hpp"
#include "lsq.hpp"
#include "numerics.hpp"

namespace fpcav::gauss
{
struct ModeIndex
{
    int q = 1; // longitudinal order
    int n = 0; // transverse orders
    int m = 0;

    int transverse_order() const { return n + m; }
    friend bool operator==(const ModeIndex &, const ModeIndex &) = default;
};

inline void validate(const ModeIndex &k)
{
    if (k.q < 1 || k.n < 0 || k.m < 0)
        throw invalid_argument("mode index requires q >= 1 and n, m >= 0");
}

struct EffectiveLengthOptions
{
    int max_iterations = 100;
    double relative_tolerance = 1e-13;
};

// Self-consistent length L = [q + (n+m+1)/pi * acos(sqrt(g))] * lambda/2 with
// g = 1 - L/R, by plain fixed-point iteration from L = q lambda / 2.
// An infinite radius gives the planar result q lambda / 2.
inline double effective_length(const ModeIndex &mode, double wavelength_nm, double mirror_radius_um,
                               const EffectiveLengthOptions &opt = {})
{
    validate(mode);
    if (!(wavelength_nm > 0.0))
        throw invalid_argument("effective_length: wavelength must be positive");
    if (!(mirror_radius_um > 0.0))
        throw invalid_argument("effective_length: mirror radius must be positive");
    const double half_wave = 0.5 * wavelength_nm * 1e-3;
    const double transverse = (mode.n + mode.m + 1) / constants::pi;
    if (std::isinf(mirror_radius_um))
        return mode.q * half_wave;

    double L = mode.q * half_wave;
    for (int it = 0; it < opt.max_iterations; ++it)
    {
        const double g = 1.0 - L / mirror_radius_um;
        if (!(g >= 0.0 && g <= 1.0))
            throw unstable_geometry_error("effective_length: confocal parameter g = " + std::to_string(g) +
                                          " outside [0, 1]");
        const double next = (mode.q + transverse * std::acos(std::sqrt(g))) * half_wave;
        if (std::abs(next - L) <= opt.relative_tolerance * next)
        {
            const double gn = 1.0 - next / mirror_radius_um;
            if (!(gn >= 0.0 && gn <= 1.0))
                throw unstable_geometry_error("effective_length: converged length exceeds the mirror radius");
            return next;
        }
        L = next;
    }
    throw unstable_geometry_error("effective_length: fixed-point iteration did not converge");
}

// Right-hand side minus left-hand side of the defining relation, relative to L.
inline double effective_length_residual(const ModeIndex &mode, double wavelength_nm, double mirror_radius_um,
                                        double length_um)
{
    const double half_wave = 0.5 * wavelength_nm * 1e-3;
    const double g = std::isinf(mirror_radius_um) ? 1.0 : 1.0 - length_um / mirror_radius_um;
    const double rhs = (mode.q + (mode.n + mode.m + 1) / constants::pi * std::acos(std::sqrt(g))) * half_wave;
    return (rhs - length_um) / length_um;
}

struct TransverseFamily
{
    int n = 0;
    int m = 0;
};

struct DispersionEntry
{
    double delta_length_nm = 0.0; // L_eff - reference
    double length_um = 0.0;
    ModeIndex mode;
};

// All (q, n, m) resonances with L_eff in [min_length, max_length] for the given transverse
// families, sorted by length.
inline std::vector<DispersionEntry> mode_dispersion_map(double wavelength_nm, double mirror_radius_um,
                                                        double min_length_um, double max_length_um,
                                                        const std::vector<TransverseFamily> &families,
                                                        double reference_length_um)
{
    if (!(min_length_um > 0.0) || !(max_length_um > min_length_um))
        throw invalid_argument("mode_dispersion_map: length range must be positive and increasing");
    std::vector<DispersionEntry> out;
    for (const auto &fam : families)
    {
        for (int q = 1;; ++q)
        {
            const ModeIndex mode{q, fam.n, fam.m};
            double L = 0.0;
            try
            {
                L = effective_length(mode, wavelength_nm, mirror_radius_um);
            }
            catch (const unstable_geometry_error &)
            {
                break;
            }
            if (L > max_length_um)
                break;
            if (L >= min_length_um)
                out.push_back({(L - reference_length_um) * 1e3, L, mode});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
        if (a.length_um != b.length_um)
            return a.length_um < b.length_um;
        if (a.mode.n != b.mode.n)
            return a.mode.n < b.mode.n;
        return a.mode.m < b.mode.m;
    });
    return out;
}

struct ObservedResonance
{
    double delta_length_nm = 0.0; // relative to an unknown reference
    ModeIndex mode;
};

struct RadiusFit
{
    double mirror_radius_um = 0.0;
    double reference_length_um = 0.0;
    double rms_nm = 0.0;
};

// Mirror radius from relative resonance positions of identified modes. The common
// offset is eliminated analytically; the radius is found by a log-spaced scan over
// [min_radius, max_radius] and golden-section refinement.
inline RadiusFit fit_mirror_radius(const std::vector<ObservedResonance> &observed, double wavelength_nm,
                                   double min_radius_um = 1.0, double max_radius_um = 1000.0)
{
    if (observed.size() < 2)
        throw invalid_argument("fit_mirror_radius: need at least two resonances");
    if (!(min_radius_um > 0.0 && max_radius_um > min_radius_um))
        throw invalid_argument("fit_mirror_radius: bad radius range");

    auto evaluate = [&](double radius, double *reference) {
        std::vector<double> lengths(observed.size());
        double offset = 0.0;
        for (std::size_t i = 0; i < observed.size(); ++i)
        {
            try
            {
                lengths[i] = effective_length(observed[i].mode, wavelength_nm, radius) * 1e3;
            }
            catch (const unstable_geometry_error &)
            {
                return std::numeric_limits<double>::infinity();
            }
            offset += lengths[i] - observed[i].delta_length_nm;
        }
        offset /= static_cast<double>(observed.size());
        double ss = 0.0;
        for (std::size_t i = 0; i < observed.size(); ++i)
        {
            const double d = lengths[i] - offset - observed[i].delta_length_nm;
            ss += d * d;
        }
        if (reference)
            *reference = offset * 1e-3;
        return ss;
    };

    constexpr int scan = 400;
    const double log_lo = std::log(min_radius_um);
    const double log_hi = std::log(max_radius_um);
    std::vector<double> costs(scan);
    for (int i = 0; i < scan; ++i)
        costs[static_cast<std::size_t>(i)] = evaluate(std::exp(log_lo + (log_hi - log_lo) * i / (scan - 1)), nullptr);
    const auto best = static_cast<int>(std::min_element(costs.begin(), costs.end()) - costs.begin());
    if (!std::isfinite(costs[static_cast<std::size_t>(best)]))
        throw fit_error("fit_mirror_radius: no stable radius in range");
    const double a = log_lo + (log_hi - log_lo) * std::max(best - 1, 0) / (scan - 1);
    const double b = log_lo + (log_hi - log_lo) * std::min(best + 1, scan - 1) / (scan - 1);
    const auto refined = numerics::golden_section_min([&](double lr) { return evaluate(std::exp(lr), nullptr); },
                                                      a, b, 1e-10);
    RadiusFit out;
    out.mirror_radius_um = std::exp(refined.x);
    const double ss = evaluate(out.mirror_radius_um, &out.reference_length_um);
    out.rms_nm = std::sqrt(ss / static_cast<double>(observed.size()));
    return out;
}

struct BeamWaists
{
    double rayleigh_range_um = 0.0;
    double w0_field_um = 0.0;     // 1/e field radius at the planar mirror (focus)
    double w_mirror_field_um = 0.0; // at the curved mirror, z = L
    double w0_intensity_um = 0.0; // 1/e intensity radius = field radius / sqrt(2)
    double w_mirror_intensity_um = 0.0;

    // Mean of the focus and curved-mirror intensity waists.
    double average_intensity_um() const { return 0.5 * (w0_intensity_um + w_mirror_intensity_um); }
};

inline BeamWaists beam_waists(double length_um, double mirror_radius_um, double wavelength_nm)
{
    if (!(wavelength_nm > 0.0))
        throw invalid_argument("beam_waists: wavelength must be positive");
    if (!(length_um > 0.0 && length_um < mirror_radius_um))
        throw unstable_geometry_error("beam_waists: requires 0 < L < R");
    const double lambda_um = wavelength_nm * 1e-3;
    BeamWaists w;
    w.rayleigh_range_um = std::sqrt(length_um * (mirror_radius_um - length_um));
    w.w0_field_um = std::sqrt(lambda_um * w.rayleigh_range_um / constants::pi);
    const double ratio = length_um / w.rayleigh_range_um;
    w.w_mirror_field_um = w.w0_field_um * std::sqrt(1.0 + ratio * ratio);
    w.w0_intensity_um = w.w0_field_um / std::sqrt(2.0);
    w.w_mirror_intensity_um = w.w_mirror_field_um / std::sqrt(2.0);
    return w;
}

// Physicists' Hermite polynomial by the three-term recurrence.
inline double hermite(int order, double x)
{
    if (order < 0)
        throw invalid_argument("hermite: negative order");
    double prev = 1.0;
    if (order == 0)
        return prev;
    double cur = 2.0 * x;
    for (int k = 1; k < order; ++k)
    {
        const double next = 2.0 * x * cur - 2.0 * k * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

struct ModeImage
{
    int width = 0;
    int height = 0;
    double pitch_um = 1.0;
    double waist_intensity_um = 0.0;
    int n = 0;
    int m = 0;
    std::vector<double> pixels; // row-major, unit peak

    double at(int x, int y) const
    {
        return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
    // Pixel-center coordinate relative to the image center, um.
    double x_um(int x) const { return (x - 0.5 * (width - 1)) * pitch_um; }
    double y_um(int y) const { return (y - 0.5 * (height - 1)) * pitch_um; }
};

// Intensity [H_n(sqrt2 x/w) H_m(sqrt2 y/w)]^2 exp(-2(x^2+y^2)/w^2), w the field waist
// (= sqrt(2) * intensity waist), sampled at pixel centers, normalized to unit peak.
inline ModeImage hermite_gaussian_image(int n, int m, double waist_intensity_um, double pitch_um, int size_px)
{
    if (n < 0 || m < 0)
        throw invalid_argument("hermite_gaussian_image: negative mode order");
    if (!(waist_intensity_um > 0.0) || !(pitch_um > 0.0))
        throw invalid_argument("hermite_gaussian_image: waist and pitch must be positive");
    if (size_px < 16)
        throw invalid_argument("hermite_gaussian_image: size must be at least 16 px");

    ModeImage img;
    img.width = size_px;
    img.height = size_px;
    img.pitch_um = pitch_um;
    img.waist_intensity_um = waist_intensity_um;
    img.n = n;
    img.m = m;
    img.pixels.resize(static_cast<std::size_t>(size_px) * static_cast<std::size_t>(size_px));

    const double w = std::sqrt(2.0) * waist_intensity_um;
    std::vector<double> fx(static_cast<std::size_t>(size_px));
    std::vector<double> fy(static_cast<std::size_t>(size_px));
    for (int i = 0; i < size_px; ++i)
    {
        const double x = img.x_um(i);
        const double y = img.y_um(i);
        const double hx = hermite(n, std::sqrt(2.0) * x / w);
        const double hy = hermite(m, std::sqrt(2.0) * y / w);
        fx[static_cast<std::size_t>(i)] = hx * hx * std::exp(-2.0 * x * x / (w * w));
        fy[static_cast<std::size_t>(i)] = hy * hy * std::exp(-2.0 * y * y / (w * w));
    }
    double peak = 0.0;
    for (int y = 0; y < size_px; ++y)
        for (int x = 0; x < size_px; ++x)
        {
            const double v = fx[static_cast<std::size_t>(x)] * fy[static_cast<std::size_t>(y)];
            img.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(size_px) + static_cast<std::size_t>(x)] = v;
            peak = std::max(peak, v);
        }
    if (peak > 0.0)
        for (auto &v : img.pixels)
            v /= peak;
    return img;
}

enum class Axis
{
    x,
    y
};

struct LinecutFit
{
    double waist_intensity_um = 0.0; // 1/e intensity radius
    double center_um = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    double rms = 0.0;
};

// Gaussian A exp(-(x-x0)^2/w^2) + c fitted to the central row (Axis::x) or column.
inline LinecutFit fit_linecut(const ModeImage &img, Axis axis = Axis::x)
{
    const int count = axis == Axis::x ? img.width : img.height;
    if (count < 8)
        throw invalid_argument("fit_linecut: image too small");
    std::vector<double> x(static_cast<std::size_t>(count));
    std::vector<double> y(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
    {
        if (axis == Axis::x)
        {
            x[static_cast<std::size_t>(i)] = img.x_um(i);
            y[static_cast<std::size_t>(i)] = img.at(i, img.height / 2);
        }
        else
        {
            x[static_cast<std::size_t>(i)] = img.y_um(i);
            y[static_cast<std::size_t>(i)] = img.at(img.width / 2, i);
        }
    }
    const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double base = *std::min_element(y.begin(), y.end());
    const double amp = y[peak] - base;
    if (!(amp > 0.0))
        throw fit_error("fit_linecut: flat linecut");
    std::size_t lo = peak;
    while (lo > 0 && y[lo] - base > 0.5 * amp)
        --lo;
    std::size_t hi = peak;
    while (hi + 1 < y.size() && y[hi] - base > 0.5 * amp)
        ++hi;
    const double fwhm = std::max(x[hi] - x[lo], img.pitch_um);
    const double w_guess = fwhm / (2.0 * std::sqrt(std::log(2.0)));

    auto residuals = [&](const lsq::Vector &p) {
        lsq::Vector r(static_cast<Eigen::Index>(count));
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            const double d = (x[i] - p[1]) / p[2];
            r[static_cast<Eigen::Index>(i)] = p[0] * std::exp(-d * d) + p[3] - y[i];
        }
        return r;
    };
    lsq::Vector p0(4);
    p0 << amp, x[peak], w_guess, base;
    lsq::Vector scale(4);
    scale << amp, w_guess, w_guess, amp;
    const auto fit = lsq::levenberg_marquardt(residuals, p0, scale);
    const double w = std::abs(fit.params[2]);
    if (!fit.params.allFinite() || !(w > 0.0) || w > 10.0 * count * img.pitch_um)
        throw fit_error("fit_linecut: Gaussian fit diverged");
    return {w, fit.params[1], fit.params[0], fit.params[3], std::sqrt(fit.cost / count)};
}

inline double fit_linecut_waist(const ModeImage &img, Axis axis = Axis::x)
{
    return fit_linecut(img, axis).waist_intensity_um;
}

namespace io
{
// Plain (P2) portable graymap, maxval 65535.
inline void write_pgm(std::ostream &out, const ModeImage &img)
{
    out << "P2\n"
        << "# fpcav mode (" << img.n << "," << img.m << ")\n"
        << img.width << ' ' << img.height << "\n65535\n";
    for (int y = 0; y < img.height; ++y)
    {
        for (int x = 0; x < img.width; ++x)
        {
            const auto v = static_cast<long>(std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 65535.0));
            out << v << (x + 1 == img.width ? '\n' : ' ');
        }
    }
}

// Reads a P2 image; pixel values are scaled to [0, 1] by maxval.
inline ModeImage read_pgm(std::istream &in, double pitch_um)
{
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok)
        {
            if (tok.front() == '#')
            {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw format_error("pgm: unexpected end of file");
    };
    auto next_int = [&]() {
        const auto tok = next_token();
        try
        {
            std::size_t used = 0;
            const long v = std::stol(tok, &used);
            if (used != tok.size())
                throw format_error("pgm: bad integer '" + tok + "'");
            return v;
        }
        catch (const std::logic_error &)
        {
            throw format_error("pgm: bad integer '" + tok + "'");
        }
    };
    if (next_token() != "P2")
        throw format_error("pgm: only plain P2 graymaps are supported");
    ModeImage img;
    img.width = static_cast<int>(next_int());
    img.height = static_cast<int>(next_int());
    const long maxval = next_int();
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535)
        throw format_error("pgm: bad header");
    img.pitch_um = pitch_um;
    img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
    for (auto &p : img.pixels)
    {
        const long v = next_int();
        if (v < 0 || v > maxval)
            throw format_error("pgm: pixel value out of range");
        p = static_cast<double>(v) / static_cast<double>(maxval);
    }
    return img;
}

inline nlohmann::ordered_json image_metadata(const ModeImage &img)
{
    return {{"n", img.n},
            {"m", img.m},
            {"width_px", img.width},
            {"height_px", img.height},
            {"pitch_um", img.pitch_um},
            {"waist_intensity_um", img.waist_intensity_um},
            {"waist_field_um", img.waist_intensity_um * std::sqrt(2.0)}};
}
} // namespace io

} // namespace fpcav::gauss
