#pragma once

// Lineshape fits to measured spectra and length scans, finesse, integrated-signal
// enhancement and pump-power linearity.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "constants.hpp"
#include "errors.hpp"
#include "lsq.hpp"
#include "measured_spectrum.hpp"
#include "numerics.hpp"
#include "stack.hpp"
#include "tmm.hpp"

namespace fpcav::spectrafit
{
inline constexpr std::size_t min_fit_points = 8;

// Unit-peak Lorentzian.
inline double lorentzian(double x, double center, double fwhm)
{
    const double h = 0.5 * fwhm;
    const double d = x - center;
    return h * h / (d * d + h * h);
}

struct LorentzianFit
{
    double center = 0.0; // x units (nm)
    double fwhm = 0.0;   // x units (nm)
    double amplitude = 0.0;
    double offset = 0.0;
    double center_sigma = 0.0;
    double fwhm_sigma = 0.0;
    double amplitude_sigma = 0.0;
    double offset_sigma = 0.0;
    double rms_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string status;

    double fwhm_pm() const { return fwhm * 1e3; }
    double evaluate(double x) const { return amplitude * lorentzian(x, center, fwhm) + offset; }
};

// Failed fit with the best parameters reached.
class lorentzian_fit_error : public fit_error
{
public:
    lorentzian_fit_error(const std::string &what, LorentzianFit best) : fit_error(what), best_(std::move(best)) {}
    const LorentzianFit &best() const { return best_; }

private:
    LorentzianFit best_;
};

struct PeakGuess
{
    double center = 0.0;
    double fwhm = 0.0;
    double amplitude = 0.0;
    double base = 0.0;
    bool left_crossing = false;
    bool right_crossing = false;
};

// Peak location and half-maximum crossings (linear interpolation) above the minimum.
inline PeakGuess guess_peak(std::span<const double> x, std::span<const double> y)
{
    const auto ip = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double top = y[ip];
    const double base = *std::min_element(y.begin(), y.end());
    const double amp = top - base;
    if (!(amp > 1e-12 * std::max(std::abs(top), 1.0)))
        throw fit_error("flat data: no peak to fit");
    const double half = base + 0.5 * amp;
    PeakGuess g{x[ip], 0.0, amp, base, false, false};
    double left = x.front();
    double right = x.back();
    for (std::size_t i = ip; i-- > 0;)
        if (y[i] <= half)
        {
            left = x[i] + (half - y[i]) / (y[i + 1] - y[i]) * (x[i + 1] - x[i]);
            g.left_crossing = true;
            break;
        }
    for (std::size_t i = ip + 1; i < y.size(); ++i)
        if (y[i] <= half)
        {
            right = x[i - 1] + (y[i - 1] - half) / (y[i - 1] - y[i]) * (x[i] - x[i - 1]);
            g.right_crossing = true;
            break;
        }
    if (g.left_crossing && g.right_crossing)
        g.fwhm = right - left;
    else if (g.left_crossing)
        g.fwhm = 2.0 * (g.center - left);
    else if (g.right_crossing)
        g.fwhm = 2.0 * (right - g.center);
    else
        g.fwhm = 0.5 * (x.back() - x.front());
    const double spacing = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    g.fwhm = std::max(g.fwhm, spacing);
    return g;
}

namespace detail
{
inline void check_xy(std::span<const double> x, std::span<const double> y, const char *who)
{
    if (x.size() != y.size())
        throw invalid_argument(std::string(who) + ": x and y differ in length");
    if (x.size() < min_fit_points)
        throw invalid_argument(std::string(who) + ": at least 8 points required");
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw invalid_argument(std::string(who) + ": non-finite data");
        if (i > 0 && !(x[i] > x[i - 1]))
            throw invalid_argument(std::string(who) + ": x must be strictly increasing");
    }
}

inline double sigma(const lsq::Matrix &cov, Eigen::Index i)
{
    return cov.size() == 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(std::max(cov(i, i), 0.0));
}
} // namespace detail

// amplitude * (G/2)^2 / ((x - x0)^2 + (G/2)^2) + offset, least squares.
inline LorentzianFit fit_lorentzian(std::span<const double> x, std::span<const double> y)
{
    detail::check_xy(x, y, "fit_lorentzian");
    const auto g = guess_peak(x, y);
    auto residuals = [&](const lsq::Vector &p) {
        lsq::Vector r(static_cast<Eigen::Index>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = p[2] * lorentzian(x[i], p[0], p[1]) + p[3] - y[i];
        return r;
    };
    lsq::Vector p0(4);
    p0 << g.center, g.fwhm, g.amplitude, g.base;
    lsq::Vector scale(4);
    scale << g.fwhm, g.fwhm, g.amplitude, g.amplitude;
    const auto r = lsq::levenberg_marquardt(residuals, p0, scale);
    const auto cov = lsq::covariance(r);

    LorentzianFit f;
    f.center = r.params[0];
    f.fwhm = std::abs(r.params[1]);
    f.amplitude = r.params[2];
    f.offset = r.params[3];
    f.center_sigma = detail::sigma(cov, 0);
    f.fwhm_sigma = detail::sigma(cov, 1);
    f.amplitude_sigma = detail::sigma(cov, 2);
    f.offset_sigma = detail::sigma(cov, 3);
    f.rms_residual = std::sqrt(r.cost / static_cast<double>(x.size()));
    f.iterations = r.iterations;
    f.converged = r.converged;
    f.status = r.status;
    if (!r.converged)
        throw lorentzian_fit_error("fit_lorentzian: " + r.status, f);
    if (!r.params.allFinite() || !(f.fwhm > 0.0) || !(f.amplitude > 0.0) || f.center < x.front() ||
        f.center > x.back())
        throw lorentzian_fit_error("fit_lorentzian: fit left the data range", f);
    return f;
}

inline LorentzianFit fit_lorentzian(const MeasuredSpectrum &s)
{
    validate(s);
    return fit_lorentzian(s.wavelengths_nm, s.counts);
}

struct ProductFitOptions
{
    bool fix_stokes_center = true;
    bool fix_stokes_width = true;
};

struct ProductFit
{
    double cavity_center_nm = 0.0;
    double cavity_fwhm_pm = 0.0;
    double stokes_center_nm = 0.0;
    double stokes_fwhm_pm = 0.0;
    bool stokes_center_fixed = true;
    bool stokes_width_fixed = true;
    double amplitude = 0.0;
    double offset = 0.0;
    double cavity_center_sigma_nm = 0.0;
    double cavity_fwhm_sigma_pm = 0.0;
    double residual_norm = 0.0; // sqrt of the sum of squared residuals
    double rms_residual = 0.0;
    int iterations = 0;
    std::string status;

    double cavity_q() const { return cavity_center_nm / (cavity_fwhm_pm * 1e-3); }
    double evaluate(double x) const
    {
        return amplitude * lorentzian(x, cavity_center_nm, cavity_fwhm_pm * 1e-3) *
                   lorentzian(x, stokes_center_nm, stokes_fwhm_pm * 1e-3) +
               offset;
    }
};

// amplitude * L_c(x; lambda_c, dlambda_c) * L_s(x; lambda_s, dlambda_s) + offset with the
// Stokes parameters held fixed by default. Started from several cavity guesses; the
// lowest cost wins.
inline ProductFit fit_lorentzian_product(std::span<const double> x, std::span<const double> y,
                                         double stokes_center_nm, double stokes_fwhm_pm,
                                         const ProductFitOptions &opt = {})
{
    detail::check_xy(x, y, "fit_lorentzian_product");
    if (!(stokes_fwhm_pm > 0.0) || !std::isfinite(stokes_center_nm))
        throw invalid_argument("fit_lorentzian_product: Stokes width must be positive");
    const double ws = stokes_fwhm_pm * 1e-3;
    const auto g = guess_peak(x, y);

    // Full parameter vector: lambda_c, dlambda_c, amplitude, offset, lambda_s, dlambda_s.
    std::vector<int> free_index{0, 1, 2, 3};
    if (!opt.fix_stokes_center)
        free_index.push_back(4);
    if (!opt.fix_stokes_width)
        free_index.push_back(5);
    const auto nf = static_cast<Eigen::Index>(free_index.size());

    auto model = [&](const std::array<double, 6> &p, double xi) {
        return p[2] * lorentzian(xi, p[0], p[1]) * lorentzian(xi, p[4], p[5]) + p[3];
    };
    auto expand = [&](const lsq::Vector &v, std::array<double, 6> p) {
        for (Eigen::Index k = 0; k < nf; ++k)
            p[static_cast<std::size_t>(free_index[static_cast<std::size_t>(k)])] = v[k];
        return p;
    };

    // Cavity-centre starts: data maxima and the position that puts the product peak at
    // the observed maximum for equal widths.
    std::vector<double> centers{g.center, 2.0 * g.center - stokes_center_nm};
    {
        std::vector<double> yy(y.begin(), y.end());
        for (auto i : numerics::local_maxima(yy))
            if (y[i] - g.base > 0.3 * g.amplitude)
                centers.push_back(x[i]);
    }
    const std::vector<double> widths{0.5 * ws, ws, 2.0 * ws};

    std::optional<lsq::Result> best;
    std::array<double, 6> best_fixed{};
    for (double c0 : centers)
        for (double w0 : widths)
        {
            std::array<double, 6> p{c0, w0, 1.0, g.base, stokes_center_nm, ws};
            const double shape = lorentzian(g.center, c0, w0) * lorentzian(g.center, stokes_center_nm, ws);
            if (!(shape > 0.0))
                continue;
            p[2] = g.amplitude / shape;
            auto residuals = [&](const lsq::Vector &v) {
                const auto q = expand(v, p);
                lsq::Vector r(static_cast<Eigen::Index>(x.size()));
                for (std::size_t i = 0; i < x.size(); ++i)
                    r[static_cast<Eigen::Index>(i)] = model(q, x[i]) - y[i];
                return r;
            };
            lsq::Vector v0(nf);
            lsq::Vector scale(nf);
            const std::array<double, 6> typical{w0, w0, p[2], g.amplitude, ws, ws};
            for (Eigen::Index k = 0; k < nf; ++k)
            {
                const auto j = static_cast<std::size_t>(free_index[static_cast<std::size_t>(k)]);
                v0[k] = p[j];
                scale[k] = typical[j];
            }
            try
            {
                auto r = lsq::levenberg_marquardt(residuals, v0, scale);
                if (r.params.allFinite() && (!best || r.cost < best->cost))
                {
                    best = std::move(r);
                    best_fixed = p;
                }
            }
            catch (const fit_error &)
            {
            }
        }
    if (!best)
        throw fit_error("fit_lorentzian_product: no start converged");

    const auto p = expand(best->params, best_fixed);
    const auto cov = lsq::covariance(*best);
    ProductFit f;
    f.cavity_center_nm = p[0];
    f.cavity_fwhm_pm = std::abs(p[1]) * 1e3;
    f.amplitude = p[2];
    f.offset = p[3];
    f.stokes_center_nm = opt.fix_stokes_center ? stokes_center_nm : p[4];
    f.stokes_fwhm_pm = opt.fix_stokes_width ? stokes_fwhm_pm : std::abs(p[5]) * 1e3;
    f.stokes_center_fixed = opt.fix_stokes_center;
    f.stokes_width_fixed = opt.fix_stokes_width;
    f.cavity_center_sigma_nm = detail::sigma(cov, 0);
    f.cavity_fwhm_sigma_pm = detail::sigma(cov, 1) * 1e3;
    f.residual_norm = std::sqrt(best->cost);
    f.rms_residual = std::sqrt(best->cost / static_cast<double>(x.size()));
    f.iterations = best->iterations;
    f.status = best->status;
    if (!best->converged)
        throw fit_error("fit_lorentzian_product: " + best->status);
    if (!(f.cavity_fwhm_pm > 0.0) || !(f.amplitude > 0.0))
        throw fit_error("fit_lorentzian_product: degenerate solution");
    return f;
}

inline ProductFit fit_lorentzian_product(const MeasuredSpectrum &s, double stokes_center_nm, double stokes_fwhm_pm,
                                         const ProductFitOptions &opt = {})
{
    validate(s);
    return fit_lorentzian_product(s.wavelengths_nm, s.counts, stokes_center_nm, stokes_fwhm_pm, opt);
}

struct FinesseFit
{
    double finesse = 0.0;
    double fwhm_nm = 0.0; // in air gap
    double center_nm = 0.0;
    LorentzianFit line;
};

// F = (lambda / 2) / FWHM of a Lorentzian fitted to intensity versus air gap.
inline FinesseFit finesse_from_length_scan(std::span<const double> gaps_nm, std::span<const double> intensity,
                                           double wavelength_nm)
{
    if (!(wavelength_nm > 0.0))
        throw invalid_argument("finesse_from_length_scan: wavelength must be positive");
    detail::check_xy(gaps_nm, intensity, "finesse_from_length_scan");
    const auto g = guess_peak(gaps_nm, intensity);
    const double spacing = (gaps_nm.back() - gaps_nm.front()) / static_cast<double>(gaps_nm.size() - 1);
    if (!g.left_crossing || !g.right_crossing || g.fwhm < 2.0 * spacing)
        throw fit_error("finesse_from_length_scan: resonance not resolved by the scan");
    FinesseFit f;
    f.line = fit_lorentzian(gaps_nm, intensity);
    f.fwhm_nm = f.line.fwhm;
    f.center_nm = f.line.center;
    f.finesse = 0.5 * wavelength_nm / f.fwhm_nm;
    return f;
}

// pi (R1 R2)^(1/4) / (1 - sqrt(R1 R2)).
inline double design_finesse(double r1, double r2)
{
    if (!(r1 > 0.0 && r1 < 1.0) || !(r2 > 0.0 && r2 < 1.0))
        throw invalid_argument("design_finesse: reflectances must lie in (0, 1)");
    const double rr = std::sqrt(r1 * r2);
    return constants::pi * std::sqrt(rr) / (1.0 - rr);
}

inline double design_finesse(const CavityAssembly &c, double wavelength_nm)
{
    return design_finesse(tmm::response(c.bottom_mirror, wavelength_nm).R,
                          tmm::response(c.top_mirror, wavelength_nm).R);
}

struct EnhancementRatio
{
    double ratio = 0.0;
    double on_integral = 0.0; // counts * nm per (s, mW) as normalized
    double off_integral = 0.0;
};

namespace detail
{
inline double normalized_integral(const MeasuredSpectrum &s, bool subtract_background)
{
    validate(s);
    if (s.size() < 2)
        throw invalid_argument("enhancement_ratio: spectrum needs at least two points");
    std::vector<double> y = s.counts;
    if (subtract_background)
    {
        const double b = 0.5 * (y.front() + y.back());
        for (auto &v : y)
            v -= b;
    }
    double v = numerics::trapezoid(s.wavelengths_nm, y);
    if (s.integration_time_s)
        v /= *s.integration_time_s;
    if (s.power_mW)
        v /= *s.power_mW;
    return v;
}
} // namespace detail

// Ratio of wavelength-integrated signals, each divided by its integration time and pump
// power when those are present. With `subtract_background` the mean of the two end
// points is removed first.
inline EnhancementRatio enhancement_ratio(const MeasuredSpectrum &on, const MeasuredSpectrum &off,
                                          bool subtract_background = false)
{
    EnhancementRatio r;
    r.on_integral = detail::normalized_integral(on, subtract_background);
    r.off_integral = detail::normalized_integral(off, subtract_background);
    if (!(std::abs(r.off_integral) > 0.0))
        throw numeric_error("enhancement_ratio: off-cavity signal integrates to zero");
    r.ratio = r.on_integral / r.off_integral;
    return r;
}

struct Linearity
{
    double exponent = 0.0; // log-log slope
    double exponent_sigma = 0.0;
    double slope = 0.0; // signal per mW, straight-line fit
    double intercept = 0.0;
    std::string verdict; // "linear", "super-linear" or "sub-linear"
};

inline constexpr double linear_band_low = 0.9;
inline constexpr double linear_band_high = 1.1;

// Ordinary least squares on log(signal) versus log(power), plus a straight line.
inline Linearity power_linearity(std::span<const double> power_mW, std::span<const double> signal)
{
    if (power_mW.size() != signal.size())
        throw invalid_argument("power_linearity: arrays differ in length");
    if (power_mW.size() < 3)
        throw invalid_argument("power_linearity: at least 3 points required");
    for (std::size_t i = 0; i < power_mW.size(); ++i)
        if (!(power_mW[i] > 0.0) || !(signal[i] > 0.0) || !std::isfinite(power_mW[i]) || !std::isfinite(signal[i]))
            throw invalid_argument("power_linearity: powers and signals must be positive");

    auto ols = [](std::span<const double> x, std::span<const double> y) {
        const auto n = static_cast<double>(x.size());
        double mx = 0.0;
        double my = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            mx += x[i];
            my += y[i];
        }
        mx /= n;
        my /= n;
        double sxx = 0.0;
        double sxy = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        if (!(sxx > 0.0))
            throw invalid_argument("power_linearity: powers must not all be equal");
        const double b = sxy / sxx;
        const double a = my - b * mx;
        double sse = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            sse += std::pow(y[i] - a - b * x[i], 2);
        const double sb = x.size() > 2 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
        return std::array<double, 3>{b, a, sb};
    };

    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < power_mW.size(); ++i)
    {
        lx.push_back(std::log(power_mW[i]));
        ly.push_back(std::log(signal[i]));
    }
    Linearity out;
    const auto loglog = ols(lx, ly);
    out.exponent = loglog[0];
    out.exponent_sigma = loglog[2];
    const auto line = ols(power_mW, signal);
    out.slope = line[0];
    out.intercept = line[1];
    out.verdict = out.exponent > linear_band_high  ? "super-linear"
                  : out.exponent < linear_band_low ? "sub-linear"
                                                   : "linear";
    return out;
}

namespace io
{
inline nlohmann::ordered_json to_json(const LorentzianFit &f)
{
    return {{"center_nm", f.center},         {"center_sigma_nm", f.center_sigma},
            {"fwhm_pm", f.fwhm_pm()},        {"fwhm_sigma_pm", f.fwhm_sigma * 1e3},
            {"amplitude", f.amplitude},      {"amplitude_sigma", f.amplitude_sigma},
            {"offset", f.offset},            {"offset_sigma", f.offset_sigma},
            {"rms_residual", f.rms_residual}, {"iterations", f.iterations},
            {"status", f.status}};
}

inline nlohmann::ordered_json to_json(const ProductFit &f)
{
    return {{"cavity_center_nm", f.cavity_center_nm},
            {"cavity_center_sigma_nm", f.cavity_center_sigma_nm},
            {"cavity_fwhm_pm", f.cavity_fwhm_pm},
            {"cavity_fwhm_sigma_pm", f.cavity_fwhm_sigma_pm},
            {"cavity_q", f.cavity_q()},
            {"stokes_center_nm", f.stokes_center_nm},
            {"stokes_center_fixed", f.stokes_center_fixed},
            {"stokes_fwhm_pm", f.stokes_fwhm_pm},
            {"stokes_fwhm_fixed", f.stokes_width_fixed},
            {"amplitude", f.amplitude},
            {"offset", f.offset},
            {"residual_norm", f.residual_norm},
            {"rms_residual", f.rms_residual},
            {"iterations", f.iterations},
            {"status", f.status}};
}

inline nlohmann::ordered_json to_json(const Linearity &l)
{
    return {{"exponent", l.exponent},
            {"exponent_sigma", l.exponent_sigma},
            {"slope_per_mW", l.slope},
            {"intercept", l.intercept},
            {"verdict", l.verdict}};
}
} // namespace io

} // namespace fpcav::spectrafit
