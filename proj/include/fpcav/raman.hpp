#pragma once

// Stokes kinematics and linewidth bookkeeping.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "constants.hpp"
#include "errors.hpp"

namespace fpcav::raman
{
// First-order Stokes shift of diamond as measured in the device, and the textbook value.
inline constexpr double diamond_shift_invcm = 1335.0;
inline constexpr double diamond_shift_literature_invcm = 1332.0;

struct RamanShift
{
    double invcm = diamond_shift_invcm;
};

inline void validate(const RamanShift &s)
{
    if (!std::isfinite(s.invcm) || s.invcm < 0.0)
        throw invalid_argument("raman shift must be finite and non-negative");
}

// Negative shifts give the anti-Stokes line; only used for round trips.
inline double shifted_wavelength(double pump_nm, double shift_invcm)
{
    if (!(pump_nm > 0.0) || !std::isfinite(pump_nm))
        throw invalid_argument("stokes_wavelength: pump wavelength must be positive");
    if (!std::isfinite(shift_invcm))
        throw invalid_argument("stokes_wavelength: shift must be finite");
    const double k = 1e7 / pump_nm - shift_invcm; // cm^-1
    if (!(k > 0.0))
        throw invalid_argument("stokes_wavelength: shift exceeds the pump wavenumber");
    return 1e7 / k;
}

inline double stokes_wavelength(double pump_nm, RamanShift shift = {})
{
    validate(shift);
    return shifted_wavelength(pump_nm, shift.invcm);
}

inline double stokes_wavelength(double pump_nm, double shift_invcm)
{
    return stokes_wavelength(pump_nm, RamanShift{shift_invcm});
}

// Pump wavelength that produces `stokes_nm`.
inline double pump_wavelength(double stokes_nm, RamanShift shift = {})
{
    validate(shift);
    return shifted_wavelength(stokes_nm, -shift.invcm);
}

enum class LinewidthUnit
{
    pm,
    ghz,
    q
};

inline std::string_view to_string(LinewidthUnit u)
{
    switch (u)
    {
    case LinewidthUnit::pm:
        return "pm";
    case LinewidthUnit::ghz:
        return "GHz";
    case LinewidthUnit::q:
        return "Q";
    }
    return "?";
}

inline LinewidthUnit parse_linewidth_unit(std::string_view s)
{
    if (s == "pm")
        return LinewidthUnit::pm;
    if (s == "GHz" || s == "ghz")
        return LinewidthUnit::ghz;
    if (s == "Q" || s == "q")
        return LinewidthUnit::q;
    throw invalid_argument("unknown linewidth unit '" + std::string(s) + "' (expected pm, GHz or Q)");
}

struct Linewidth
{
    double value = 0.0;
    LinewidthUnit unit = LinewidthUnit::pm;
    std::optional<double> reference_nm;
};

// delta_nu = c delta_lambda / lambda^2, Q = lambda / delta_lambda.
inline double linewidth_convert(double value, LinewidthUnit from, LinewidthUnit to,
                                std::optional<double> reference_nm = std::nullopt)
{
    if (!(value > 0.0) || !std::isfinite(value))
        throw invalid_argument("linewidth_convert: value must be positive");
    if (from == to)
        return value;
    if (!reference_nm)
        throw invalid_argument("linewidth_convert: reference wavelength required");
    const double lambda = *reference_nm;
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw invalid_argument("linewidth_convert: reference wavelength must be positive");

    double dl_nm = 0.0;
    switch (from)
    {
    case LinewidthUnit::pm:
        dl_nm = value * 1e-3;
        break;
    case LinewidthUnit::ghz:
        dl_nm = value * 1e9 * lambda * lambda * 1e-9 / constants::speed_of_light;
        break;
    case LinewidthUnit::q:
        dl_nm = lambda / value;
        break;
    }
    switch (to)
    {
    case LinewidthUnit::pm:
        return dl_nm * 1e3;
    case LinewidthUnit::ghz:
        return constants::speed_of_light * dl_nm / (lambda * lambda * 1e-9) * 1e-9;
    case LinewidthUnit::q:
        return lambda / dl_nm;
    }
    return value;
}

inline Linewidth convert(const Linewidth &w, LinewidthUnit to)
{
    return {linewidth_convert(w.value, w.unit, to, w.reference_nm), to, w.reference_nm};
}

// Lorentzian widths add under convolution.
inline double deconvolve_lorentzian(double total_ghz, double component_ghz)
{
    if (!std::isfinite(total_ghz) || !std::isfinite(component_ghz) || component_ghz < 0.0)
        throw invalid_argument("deconvolve_lorentzian: widths must be finite and non-negative");
    if (!(total_ghz > component_ghz))
        throw invalid_argument("deconvolve_lorentzian: total width must exceed the component");
    return total_ghz - component_ghz;
}

// tau = 1 / (2 pi FWHM), ps.
inline double phonon_lifetime_ps(double fwhm_ghz)
{
    if (!(fwhm_ghz > 0.0) || !std::isfinite(fwhm_ghz))
        throw invalid_argument("phonon_lifetime: linewidth must be positive");
    return 1.0 / (2.0 * constants::pi * fwhm_ghz * 1e9) * 1e12;
}

} // namespace fpcav::raman
