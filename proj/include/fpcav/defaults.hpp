#pragma once

// Physical defaults shared by the CLI and the acceptance suite. Loaded from the JSON
// file named by FPCAV_DEFAULTS, else the file shipped in data/, else built-in values
// identical to that file.

#include <array>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "stack.hpp"
#include "stack_io.hpp"

namespace fpcav
{
struct Defaults
{
    MaterialRegistry registry = materials::standard_registry();

    double pump_nm = 532.0;
    double shift_invcm = 1335.0;
    double narrowband_pump_nm = 636.0;
    double laser_linewidth_ghz = 15.0;

    LayerStack bottom_mirror;
    LayerStack top_mirror;
    Material membrane = materials::diamond();
    Material gap = materials::air();
    double membrane_nm = 772.0;
    double air_gap_nm = 2596.0;

    double mirror_radius_um = 10.0;
    double length_um = 4.07;

    std::array<double, 2> slopes_pm_per_nm{87.0, 83.0};
    double fit_membrane_min_nm = 300.0;
    double fit_membrane_max_nm = 1500.0;
    double fit_gap_min_nm = 500.0;
    double fit_gap_max_nm = 6000.0;
    double fit_membrane_step_nm = 2.0;
    double fit_tolerance_pm_per_nm = 1.0;
    std::optional<double> fit_nominal_membrane_nm = 800.0;
    std::optional<double> fit_nominal_gap_nm;

    double waist_intensity_um = 0.77;
    double q_cavity = 8200.0;
    double averaging = 0.5;

    double stokes_fwhm_pm = 71.0;
    double na = 0.4;
    double na_high = 0.9;
    double measured_ratio = 58.8;
    double finesse = 350.0;

    std::string source = "built-in";

    // Mirrors with the cavity media as incident sides, membrane and gap at the defaults.
    CavityAssembly cavity() const
    {
        return assemble_cavity(bottom_mirror, membrane_nm, air_gap_nm, top_mirror, membrane, gap);
    }
};

namespace detail
{
template <class T>
void take(const nlohmann::json &obj, const char *key, T &out)
{
    if (!obj.contains(key))
        return;
    try
    {
        out = obj.at(key).get<T>();
    }
    catch (const nlohmann::json::exception &e)
    {
        throw format_error(std::string("defaults: bad value for '") + key + "': " + e.what());
    }
}

inline const nlohmann::json &section(const nlohmann::json &doc, const char *key)
{
    static const nlohmann::json empty = nlohmann::json::object();
    if (!doc.contains(key))
        return empty;
    if (!doc.at(key).is_object())
        throw format_error(std::string("defaults: '") + key + "' must be an object");
    return doc.at(key);
}

inline LayerStack builtin_mirror(double center, int pairs, const Material &incident)
{
    return build_quarter_wave_dbr(center, pairs, materials::ta2o5(), materials::sio2(), materials::silica(), incident);
}
} // namespace detail

inline Defaults defaults_from_json(const nlohmann::json &doc)
{
    if (!doc.is_object())
        throw format_error("defaults: document must be a JSON object");
    Defaults d;
    d.registry = io::registry_from_json(doc, materials::standard_registry());
    auto material = [&](const std::string &name) {
        if (!d.registry.contains(name))
            throw format_error("defaults: unknown material '" + name + "'");
        return d.registry.at(name);
    };

    const auto &raman = detail::section(doc, "raman");
    detail::take(raman, "pump_nm", d.pump_nm);
    detail::take(raman, "shift_invcm", d.shift_invcm);
    detail::take(raman, "narrowband_pump_nm", d.narrowband_pump_nm);
    detail::take(raman, "laser_linewidth_ghz", d.laser_linewidth_ghz);

    const auto &cavity = detail::section(doc, "cavity");
    std::string membrane = d.membrane.name;
    std::string gap = d.gap.name;
    detail::take(cavity, "membrane", membrane);
    detail::take(cavity, "gap", gap);
    d.membrane = material(membrane);
    d.gap = material(gap);
    detail::take(cavity, "membrane_nm", d.membrane_nm);
    detail::take(cavity, "air_gap_nm", d.air_gap_nm);

    const auto &mirrors = detail::section(doc, "mirrors");
    d.bottom_mirror = mirrors.contains("bottom") ? io::stack_from_json(mirrors.at("bottom"), d.registry)
                                                 : detail::builtin_mirror(625.0, 15, d.membrane);
    d.top_mirror = mirrors.contains("top") ? io::stack_from_json(mirrors.at("top"), d.registry)
                                           : detail::builtin_mirror(629.0, 14, d.gap);

    const auto &gauss = detail::section(doc, "gauss");
    detail::take(gauss, "mirror_radius_um", d.mirror_radius_um);
    detail::take(gauss, "length_um", d.length_um);

    const auto &fit = detail::section(doc, "geometry_fit");
    detail::take(fit, "slopes_pm_per_nm", d.slopes_pm_per_nm);
    detail::take(fit, "membrane_min_nm", d.fit_membrane_min_nm);
    detail::take(fit, "membrane_max_nm", d.fit_membrane_max_nm);
    detail::take(fit, "gap_min_nm", d.fit_gap_min_nm);
    detail::take(fit, "gap_max_nm", d.fit_gap_max_nm);
    detail::take(fit, "membrane_step_nm", d.fit_membrane_step_nm);
    detail::take(fit, "tolerance_pm_per_nm", d.fit_tolerance_pm_per_nm);
    d.fit_nominal_membrane_nm.reset();
    if (fit.contains("nominal_membrane_nm") && !fit.at("nominal_membrane_nm").is_null())
        d.fit_nominal_membrane_nm = fit.at("nominal_membrane_nm").get<double>();
    if (fit.contains("nominal_gap_nm") && !fit.at("nominal_gap_nm").is_null())
        d.fit_nominal_gap_nm = fit.at("nominal_gap_nm").get<double>();

    detail::take(detail::section(doc, "quantization"), "waist_intensity_um", d.waist_intensity_um);
    const auto &purcell = detail::section(doc, "purcell");
    detail::take(purcell, "q_cavity", d.q_cavity);
    detail::take(purcell, "averaging", d.averaging);
    const auto &budget = detail::section(doc, "budget");
    detail::take(budget, "stokes_fwhm_pm", d.stokes_fwhm_pm);
    detail::take(budget, "na", d.na);
    detail::take(budget, "na_high", d.na_high);
    detail::take(budget, "measured_ratio", d.measured_ratio);
    detail::take(detail::section(doc, "spectra"), "finesse", d.finesse);
    return d;
}

inline Defaults builtin_defaults()
{
    Defaults d;
    d.bottom_mirror = detail::builtin_mirror(625.0, 15, d.membrane);
    d.top_mirror = detail::builtin_mirror(629.0, 14, d.gap);
    return d;
}

inline Defaults read_defaults(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw format_error("defaults: cannot open '" + path + "'");
    nlohmann::json doc;
    try
    {
        doc = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::parse_error &e)
    {
        throw format_error("defaults: " + path + ": " + e.what());
    }
    auto d = defaults_from_json(doc);
    d.source = path;
    return d;
}

// FPCAV_DEFAULTS, then the shipped file, then built-in values.
inline Defaults load_defaults()
{
    if (const char *env = std::getenv("FPCAV_DEFAULTS"); env && *env)
        return read_defaults(env);
#ifdef FPCAV_DEFAULTS_PATH
    if (std::ifstream probe(FPCAV_DEFAULTS_PATH); probe)
        return read_defaults(FPCAV_DEFAULTS_PATH);
#endif
    return builtin_defaults();
}

} // namespace fpcav
