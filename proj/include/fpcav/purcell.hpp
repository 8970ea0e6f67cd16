#pragma once

// Vacuum-field quantization of a 1-D cavity profile, effective mode volume, Purcell
// factor and the cavity/confocal signal budget.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "constants.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "stack.hpp"
#include "tmm.hpp"

namespace fpcav::purcell
{
struct QuantizedField
{
    tmm::FieldProfile profile; // |E| in V/m
    double scale = 0.0;        // factor applied to the input profile
    double waist_intensity_um = 0.0;
    double wavelength_nm = 0.0;
    double photon_energy_J = 0.0;
    double normalization_J = 0.0; // left-hand side of the normalization after scaling
    double max_field_V_per_m = 0.0;
    double max_field_z_nm = 0.0;
    std::vector<std::size_t> region; // segments searched for the maximum
};

namespace detail
{
// Integral of n^2 |E|^2 dz over all layers, nm * field^2.
inline double weighted_integral(const tmm::FieldProfile &p)
{
    double s = 0.0;
    for (const auto &seg : p.segments)
        s += seg.refractive_index * seg.refractive_index * seg.intensity_integral();
    return s;
}

// Position of the maximum of |E| inside one segment.
inline double argmax_in(const tmm::FieldSegment &seg)
{
    const auto r = numerics::golden_section_max([&](double s) { return std::abs(seg.field(s)); }, 0.0,
                                                seg.thickness_nm, 1e-6);
    double best = r.x;
    for (double s : {0.0, seg.thickness_nm})
        if (std::abs(seg.field(s)) > std::abs(seg.field(best)))
            best = s;
    return best;
}
} // namespace detail

// Rescales `profile` so that 2 pi (w_I^2 / 4) * integral eps0 n^2 |E|^2 dz = hbar omega / 2,
// with a constant waist along z. The maximum is taken over the segments in `region`
// (all segments if empty).
inline QuantizedField quantize_field(const tmm::FieldProfile &profile, double waist_intensity_um,
                                     double wavelength_nm, std::vector<std::size_t> region = {})
{
    if (!(waist_intensity_um > 0.0) || !std::isfinite(waist_intensity_um))
        throw invalid_argument("quantize_field: waist must be positive");
    if (!(wavelength_nm > 0.0))
        throw invalid_argument("quantize_field: wavelength must be positive");
    if (profile.segments.empty())
        throw invalid_argument("quantize_field: empty profile");
    for (auto i : region)
        if (i >= profile.segments.size())
            throw invalid_argument("quantize_field: region index out of range");
    if (region.empty())
        for (std::size_t i = 0; i < profile.segments.size(); ++i)
            region.push_back(i);

    const double integral_m = detail::weighted_integral(profile) * constants::nm;
    if (!(integral_m > 0.0) || !std::isfinite(integral_m))
        throw invalid_argument("quantize_field: zero-field profile");

    QuantizedField q;
    q.waist_intensity_um = waist_intensity_um;
    q.wavelength_nm = wavelength_nm;
    q.photon_energy_J = constants::photon_energy(wavelength_nm);
    const double w = waist_intensity_um * constants::um;
    const double transverse = 2.0 * constants::pi * w * w / 4.0;
    q.scale = std::sqrt(0.5 * q.photon_energy_J / (transverse * constants::vacuum_permittivity * integral_m));

    q.profile = profile;
    for (auto &seg : q.profile.segments)
    {
        seg.E0 *= q.scale;
        seg.H0 *= q.scale;
    }
    for (auto &e : q.profile.abs_E)
        e *= q.scale;
    q.normalization_J = transverse * constants::vacuum_permittivity * detail::weighted_integral(q.profile) *
                        constants::nm;

    q.region = region;
    for (auto i : region)
    {
        const auto &seg = q.profile.segments[i];
        const double e = seg.max_abs_field();
        if (e > q.max_field_V_per_m)
        {
            q.max_field_V_per_m = e;
            q.max_field_z_nm = seg.z_start_nm + detail::argmax_in(seg);
        }
    }
    return q;
}

// Profile of the assembled cavity at `wavelength_nm`, maximum searched in the membrane.
inline QuantizedField quantize_cavity(const CavityAssembly &c, double waist_intensity_um, double wavelength_nm,
                                      double step_nm = 1.0)
{
    if (!(c.membrane_thickness_nm > 0.0))
        throw invalid_argument("quantize_cavity: cavity has no membrane");
    const auto profile = tmm::field_profile(flatten(c), wavelength_nm, step_nm);
    return quantize_field(profile, waist_intensity_um, wavelength_nm, {c.membrane_index()});
}

struct ModeVolume
{
    double cubic_wavelengths = 0.0; // units of (lambda / n_host)^3
    double cubic_um = 0.0;
};

// V = (hbar omega / 2) / (eps0 n^2 |E_max|^2).
inline ModeVolume mode_volume(double max_field_V_per_m, double photon_energy_J, double n_host, double wavelength_nm)
{
    if (!(max_field_V_per_m > 0.0))
        throw invalid_argument("mode_volume: field maximum must be positive");
    if (!(n_host >= 1.0))
        throw invalid_argument("mode_volume: host index must be >= 1");
    const double v_m3 =
        0.5 * photon_energy_J / (constants::vacuum_permittivity * n_host * n_host * max_field_V_per_m * max_field_V_per_m);
    const double cube = std::pow(wavelength_nm * constants::nm / n_host, 3);
    return {v_m3 / cube, v_m3 * 1e18};
}

inline ModeVolume mode_volume(const QuantizedField &f, double n_host)
{
    return mode_volume(f.max_field_V_per_m, f.photon_energy_J, n_host, f.wavelength_nm);
}

// Inverse of mode_volume: field maximum for a given V in (lambda/n)^3.
inline double field_from_volume(double cubic_wavelengths, double n_host, double wavelength_nm)
{
    if (!(cubic_wavelengths > 0.0))
        throw invalid_argument("field_from_volume: volume must be positive");
    const double v_m3 = cubic_wavelengths * std::pow(wavelength_nm * constants::nm / n_host, 3);
    return std::sqrt(0.5 * constants::photon_energy(wavelength_nm) /
                     (constants::vacuum_permittivity * n_host * n_host * v_m3));
}

inline constexpr double default_averaging = 0.5;

// F_P = 1 + 3/(4 pi^2) Q / V * averaging, V in (lambda/n)^3.
inline double purcell_factor(double q, double v_cubic_wavelengths, double averaging = default_averaging)
{
    if (!(q >= 0.0) || !std::isfinite(q))
        throw invalid_argument("purcell_factor: Q must be non-negative");
    if (!(v_cubic_wavelengths > 0.0))
        throw invalid_argument("purcell_factor: mode volume must be positive");
    if (!(averaging > 0.0 && averaging <= 1.0))
        throw invalid_argument("purcell_factor: averaging must lie in (0, 1]");
    return 1.0 + 3.0 / (4.0 * constants::pi * constants::pi) * q / v_cubic_wavelengths * averaging;
}

// Collection without the top mirror, bottom-mirror reflection included.
inline double eta_objective(double na, double n_host)
{
    if (!(na >= 0.0) || !(n_host > 0.0) || !(na < n_host))
        throw invalid_argument("eta_objective: need 0 <= NA < n_host");
    const double s = na / n_host;
    return 1.0 - std::sqrt(1.0 - s * s);
}

inline double beta_factor(double purcell)
{
    if (!(purcell >= 0.0))
        throw invalid_argument("beta: Purcell factor must be non-negative");
    return purcell / (purcell + 1.0);
}

inline double eta_cavity(double kappa_top, double kappa_bottom, double purcell)
{
    if (!(kappa_top >= 0.0) || !(kappa_bottom >= 0.0))
        throw invalid_argument("eta_cavity: loss rates must be non-negative");
    if (!(kappa_top + kappa_bottom > 0.0))
        throw invalid_argument("eta_cavity: loss rates are both zero");
    return kappa_top / (kappa_top + kappa_bottom) * beta_factor(purcell);
}

struct MirrorRates
{
    double kappa_top = 0.0; // proportional to power transmittance
    double kappa_bottom = 0.0;
    double top_fraction() const { return kappa_top / (kappa_top + kappa_bottom); }
};

// Loss rates proportional to the lossless mirror transmittances at the wavelength.
inline MirrorRates mirror_rates(const CavityAssembly &c, double wavelength_nm)
{
    return {tmm::response(c.top_mirror, wavelength_nm).T, tmm::response(c.bottom_mirror, wavelength_nm).T};
}

enum class Provenance
{
    computed,
    supplied
};

inline const char *to_string(Provenance p) { return p == Provenance::computed ? "computed" : "supplied"; }

struct Factor
{
    double value = 0.0;
    Provenance provenance = Provenance::supplied;
};

struct EnhancementBudget
{
    Factor purcell;
    Factor beta;
    Factor eta_objective;
    Factor eta_cavity;
    std::optional<Factor> kappa_top;
    std::optional<Factor> kappa_bottom;
    Factor q_cavity;
    Factor q_stokes;
    double spectral_overlap = 0.0; // Q_s / (Q_s + Q_c)
    double collection_gain = 0.0;  // eta_c / eta_o
    double predicted_ratio = 0.0;  // S_c / S_o
    std::optional<double> measured_ratio;
};

// S_c / S_o = F_P * Q_s / (Q_s + Q_c) * eta_c / eta_o.
inline EnhancementBudget enhancement_budget(double purcell, double q_stokes, double q_cavity, double eta_c,
                                            double eta_o)
{
    if (!(purcell > 0.0) || !(q_stokes > 0.0) || !(q_cavity >= 0.0) || !(eta_c > 0.0) || !(eta_o > 0.0))
        throw invalid_argument("enhancement_budget: inputs must be positive");
    if (eta_c > 1.0 || eta_o > 1.0)
        throw invalid_argument("enhancement_budget: efficiencies must not exceed 1");
    EnhancementBudget b;
    b.purcell = {purcell, Provenance::supplied};
    b.beta = {beta_factor(purcell), Provenance::computed};
    b.eta_objective = {eta_o, Provenance::supplied};
    b.eta_cavity = {eta_c, Provenance::supplied};
    b.q_cavity = {q_cavity, Provenance::supplied};
    b.q_stokes = {q_stokes, Provenance::supplied};
    b.spectral_overlap = q_stokes / (q_stokes + q_cavity);
    b.collection_gain = eta_c / eta_o;
    b.predicted_ratio = purcell * b.spectral_overlap * b.collection_gain;
    return b;
}

// Budget with eta_c from the mirror rates and eta_o from the objective NA.
inline EnhancementBudget enhancement_budget(double purcell, double q_stokes, double q_cavity, MirrorRates rates,
                                            double na, double n_host)
{
    const double eta_c = eta_cavity(rates.kappa_top, rates.kappa_bottom, purcell);
    const double eta_o = eta_objective(na, n_host);
    auto b = enhancement_budget(purcell, q_stokes, q_cavity, eta_c, eta_o);
    b.eta_cavity.provenance = Provenance::computed;
    b.eta_objective.provenance = Provenance::computed;
    b.kappa_top = Factor{rates.kappa_top, Provenance::computed};
    b.kappa_bottom = Factor{rates.kappa_bottom, Provenance::computed};
    return b;
}

namespace io
{
inline nlohmann::ordered_json budget_to_json(const EnhancementBudget &b)
{
    auto factor = [](const Factor &f) {
        return nlohmann::ordered_json{{"value", f.value}, {"provenance", to_string(f.provenance)}};
    };
    nlohmann::ordered_json j;
    j["purcell_factor"] = factor(b.purcell);
    j["beta"] = factor(b.beta);
    if (b.kappa_top)
        j["kappa_top"] = factor(*b.kappa_top);
    if (b.kappa_bottom)
        j["kappa_bottom"] = factor(*b.kappa_bottom);
    j["eta_cavity"] = factor(b.eta_cavity);
    j["eta_objective"] = factor(b.eta_objective);
    j["q_cavity"] = factor(b.q_cavity);
    j["q_stokes"] = factor(b.q_stokes);
    j["spectral_overlap"] = b.spectral_overlap;
    j["collection_gain"] = b.collection_gain;
    j["predicted_ratio"] = b.predicted_ratio;
    if (b.measured_ratio)
    {
        j["measured_ratio"] = *b.measured_ratio;
        j["relative_difference"] = b.predicted_ratio / *b.measured_ratio - 1.0;
    }
    return j;
}
} // namespace io

} // namespace fpcav::purcell
