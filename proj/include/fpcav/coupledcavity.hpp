#pragma once

// Coupled membrane/air cavity: resonance wavelengths versus air gap, dispersion slopes,
// mode-number identification, (t_d, t_a) inference from two slopes, and the
// diamond-like / air-like classification.
//
// Slopes are reported in pm of resonance wavelength per nm of air gap.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measured_spectrum.hpp"
#include "numerics.hpp"
#include "stack.hpp"
#include "tmm.hpp"

namespace fpcav::coupled
{
// Transmittance of a cavity as a function of (t_d, t_a, lambda) with the mirrors
// compiled once.
class CavityModel
{
public:
    explicit CavityModel(const CavityAssembly &c) : assembly_(c)
    {
        validate(c.bottom_mirror);
        validate(c.top_mirror);
        std::vector<Layer> bottom(c.bottom_mirror.layers.rbegin(), c.bottom_mirror.layers.rend());
        bottom_ = tmm::CompiledStack(bottom);
        top_ = tmm::CompiledStack(c.top_mirror.layers);
        n_in_ = c.bottom_mirror.exit.refractive_index;
        n_out_ = c.top_mirror.exit.refractive_index;
    }

    tmm::Matrix2 matrix(double membrane_nm, double gap_nm, double wavelength_nm) const
    {
        return bottom_.matrix(wavelength_nm) *
               tmm::characteristic_matrix(assembly_.membrane.refractive_index, membrane_nm, wavelength_nm) *
               tmm::characteristic_matrix(assembly_.gap.refractive_index, gap_nm, wavelength_nm) *
               top_.matrix(wavelength_nm);
    }

    double transmittance(double membrane_nm, double gap_nm, double wavelength_nm) const
    {
        return tmm::response(matrix(membrane_nm, gap_nm, wavelength_nm), n_in_, n_out_).T;
    }

    const CavityAssembly &assembly() const { return assembly_; }

private:
    CavityAssembly assembly_;
    tmm::CompiledStack bottom_{std::span<const Layer>{}};
    tmm::CompiledStack top_{std::span<const Layer>{}};
    double n_in_ = 1.0, n_out_ = 1.0;
};

// Mirror matrices frozen at one wavelength; only the membrane and gap vary.
class FixedWavelengthCavity
{
public:
    FixedWavelengthCavity(const CavityAssembly &c, double wavelength_nm) : c_(c), lambda_(wavelength_nm)
    {
        if (!(wavelength_nm > 0.0))
            throw invalid_argument("wavelength must be positive");
        const auto flat = flatten(c);
        const auto nb = c.bottom_mirror.layers.size();
        bottom_ = tmm::stack_matrix(std::span(flat.layers).first(nb), wavelength_nm);
        top_ = tmm::stack_matrix(std::span(flat.layers).subspan(nb + 2), wavelength_nm);
        n_in_ = flat.incident.refractive_index;
        n_out_ = flat.exit.refractive_index;
    }

    double transmittance(double membrane_nm, double gap_nm) const
    {
        const auto m = bottom_ * tmm::characteristic_matrix(c_.membrane.refractive_index, membrane_nm, lambda_) *
                       tmm::characteristic_matrix(c_.gap.refractive_index, gap_nm, lambda_) * top_;
        return tmm::response(m, n_in_, n_out_).T;
    }

    double wavelength_nm() const { return lambda_; }

private:
    CavityAssembly c_;
    double lambda_;
    tmm::Matrix2 bottom_, top_;
    double n_in_ = 1.0, n_out_ = 1.0;
};

inline double transmittance(const CavityAssembly &c, double wavelength_nm)
{
    return tmm::response(flatten(c), wavelength_nm).T;
}

// Rough free spectral range, nm, from the optical length of membrane and gap plus one
// wavelength of mirror penetration.
inline double approximate_fsr_nm(const CavityAssembly &c, double membrane_nm, double gap_nm, double wavelength_nm)
{
    const double optical =
        gap_nm * c.gap.refractive_index + membrane_nm * c.membrane.refractive_index + wavelength_nm;
    return wavelength_nm * wavelength_nm / (2.0 * optical);
}

inline double approximate_fsr_nm(const CavityAssembly &c, double wavelength_nm)
{
    return approximate_fsr_nm(c, c.membrane_thickness_nm, c.air_gap_nm, wavelength_nm);
}

struct Resonance
{
    double wavelength_nm = 0.0;
    double transmittance = 0.0;
};

// Single transmission maximum near `guess`, golden-section refined to `tolerance_nm`
// (0.1 pm by default). The window is `half_window_nm` each side, or 30 % of the free
// spectral range if unset; within it the Airy peak is unimodal, so a coarse scan
// bracketing its cell is enough.
inline Resonance resonance_near(const CavityModel &model, double membrane_nm, double gap_nm, double guess_nm,
                                double half_window_nm = 0.0, double tolerance_nm = tmm::resonance_tolerance_nm)
{
    if (!(guess_nm > 0.0))
        throw invalid_argument("resonance_near: wavelength must be positive");
    auto T = [&](double l) { return model.transmittance(membrane_nm, gap_nm, l); };
    const double hw = half_window_nm > 0.0 ? half_window_nm
                                           : 0.3 * approximate_fsr_nm(model.assembly(), membrane_nm, gap_nm, guess_nm);
    const double lo = std::max(guess_nm - hw, 1e-3);
    const double hi = guess_nm + hw;
    constexpr int cells = 24;
    int best = 0;
    double best_t = -1.0;
    for (int i = 0; i <= cells; ++i)
    {
        const double t = T(lo + (hi - lo) * i / cells);
        if (t > best_t)
        {
            best_t = t;
            best = i;
        }
    }
    if (best == 0 || best == cells)
        throw not_found_error("resonance_near: no interior transmission maximum near " + std::to_string(guess_nm) +
                              " nm");
    const double cell = (hi - lo) / cells;
    const auto r = numerics::golden_section_max(T, lo + cell * (best - 1), lo + cell * (best + 1), tolerance_nm);
    return {r.x, r.value};
}

inline Resonance resonance_near(const CavityAssembly &c, double guess_nm, double half_window_nm = 0.0,
                                double tolerance_nm = tmm::resonance_tolerance_nm)
{
    return resonance_near(CavityModel(c), c.membrane_thickness_nm, c.air_gap_nm, guess_nm, half_window_nm,
                          tolerance_nm);
}

// Air gap nearest `gap_guess_nm` that is resonant at `wavelength_nm`. Resonant gaps form
// an exact comb with spacing lambda / (2 n_gap), since a half-wave gap layer is -I.
inline double resonant_air_gap(const CavityAssembly &c, double wavelength_nm, double gap_guess_nm)
{
    const FixedWavelengthCavity fw(c, wavelength_nm);
    const double period = wavelength_nm / (2.0 * c.gap.refractive_index);
    auto T = [&](double gap) { return fw.transmittance(c.membrane_thickness_nm, gap); };
    constexpr int cells = 128;
    const double cell = period / cells;
    int best = 0;
    double best_t = -1.0;
    for (int i = 0; i < cells; ++i)
    {
        const double t = T(i * cell);
        if (t > best_t)
        {
            best_t = t;
            best = i;
        }
    }
    const auto r = numerics::golden_section_max(T, (best - 1) * cell, (best + 1) * cell, 1e-7);
    double base = std::fmod(r.x, period);
    if (base < 0.0)
        base += period;
    const double k = std::round((gap_guess_nm - base) / period);
    double gap = base + k * period;
    if (gap < 0.0)
        gap += period * std::ceil(-gap / period);
    return gap;
}

// All resonant gaps at `wavelength_nm` within [lo, hi].
inline std::vector<double> resonant_air_gaps(const CavityAssembly &c, double wavelength_nm, double lo_nm, double hi_nm)
{
    const double period = wavelength_nm / (2.0 * c.gap.refractive_index);
    const double first = resonant_air_gap(c, wavelength_nm, 0.0);
    std::vector<double> out;
    for (double g = first + period * std::ceil((lo_nm - first) / period - 1e-12); g <= hi_nm + 1e-9; g += period)
        out.push_back(g);
    return out;
}

inline CavityAssembly snap_air_gap(const CavityAssembly &c, double wavelength_nm)
{
    return with_geometry(c, c.membrane_thickness_nm, resonant_air_gap(c, wavelength_nm, c.air_gap_nm));
}

struct DispersionSlope
{
    double pm_per_nm = 0.0;
    int branch = -1;
    double air_gap_nm = 0.0;   // gap at which the branch crosses the wavelength
    double wavelength_nm = 0.0;
};

// Central difference of the resonance wavelength for gap steps of +-step_nm, for the
// resonance near `wavelength_nm`. The three resonances are located far below the 0.1 pm
// map tolerance so that the difference quotient is not quantized.
inline double model_slope(const CavityModel &model, double membrane_nm, double gap_nm, double wavelength_nm,
                          double step_nm = 1.0)
{
    if (!(step_nm > 0.0))
        throw invalid_argument("model_slope: step must be positive");
    constexpr double tight = 1e-8;
    const double fsr = approximate_fsr_nm(model.assembly(), membrane_nm, gap_nm, wavelength_nm);
    const double centre = resonance_near(model, membrane_nm, gap_nm, wavelength_nm, 0.3 * fsr, tight).wavelength_nm;
    // |slope| <= 2, so the shifted peaks stay within 2 step_nm of the centre
    const double hw = std::min(0.3 * fsr, 2.0 * step_nm + 0.05 * fsr);
    const double g_up = gap_nm + step_nm;
    const double g_down = std::max(gap_nm - step_nm, 0.0);
    const double up = resonance_near(model, membrane_nm, g_up, centre, hw, tight).wavelength_nm;
    const double down = resonance_near(model, membrane_nm, g_down, centre, hw, tight).wavelength_nm;
    return (up - down) / (g_up - g_down) * 1e3;
}

inline double model_slope(const CavityAssembly &c, double wavelength_nm, double step_nm = 1.0)
{
    return model_slope(CavityModel(c), c.membrane_thickness_nm, c.air_gap_nm, wavelength_nm, step_nm);
}

struct ModeNumber
{
    int q = 0;
    double raw = 0.0; // 2 / m before rounding
};

inline ModeNumber effective_mode_number(double slope_pm_per_nm)
{
    const double m = slope_pm_per_nm * 1e-3;
    if (!std::isfinite(m) || !(m > 0.0) || m > 2.0)
        throw invalid_argument("effective_mode_number: slope must lie in (0, 2000] pm/nm");
    const double raw = 2.0 / m;
    return {static_cast<int>(std::lround(raw)), raw};
}

struct MapResonance
{
    double wavelength_nm = 0.0;
    double weight = 0.0; // peak transmittance
    int branch = -1;
};

struct ModeMapRow
{
    double air_gap_nm = 0.0;
    std::vector<MapResonance> resonances; // increasing wavelength
};

struct ModeMap
{
    CavityAssembly assembly; // air gap of this member is ignored
    double wavelength_min_nm = 0.0;
    double wavelength_max_nm = 0.0;
    std::vector<ModeMapRow> rows;
    int branch_count = 0;
};

struct ModeMapOptions
{
    double wavelength_step_nm = 0.005; // detection grid; must resolve the linewidth
    double min_weight = 1e-3;
};

// Transmission resonances in [lambda_min, lambda_max] for each gap in `air_gaps_nm`,
// linked into branches by nearest-wavelength continuation.
inline ModeMap mode_map(const CavityAssembly &c, std::span<const double> air_gaps_nm, double lambda_min_nm,
                        double lambda_max_nm, const ModeMapOptions &opt = {})
{
    if (!(lambda_min_nm > 0.0) || !(lambda_max_nm > lambda_min_nm))
        throw invalid_argument("mode_map: wavelength window must be positive and increasing");
    if (air_gaps_nm.empty())
        throw invalid_argument("mode_map: empty air-gap grid");
    for (std::size_t i = 0; i < air_gaps_nm.size(); ++i)
        if (!(air_gaps_nm[i] >= 0.0) || (i > 0 && !(air_gaps_nm[i] > air_gaps_nm[i - 1])))
            throw invalid_argument("mode_map: air gaps must be non-negative and increasing");
    if (!(opt.wavelength_step_nm > 0.0))
        throw invalid_argument("mode_map: wavelength step must be positive");

    ModeMap map;
    map.assembly = c;
    map.wavelength_min_nm = lambda_min_nm;
    map.wavelength_max_nm = lambda_max_nm;
    const auto grid = numerics::arange(lambda_min_nm, lambda_max_nm, opt.wavelength_step_nm);

    struct Track
    {
        double wavelength;
        double slope; // nm per nm of gap
        double gap;
    };
    std::vector<Track> open; // indexed by branch id; NaN wavelength once closed

    const CavityModel model(c);
    for (double gap : air_gaps_nm)
    {
        const auto peaks = tmm::find_peaks(
            [&](double l) { return model.transmittance(c.membrane_thickness_nm, gap, l); }, grid,
                                           tmm::resonance_tolerance_nm, opt.min_weight);
        ModeMapRow row;
        row.air_gap_nm = gap;
        for (const auto &p : peaks)
            row.resonances.push_back({p.position, p.value, -1});

        // Greedy nearest-prediction matching.
        struct Candidate
        {
            double distance;
            std::size_t peak;
            std::size_t branch;
        };
        std::vector<Candidate> cands;
        double spacing = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < row.resonances.size(); ++i)
            spacing = std::min(spacing, row.resonances[i].wavelength_nm - row.resonances[i - 1].wavelength_nm);
        for (std::size_t b = 0; b < open.size(); ++b)
        {
            if (std::isnan(open[b].wavelength))
                continue;
            const double predicted = open[b].wavelength + open[b].slope * (gap - open[b].gap);
            for (std::size_t i = 0; i < row.resonances.size(); ++i)
                cands.push_back({std::abs(row.resonances[i].wavelength_nm - predicted), i, b});
        }
        std::sort(cands.begin(), cands.end(), [](const auto &a, const auto &b) {
            if (a.distance != b.distance)
                return a.distance < b.distance;
            return a.peak < b.peak;
        });
        std::vector<bool> branch_used(open.size(), false);
        const double limit = std::isfinite(spacing) ? 0.5 * spacing : std::numeric_limits<double>::infinity();
        for (const auto &cd : cands)
        {
            if (cd.distance > limit || branch_used[cd.branch] || row.resonances[cd.peak].branch >= 0)
                continue;
            branch_used[cd.branch] = true;
            row.resonances[cd.peak].branch = static_cast<int>(cd.branch);
        }
        for (std::size_t b = 0; b < open.size(); ++b)
            if (!branch_used[b])
                open[b].wavelength = std::numeric_limits<double>::quiet_NaN();
        for (auto &r : row.resonances)
        {
            if (r.branch < 0)
            {
                r.branch = static_cast<int>(open.size());
                open.push_back({r.wavelength_nm, 0.0, gap});
                continue;
            }
            auto &t = open[static_cast<std::size_t>(r.branch)];
            if (gap > t.gap)
                t.slope = (r.wavelength_nm - t.wavelength) / (gap - t.gap);
            t.wavelength = r.wavelength_nm;
            t.gap = gap;
        }
        map.rows.push_back(std::move(row));
    }
    map.branch_count = static_cast<int>(open.size());
    return map;
}

// Points (gap, wavelength) of one branch, in gap order.
inline std::vector<std::pair<double, double>> branch_points(const ModeMap &map, int branch)
{
    std::vector<std::pair<double, double>> out;
    for (const auto &row : map.rows)
        for (const auto &r : row.resonances)
            if (r.branch == branch)
                out.emplace_back(row.air_gap_nm, r.wavelength_nm);
    return out;
}

// Slope of `branch` where it crosses `wavelength_nm`: the crossing gap is bracketed on
// the map, made exactly resonant, and differentiated with the model at +-1 nm.
inline DispersionSlope dispersion_slope(const ModeMap &map, int branch, double wavelength_nm, double step_nm = 1.0)
{
    const auto pts = branch_points(map, branch);
    for (std::size_t i = 1; i < pts.size(); ++i)
    {
        const auto [g0, l0] = pts[i - 1];
        const auto [g1, l1] = pts[i];
        if ((l0 - wavelength_nm) * (l1 - wavelength_nm) > 0.0)
            continue;
        const double f = l1 == l0 ? 0.0 : (wavelength_nm - l0) / (l1 - l0);
        const double guess = g0 + f * (g1 - g0);
        const double gap = resonant_air_gap(map.assembly, wavelength_nm, guess);
        const auto c = with_geometry(map.assembly, map.assembly.membrane_thickness_nm, gap);
        return {model_slope(c, wavelength_nm, step_nm), branch, gap, wavelength_nm};
    }
    throw not_found_error("dispersion_slope: branch " + std::to_string(branch) + " does not cross " +
                          std::to_string(wavelength_nm) + " nm");
}

// Branches that cross `wavelength_nm`, ordered by crossing gap.
inline std::vector<int> branches_crossing(const ModeMap &map, double wavelength_nm)
{
    std::vector<std::pair<double, int>> found;
    for (int b = 0; b < map.branch_count; ++b)
    {
        const auto pts = branch_points(map, b);
        for (std::size_t i = 1; i < pts.size(); ++i)
            if ((pts[i - 1].second - wavelength_nm) * (pts[i].second - wavelength_nm) <= 0.0)
            {
                found.emplace_back(pts[i - 1].first, b);
                break;
            }
    }
    std::sort(found.begin(), found.end());
    std::vector<int> out;
    for (const auto &f : found)
        out.push_back(f.second);
    return out;
}

struct GeometryFitOptions
{
    double membrane_min_nm = 300.0;
    double membrane_max_nm = 1500.0;
    double gap_min_nm = 500.0;
    double gap_max_nm = 6000.0;
    double membrane_step_nm = 2.0;    // coarse grid
    double tolerance_pm_per_nm = 1.0; // rms slope mismatch accepted as a match
    std::optional<double> fixed_membrane_nm;
    std::optional<double> nominal_membrane_nm; // basin selection among matching aliases
    std::optional<double> nominal_gap_nm;
    double slope_step_nm = 1.0;
    int refine_count = 6; // basins refined by residual rank, and again by nominal distance
};

struct GeometryCandidate
{
    double membrane_nm = 0.0;
    double gap_nm = 0.0;       // gap of the second (m2) branch
    double gap_first_nm = 0.0; // gap of the first (m1) branch = gap_nm - lambda/2
    double slope1_pm_per_nm = 0.0;
    double slope2_pm_per_nm = 0.0;
    double residual_pm_per_nm = 0.0; // rms mismatch over both slopes
    bool refined = false;
};

struct GeometryFit
{
    GeometryCandidate best;
    int q1 = 0;
    int q2 = 0;
    bool boundary_solution = false;
    bool within_tolerance = false;
    std::string selection; // "nominal" or "residual"
    std::vector<GeometryCandidate> candidates; // local minima, increasing residual
};

// (t_d, t_a) such that the two adjacent fundamental branches resonant at lambda have
// slopes (m1, m2), m1 belonging to the shorter gap. Coarse grid over t_d and the
// resonant-gap comb, golden-section refinement of the best local minima, then basin
// selection: nearest the nominal geometry among matches if one is given, else the
// smallest residual.
inline GeometryFit fit_geometry(double m1_pm_per_nm, double m2_pm_per_nm, const CavityAssembly &mirrors,
                                double lambda_nm, const GeometryFitOptions &opt = {})
{
    effective_mode_number(m1_pm_per_nm);
    effective_mode_number(m2_pm_per_nm);
    if (!(lambda_nm > 0.0))
        throw invalid_argument("fit_geometry: wavelength must be positive");
    if (!(opt.gap_max_nm > opt.gap_min_nm) || opt.gap_min_nm < 0.0)
        throw invalid_argument("fit_geometry: bad air-gap bounds");
    if (!opt.fixed_membrane_nm && (!(opt.membrane_max_nm > opt.membrane_min_nm) || opt.membrane_min_nm < 0.0))
        throw invalid_argument("fit_geometry: bad membrane bounds");
    if (!(opt.membrane_step_nm > 0.0) || !(opt.slope_step_nm > 0.0))
        throw invalid_argument("fit_geometry: steps must be positive");

    const CavityModel model(mirrors);
    const double period = lambda_nm / (2.0 * mirrors.gap.refractive_index);
    std::vector<double> tds;
    if (opt.fixed_membrane_nm)
        tds = {*opt.fixed_membrane_nm};
    else
    {
        tds = numerics::arange(opt.membrane_min_nm, opt.membrane_max_nm, opt.membrane_step_nm);
        tds.back() = std::min(tds.back(), opt.membrane_max_nm);
    }

    auto slope = [&](double td, double gap) -> std::optional<double> {
        if (gap - opt.slope_step_nm < 0.0)
            return std::nullopt;
        try
        {
            return model_slope(model, td, gap, lambda_nm, opt.slope_step_nm);
        }
        catch (const not_found_error &)
        {
            return std::nullopt;
        }
    };
    auto make = [&](double td, double g1, double s1, double s2) {
        GeometryCandidate g;
        g.membrane_nm = td;
        g.gap_first_nm = g1;
        g.gap_nm = g1 + period;
        g.slope1_pm_per_nm = s1;
        g.slope2_pm_per_nm = s2;
        const double d1 = s1 - m1_pm_per_nm;
        const double d2 = s2 - m2_pm_per_nm;
        g.residual_pm_per_nm = std::sqrt(0.5 * (d1 * d1 + d2 * d2));
        return g;
    };

    // Coarse grid: every gap of the comb is differentiated once and shared by two pairs.
    std::vector<std::vector<GeometryCandidate>> grid(tds.size());
    for (std::size_t i = 0; i < tds.size(); ++i)
    {
        const auto base = with_geometry(mirrors, tds[i], 0.0);
        const auto gaps = resonant_air_gaps(base, lambda_nm, opt.gap_min_nm - period, opt.gap_max_nm);
        std::vector<std::optional<double>> slopes;
        for (double g : gaps)
            slopes.push_back(slope(tds[i], g));
        for (std::size_t k = 0; k + 1 < gaps.size(); ++k)
        {
            if (gaps[k + 1] < opt.gap_min_nm - 1e-9 || !slopes[k] || !slopes[k + 1])
                continue;
            grid[i].push_back(make(tds[i], gaps[k], *slopes[k], *slopes[k + 1]));
        }
    }

    auto nearest = [&](const std::vector<GeometryCandidate> &row, double gap) -> const GeometryCandidate * {
        const GeometryCandidate *best = nullptr;
        for (const auto &g : row)
            if (std::abs(g.gap_nm - gap) < 0.5 * period &&
                (!best || std::abs(g.gap_nm - gap) < std::abs(best->gap_nm - gap)))
                best = &g;
        return best;
    };

    struct Basin
    {
        GeometryCandidate candidate;
        std::size_t index; // into tds
    };
    std::vector<Basin> basins;
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (const auto &g : grid[i])
        {
            const GeometryCandidate *left = i > 0 ? nearest(grid[i - 1], g.gap_nm) : nullptr;
            const GeometryCandidate *right = i + 1 < grid.size() ? nearest(grid[i + 1], g.gap_nm) : nullptr;
            if ((left && left->residual_pm_per_nm < g.residual_pm_per_nm) ||
                (right && right->residual_pm_per_nm <= g.residual_pm_per_nm))
                continue;
            basins.push_back({g, i});
        }
    if (basins.empty())
        throw not_found_error("fit_geometry: no resonant branch pair inside the bounds");

    const bool has_nominal = opt.nominal_membrane_nm.has_value() || opt.nominal_gap_nm.has_value();
    auto distance = [&](const GeometryCandidate &c) {
        double d = 0.0;
        if (opt.nominal_membrane_nm)
            d += std::pow(c.membrane_nm - *opt.nominal_membrane_nm, 2);
        if (opt.nominal_gap_nm)
            d += std::pow(c.gap_nm - *opt.nominal_gap_nm, 2);
        return d;
    };

    // Refinement along t_d with the gap tracked at constant optical length.
    auto refine = [&](Basin &b) {
        if (tds.size() < 2)
        {
            b.candidate.refined = true;
            return;
        }
        const auto i = b.index;
        const double lo = tds[i > 0 ? i - 1 : i];
        const double hi = tds[i + 1 < tds.size() ? i + 1 : i];
        const double optical = b.candidate.gap_nm + mirrors.membrane.refractive_index * b.candidate.membrane_nm;
        auto evaluate = [&](double td) -> std::optional<GeometryCandidate> {
            const auto base = with_geometry(mirrors, td, 0.0);
            const double g2 = resonant_air_gap(base, lambda_nm, optical - mirrors.membrane.refractive_index * td);
            const auto s1 = slope(td, g2 - period);
            const auto s2 = slope(td, g2);
            if (!s1 || !s2)
                return std::nullopt;
            return make(td, g2 - period, *s1, *s2);
        };
        auto cost = [&](double td) {
            const auto e = evaluate(td);
            return e ? e->residual_pm_per_nm : std::numeric_limits<double>::infinity();
        };
        const auto r = numerics::golden_section_min(cost, lo, hi, 1e-3);
        if (auto e = evaluate(r.x); e && e->residual_pm_per_nm <= b.candidate.residual_pm_per_nm &&
                                    e->gap_nm >= opt.gap_min_nm - 1e-9 && e->gap_nm <= opt.gap_max_nm + 1e-9)
            b.candidate = *e;
        b.candidate.refined = true;
    };

    std::sort(basins.begin(), basins.end(), [](const auto &a, const auto &b) {
        return a.candidate.residual_pm_per_nm < b.candidate.residual_pm_per_nm;
    });
    const auto budget = static_cast<std::size_t>(std::max(opt.refine_count, 1));
    for (std::size_t k = 0; k < std::min(budget, basins.size()); ++k)
        refine(basins[k]);
    if (has_nominal)
    {
        std::vector<Basin *> eligible;
        for (auto &b : basins)
            if (b.candidate.residual_pm_per_nm <= 3.0 * opt.tolerance_pm_per_nm)
                eligible.push_back(&b);
        std::sort(eligible.begin(), eligible.end(),
                  [&](auto a, auto b) { return distance(a->candidate) < distance(b->candidate); });
        for (std::size_t k = 0; k < std::min(budget, eligible.size()); ++k)
            if (!eligible[k]->candidate.refined)
                refine(*eligible[k]);
    }

    GeometryFit fit;
    for (const auto &b : basins)
        fit.candidates.push_back(b.candidate);
    std::sort(fit.candidates.begin(), fit.candidates.end(),
              [](const auto &a, const auto &b) { return a.residual_pm_per_nm < b.residual_pm_per_nm; });

    std::vector<const GeometryCandidate *> matching;
    for (const auto &c : fit.candidates)
        if (c.residual_pm_per_nm <= opt.tolerance_pm_per_nm)
            matching.push_back(&c);
    fit.within_tolerance = !matching.empty();
    if (fit.within_tolerance && has_nominal)
    {
        fit.best = **std::min_element(matching.begin(), matching.end(),
                                      [&](auto a, auto b) { return distance(*a) < distance(*b); });
        fit.selection = "nominal";
    }
    else
    {
        fit.best = fit.candidates.front();
        fit.selection = "residual";
    }
    fit.q1 = effective_mode_number(fit.best.slope1_pm_per_nm).q;
    fit.q2 = effective_mode_number(fit.best.slope2_pm_per_nm).q;
    if (!opt.fixed_membrane_nm)
        fit.boundary_solution = fit.best.membrane_nm - opt.membrane_min_nm < opt.membrane_step_nm ||
                                opt.membrane_max_nm - fit.best.membrane_nm < opt.membrane_step_nm;
    fit.boundary_solution = fit.boundary_solution || fit.best.gap_first_nm < opt.gap_min_nm ||
                            opt.gap_max_nm - fit.best.gap_nm < 0.5 * period;
    return fit;
}

enum class Configuration
{
    diamond_like,
    air_like
};

inline const char *to_string(Configuration c)
{
    return c == Configuration::diamond_like ? "diamond-like" : "air-like";
}

struct Classification
{
    Configuration configuration = Configuration::air_like;
    double interface_ratio = 0.0;          // |E| at membrane/gap interface over max |E| in the membrane
    double energy_fraction_membrane = 0.0; // integral of n^2 |E|^2, share of the whole stack
    double energy_fraction_gap = 0.0;
    double energy_density_ratio = 0.0; // (membrane energy / t_d) / (gap energy / t_a)
    static constexpr double threshold = 0.70710678118654752;
};

// Diamond-like iff the field at the membrane/gap interface exceeds 1/sqrt(2) of the
// in-membrane maximum.
inline Classification classify_configuration(const CavityAssembly &c, double wavelength_nm)
{
    Classification out;
    if (c.membrane_thickness_nm <= 0.0)
        return out;
    const auto prof = tmm::field_profile(flatten(c), wavelength_nm, std::max(1.0, wavelength_nm / 50.0));
    const auto &mem = prof.segments[c.membrane_index()];
    const auto &gap = prof.segments[c.gap_index()];
    const double peak = mem.max_abs_field();
    if (!(peak > 0.0))
        throw numeric_error("classify_configuration: zero field in the membrane");
    out.interface_ratio = std::abs(mem.field(mem.thickness_nm)) / peak;
    out.configuration = out.interface_ratio > Classification::threshold ? Configuration::diamond_like
                                                                         : Configuration::air_like;
    double total = 0.0;
    for (const auto &s : prof.segments)
        total += s.refractive_index * s.refractive_index * s.intensity_integral();
    const double e_mem = mem.refractive_index * mem.refractive_index * mem.intensity_integral();
    const double e_gap = gap.refractive_index * gap.refractive_index * gap.intensity_integral();
    out.energy_fraction_membrane = e_mem / total;
    out.energy_fraction_gap = e_gap / total;
    if (c.air_gap_nm > 0.0 && e_gap > 0.0)
        out.energy_density_ratio = (e_mem / c.membrane_thickness_nm) / (e_gap / c.air_gap_nm);
    return out;
}

namespace io
{
inline void write_mode_map(std::ostream &out, const ModeMap &map)
{
    out << "t_a_nm,lambda_nm,weight,branch_id\n";
    for (const auto &row : map.rows)
        for (const auto &r : row.resonances)
            out << fpcav::io::format_number(row.air_gap_nm) << ',' << fpcav::io::format_number(r.wavelength_nm) << ','
                << fpcav::io::format_number(r.weight) << ',' << r.branch << '\n';
}
} // namespace io

} // namespace fpcav::coupled
