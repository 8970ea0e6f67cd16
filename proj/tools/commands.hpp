#pragma once

// One function per subcommand: options in, JSON report out, data files through Artifacts.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cli_support.hpp"

namespace fpcav::cli
{

// ---- stack-spectrum ----------------------------------------------------------

struct SpectrumOptions
{
    StackSource stack;
    double lambda_min_nm = 500.0;
    double lambda_max_nm = 700.0;
    double lambda_step_nm = 0.5;
};

inline json stack_spectrum(const SpectrumOptions &o, const Defaults &d, Artifacts &art)
{
    const auto s = resolve_stack(o.stack, d);
    if (!(o.lambda_max_nm > o.lambda_min_nm) || !(o.lambda_min_nm > 0.0))
        throw invalid_argument("wavelength range must be positive and increasing");
    const auto grid = numerics::arange(o.lambda_min_nm, o.lambda_max_nm, o.lambda_step_nm);
    const auto sp = tmm::spectrum(s, grid);

    double energy = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        energy = std::max(energy, std::abs(sp.R[i] + sp.T[i] - 1.0));
    const auto [rmin, rmax] = std::minmax_element(sp.R.begin(), sp.R.end());

    art.write("spectrum.csv", [&](std::ostream &out) {
        out << "lambda_nm,R,T,phase_r_rad\n";
        for (std::size_t i = 0; i < grid.size(); ++i)
            csv_row(out, {grid[i], sp.R[i], sp.T[i], std::arg(sp.r[i])});
    });
    return {{"stack", stack_summary(s)},
            {"points", grid.size()},
            {"R_min", *rmin},
            {"R_max", *rmax},
            {"max_energy_error", energy}};
}

inline void stack_spectrum_selftest(SelfTest &t)
{
    t.attempt("empty air stack reflects nothing", [](SelfTest &t) {
        const LayerStack s{materials::air(), {}, materials::air()};
        double worst = 0.0;
        for (double l : numerics::linspace(400.0, 800.0, 41))
            worst = std::max(worst, tmm::response(s, l).R);
        t.check("empty air stack reflects nothing", worst == 0.0, {{"max_R", worst}});
    });
    t.attempt("single interface Fresnel", [](SelfTest &t) {
        const LayerStack s{materials::air(), {}, materials::diamond()};
        const double n = materials::diamond().refractive_index;
        const double expect = std::pow((n - 1.0) / (n + 1.0), 2);
        const double R = tmm::response(s, 600.0).R;
        t.check("single interface Fresnel", close(R, expect, 1e-12), {{"R", R}, {"expected", expect}});
    });
    t.attempt("lossless energy balance", [](SelfTest &t) {
        const auto s = build_quarter_wave_dbr(600.0, 8, materials::ta2o5(), materials::sio2(), materials::silica());
        double worst = 0.0;
        for (double l : numerics::linspace(450.0, 750.0, 61))
        {
            const auto r = tmm::response(s, l);
            worst = std::max(worst, std::abs(r.R + r.T - 1.0));
        }
        t.check("lossless energy balance", worst < 1e-9, {{"max_error", worst}});
    });
}

// ---- stopband ----------------------------------------------------------------

struct StopbandOptions
{
    StackSource stack;
    double lambda_min_nm = 450.0;
    double lambda_max_nm = 800.0;
    double lambda_step_nm = 0.1;
    double threshold = 0.99;
    std::vector<double> probe_nm;
};

inline json stopband(const StopbandOptions &o, const Defaults &d, Artifacts &art)
{
    const auto s = resolve_stack(o.stack, d);
    if (!(o.lambda_max_nm > o.lambda_min_nm) || !(o.lambda_min_nm > 0.0))
        throw invalid_argument("wavelength range must be positive and increasing");
    const auto grid = numerics::arange(o.lambda_min_nm, o.lambda_max_nm, o.lambda_step_nm);
    const auto sp = tmm::spectrum(s, grid);
    const auto sb = tmm::stopband(sp, o.threshold);

    auto probes = o.probe_nm;
    if (probes.empty())
        probes = {d.pump_nm, default_stokes_nm(d)};
    json pj = json::array();
    for (double p : probes)
        pj.push_back({{"wavelength_nm", p}, {"R", tmm::response(s, p).R}, {"inside", sb.contains(p)}});

    art.write("reflectance.csv", [&](std::ostream &out) {
        out << "lambda_nm,R\n";
        for (std::size_t i = 0; i < grid.size(); ++i)
            csv_row(out, {grid[i], sp.R[i]});
    });
    return {{"stack", stack_summary(s)},
            {"threshold", o.threshold},
            {"center_nm", sb.center_nm},
            {"low_edge_nm", sb.low_edge_nm},
            {"high_edge_nm", sb.high_edge_nm},
            {"width_nm", sb.width_nm()},
            {"peak_wavelength_nm", sb.peak_wavelength_nm},
            {"peak_reflectance", sb.peak_reflectance},
            {"truncated", sb.truncated},
            {"probes", pj}};
}

inline void stopband_selftest(SelfTest &t)
{
    t.attempt("quarter-wave mirror peaks at its design wavelength", [](SelfTest &t) {
        const auto s = build_quarter_wave_dbr(600.0, 20, materials::ta2o5(), materials::sio2(), materials::silica());
        const auto grid = numerics::arange(450.0, 800.0, 0.1);
        const auto sb = tmm::stopband(tmm::spectrum(s, grid), 0.99);
        t.check("quarter-wave mirror peaks at its design wavelength",
                close(sb.peak_wavelength_nm, 600.0, 0.11) && sb.contains(600.0),
                {{"peak_nm", sb.peak_wavelength_nm}});
    });
    t.attempt("no stopband without layers", [](SelfTest &t) {
        const LayerStack s{materials::air(), {}, materials::air()};
        bool thrown = false;
        try
        {
            tmm::stopband(tmm::spectrum(s, numerics::arange(500.0, 600.0, 1.0)), 0.99);
        }
        catch (const not_found_error &)
        {
            thrown = true;
        }
        t.check("no stopband without layers", thrown);
    });
}

// ---- refine ------------------------------------------------------------------

struct RefineCmdOptions
{
    StackSource stack;
    std::string measured;
    double thickness_tolerance = 0.03;
    int max_evaluations = 10000;
};

inline json refine(const RefineCmdOptions &o, const Defaults &d, Artifacts &art)
{
    if (o.measured.empty())
        throw usage_error("refine: --measured FILE is required");
    const auto s = resolve_stack(o.stack, d);
    const auto m = read_two_column(o.measured);
    tmm::RefineOptions ro;
    ro.thickness_tolerance = o.thickness_tolerance;
    ro.max_evaluations = o.max_evaluations;
    const auto r = tmm::refine_stack(s, m, ro);

    art.write("refined_stack.json", [&](std::ostream &out) { out << io::stack_to_json(r.stack).dump(2) << '\n'; });
    art.write("refine_fit.csv", [&](std::ostream &out) {
        out << "lambda_nm,T_measured,T_initial,T_refined\n";
        for (std::size_t i = 0; i < m.size(); ++i)
        {
            const double l = m.wavelengths_nm[i];
            csv_row(out, {l, m.counts[i], tmm::response(s, l).T, tmm::response(r.stack, l).T});
        }
    });
    art.write("residual_history.csv", [&](std::ostream &out) {
        out << "step,residual\n";
        for (std::size_t i = 0; i < r.residual_history.size(); ++i)
            csv_row(out, {static_cast<double>(i), r.residual_history[i]});
    });
    return {{"stack", stack_summary(s)},
            {"thickness_tolerance", o.thickness_tolerance},
            {"initial_residual", r.initial_residual},
            {"residual", r.residual},
            {"converged", r.converged},
            {"status", r.status},
            {"evaluations", r.evaluations},
            {"multipliers", r.multipliers}};
}

inline void refine_selftest(SelfTest &t)
{
    t.attempt("exact stack is a fixed point", [](SelfTest &t) {
        const LayerStack s{materials::air(),
                           {{materials::ta2o5(), 80.0}, {materials::sio2(), 110.0}, {materials::ta2o5(), 70.0}},
                           materials::silica()};
        MeasuredSpectrum m;
        for (double l : numerics::arange(450.0, 750.0, 2.0))
        {
            m.wavelengths_nm.push_back(l);
            m.counts.push_back(tmm::response(s, l).T);
        }
        const auto r = tmm::refine_stack(s, m);
        double worst = 0.0;
        for (double f : r.multipliers)
            worst = std::max(worst, std::abs(f - 1.0));
        t.check("exact stack is a fixed point", worst < 1e-6 && r.residual < 1e-12,
                {{"max_multiplier_error", worst}, {"residual", r.residual}});
    });
}

// ---- mode-map ----------------------------------------------------------------

struct ModeMapCmdOptions
{
    std::optional<double> membrane_nm;
    double gap_min_nm = 2250.0;
    double gap_max_nm = 2700.0;
    double gap_step_nm = 10.0;
    double lambda_min_nm = 560.0;
    double lambda_max_nm = 590.0;
    double lambda_step_nm = 0.005;
    std::optional<double> probe_nm;
};

inline json mode_map(const ModeMapCmdOptions &o, const Defaults &d, Artifacts &art)
{
    auto c = d.cavity();
    if (o.membrane_nm)
        c.membrane_thickness_nm = *o.membrane_nm;
    if (!(o.gap_max_nm > o.gap_min_nm))
        throw invalid_argument("mode-map: gap range must be increasing");
    const auto gaps = numerics::arange(o.gap_min_nm, o.gap_max_nm, o.gap_step_nm);
    const auto map = coupled::mode_map(c, gaps, o.lambda_min_nm, o.lambda_max_nm, {o.lambda_step_nm, 1e-3});
    const double probe = o.probe_nm.value_or(default_stokes_nm(d));

    json crossings = json::array();
    for (int b : coupled::branches_crossing(map, probe))
    {
        const auto s = coupled::dispersion_slope(map, b, probe);
        json e{{"branch", b}, {"air_gap_nm", s.air_gap_nm}, {"slope_pm_per_nm", s.pm_per_nm}};
        if (s.pm_per_nm > 0.0 && s.pm_per_nm <= 2000.0)
            e["mode_number"] = coupled::effective_mode_number(s.pm_per_nm).q;
        crossings.push_back(e);
    }
    std::size_t resonances = 0;
    for (const auto &row : map.rows)
        resonances += row.resonances.size();

    art.write("mode_map.csv", [&](std::ostream &out) { coupled::io::write_mode_map(out, map); });
    return {{"membrane_nm", c.membrane_thickness_nm},
            {"gap_count", gaps.size()},
            {"resonance_count", resonances},
            {"branch_count", map.branch_count},
            {"probe_nm", probe},
            {"crossings", crossings}};
}

namespace detail
{
// Bare interfaces onto a very high index: resonances at exactly lambda = 2 t_a / q.
inline CavityAssembly ideal_mirrors()
{
    const Material wall{"wall", 50.0};
    return assemble_cavity(LayerStack{materials::air(), {}, wall}, 0.0, 0.0, LayerStack{materials::air(), {}, wall});
}
} // namespace detail

inline void mode_map_selftest(SelfTest &t)
{
    t.attempt("planar cavity branch slope is 2000/q", [](SelfTest &t) {
        const double l = 572.67;
        const auto c = detail::ideal_mirrors();
        const auto gaps = numerics::linspace(5.0 * l - 40.0, 5.0 * l + 40.0, 17);
        const auto map = coupled::mode_map(c, gaps, l - 30.0, l + 30.0, {0.002, 1e-3});
        const auto crossing = coupled::branches_crossing(map, l);
        const bool one = crossing.size() == 1;
        const double slope = one ? coupled::dispersion_slope(map, crossing[0], l).pm_per_nm : 0.0;
        t.check("planar cavity branch slope is 2000/q", one && close(slope, 200.0, 1e-4),
                {{"slope_pm_per_nm", slope}});
    });
    t.attempt("mode number from slope", [](SelfTest &t) {
        const bool ok = coupled::effective_mode_number(2000.0).q == 1 && coupled::effective_mode_number(100.0).q == 20;
        t.check("mode number from slope", ok);
    });
}

// ---- fit-geometry ------------------------------------------------------------

struct FitGeometryCmdOptions
{
    std::vector<double> slopes_pm_per_nm;
    std::optional<double> wavelength_nm;
    std::optional<double> membrane_nm; // fixed
    std::optional<double> membrane_min_nm;
    std::optional<double> membrane_max_nm;
    std::optional<double> gap_min_nm;
    std::optional<double> gap_max_nm;
    std::optional<double> membrane_step_nm;
    std::optional<double> tolerance_pm_per_nm;
    std::optional<double> nominal_membrane_nm;
    std::optional<double> nominal_gap_nm;
    bool no_nominal = false;
    int max_candidates = 20;
};

inline json candidate_json(const coupled::GeometryCandidate &c)
{
    return {{"membrane_nm", c.membrane_nm},
            {"gap_nm", c.gap_nm},
            {"gap_first_nm", c.gap_first_nm},
            {"slope1_pm_per_nm", c.slope1_pm_per_nm},
            {"slope2_pm_per_nm", c.slope2_pm_per_nm},
            {"residual_pm_per_nm", c.residual_pm_per_nm},
            {"refined", c.refined}};
}

inline json fit_geometry(const FitGeometryCmdOptions &o, const Defaults &d, Artifacts &art)
{
    std::array<double, 2> slopes = d.slopes_pm_per_nm;
    if (!o.slopes_pm_per_nm.empty())
    {
        if (o.slopes_pm_per_nm.size() != 2)
            throw usage_error("fit-geometry: --slopes-pm-per-nm takes exactly two values");
        slopes = {o.slopes_pm_per_nm[0], o.slopes_pm_per_nm[1]};
    }
    const double lambda = o.wavelength_nm.value_or(default_stokes_nm(d));
    coupled::GeometryFitOptions f;
    f.membrane_min_nm = o.membrane_min_nm.value_or(d.fit_membrane_min_nm);
    f.membrane_max_nm = o.membrane_max_nm.value_or(d.fit_membrane_max_nm);
    f.gap_min_nm = o.gap_min_nm.value_or(d.fit_gap_min_nm);
    f.gap_max_nm = o.gap_max_nm.value_or(d.fit_gap_max_nm);
    f.membrane_step_nm = o.membrane_step_nm.value_or(d.fit_membrane_step_nm);
    f.tolerance_pm_per_nm = o.tolerance_pm_per_nm.value_or(d.fit_tolerance_pm_per_nm);
    f.fixed_membrane_nm = o.membrane_nm;
    if (!o.no_nominal)
    {
        f.nominal_membrane_nm = o.nominal_membrane_nm ? o.nominal_membrane_nm : d.fit_nominal_membrane_nm;
        f.nominal_gap_nm = o.nominal_gap_nm ? o.nominal_gap_nm : d.fit_nominal_gap_nm;
    }
    const auto fit = coupled::fit_geometry(slopes[0], slopes[1], d.cavity(), lambda, f);

    json cands = json::array();
    for (std::size_t i = 0; i < fit.candidates.size() && static_cast<int>(i) < o.max_candidates; ++i)
        cands.push_back(candidate_json(fit.candidates[i]));
    art.write("candidates.csv", [&](std::ostream &out) {
        out << "membrane_nm,gap_nm,slope1_pm_per_nm,slope2_pm_per_nm,residual_pm_per_nm,refined\n";
        for (const auto &c : fit.candidates)
            csv_row(out, {c.membrane_nm, c.gap_nm, c.slope1_pm_per_nm, c.slope2_pm_per_nm, c.residual_pm_per_nm,
                          c.refined ? 1.0 : 0.0});
    });

    json prior = json::object();
    if (f.nominal_membrane_nm)
        prior["membrane_nm"] = *f.nominal_membrane_nm;
    if (f.nominal_gap_nm)
        prior["gap_nm"] = *f.nominal_gap_nm;
    return {{"slopes_pm_per_nm", slopes},
            {"wavelength_nm", lambda},
            {"q1", fit.q1},
            {"q2", fit.q2},
            {"nominal", prior},
            {"best", candidate_json(fit.best)},
            {"selection", fit.selection},
            {"within_tolerance", fit.within_tolerance},
            {"boundary_solution", fit.boundary_solution},
            {"candidate_count", fit.candidates.size()},
            {"candidates", cands}};
}

inline void fit_geometry_selftest(SelfTest &t)
{
    t.attempt("bare cavity recovers the half-wave gaps", [](SelfTest &t) {
        const double l = 572.67;
        coupled::GeometryFitOptions opt;
        opt.fixed_membrane_nm = 0.0;
        opt.gap_min_nm = 500.0;
        opt.gap_max_nm = 12000.0;
        opt.tolerance_pm_per_nm = 1e-3;
        const auto fit = coupled::fit_geometry(2000.0 / 23.0, 2000.0 / 24.0, detail::ideal_mirrors(), l, opt);
        const bool ok = fit.q1 == 23 && fit.q2 == 24 && close(fit.best.gap_first_nm, 23.0 * l / 2.0, 1e-4) &&
                        close(fit.best.gap_nm, 24.0 * l / 2.0, 1e-4);
        t.check("bare cavity recovers the half-wave gaps", ok,
                {{"gap_first_nm", fit.best.gap_first_nm}, {"gap_nm", fit.best.gap_nm}});
    });
}

// ---- gauss-modes -------------------------------------------------------------

struct GaussCmdOptions
{
    std::optional<double> wavelength_nm;
    std::optional<double> radius_um;
    std::optional<double> length_um;
    double length_min_um = 3.0;
    double length_max_um = 5.0;
    int max_order = 3;
};

inline json gauss_modes(const GaussCmdOptions &o, const Defaults &d, Artifacts &art)
{
    const double lambda = o.wavelength_nm.value_or(default_stokes_nm(d));
    const double R = o.radius_um.value_or(d.mirror_radius_um);
    const double L = o.length_um.value_or(d.length_um);
    if (o.max_order < 0)
        throw invalid_argument("gauss-modes: --max-order must be >= 0");
    std::vector<gauss::TransverseFamily> fams;
    for (int k = 0; k <= o.max_order; ++k)
        for (int m = 0; m <= k / 2; ++m)
            fams.push_back({k - m, m});
    const auto map = gauss::mode_dispersion_map(lambda, R, o.length_min_um, o.length_max_um, fams, L);
    const auto w = gauss::beam_waists(L, R, lambda);

    art.write("dispersion.csv", [&](std::ostream &out) {
        out << "q,n,m,length_um,delta_length_nm\n";
        for (const auto &e : map)
            csv_row(out, {static_cast<double>(e.mode.q), static_cast<double>(e.mode.n), static_cast<double>(e.mode.m),
                          e.length_um, e.delta_length_nm});
    });
    json modes = json::array();
    for (const auto &e : map)
        modes.push_back({{"q", e.mode.q},
                         {"n", e.mode.n},
                         {"m", e.mode.m},
                         {"length_um", e.length_um},
                         {"delta_length_nm", e.delta_length_nm}});
    return {{"wavelength_nm", lambda},
            {"mirror_radius_um", R},
            {"length_um", L},
            {"waists",
             {{"rayleigh_range_um", w.rayleigh_range_um},
              {"w0_intensity_um", w.w0_intensity_um},
              {"w_mirror_intensity_um", w.w_mirror_intensity_um},
              {"average_intensity_um", w.average_intensity_um()}}},
            {"modes", modes}};
}

inline void gauss_modes_selftest(SelfTest &t)
{
    t.attempt("planar limit is the half-wave comb", [](SelfTest &t) {
        bool ok = true;
        for (int q = 1; q <= 30; ++q)
            ok = ok && close_rel(gauss::effective_length({q, 2, 1}, 600.0, std::numeric_limits<double>::infinity()),
                                 q * 0.3, 1e-15);
        t.check("planar limit is the half-wave comb", ok);
    });
    t.attempt("equal n+m are degenerate", [](SelfTest &t) {
        const double a = gauss::effective_length({14, 2, 0}, 572.67, 10.0);
        const double b = gauss::effective_length({14, 1, 1}, 572.67, 10.0);
        t.check("equal n+m are degenerate", a == b, {{"length_um", a}});
    });
    t.attempt("fixed point satisfies its relation", [](SelfTest &t) {
        const gauss::ModeIndex k{14, 0, 0};
        const double L = gauss::effective_length(k, 572.67, 10.0);
        const double r = gauss::effective_length_residual(k, 572.67, 10.0, L);
        t.check("fixed point satisfies its relation", std::abs(r) < 1e-9, {{"residual", r}});
    });
}

// ---- render-mode -------------------------------------------------------------

struct RenderOptions
{
    int n = 0;
    int m = 0;
    std::optional<double> waist_um;
    double pitch_um = 0.02;
    int size_px = 128;
};

inline json render_mode(const RenderOptions &o, const Defaults &d, Artifacts &art)
{
    const double w = o.waist_um.value_or(d.waist_intensity_um);
    const auto img = gauss::hermite_gaussian_image(o.n, o.m, w, o.pitch_um, o.size_px);
    json report = gauss::io::image_metadata(img);
    if (o.n == 0 && o.m == 0)
    {
        const auto fx = gauss::fit_linecut(img, gauss::Axis::x);
        report["linecut_waist_intensity_um"] = fx.waist_intensity_um;
    }
    const std::string name = "mode_" + std::to_string(o.n) + "_" + std::to_string(o.m);
    art.write(name + ".pgm", [&](std::ostream &out) { gauss::io::write_pgm(out, img); });
    art.write(name + "_linecut.csv", [&](std::ostream &out) {
        out << "x_um,intensity\n";
        const int row = img.height / 2;
        for (int x = 0; x < img.width; ++x)
            csv_row(out, {img.x_um(x), img.at(x, row)});
    });
    return report;
}

inline void render_mode_selftest(SelfTest &t)
{
    t.attempt("fundamental linecut returns its waist", [](SelfTest &t) {
        const auto img = gauss::hermite_gaussian_image(0, 0, 0.77, 0.02, 256);
        const double w = gauss::fit_linecut_waist(img);
        t.check("fundamental linecut returns its waist", close_rel(w, 0.77, 1e-3), {{"waist_um", w}});
    });
    t.attempt("graymap round trip", [](SelfTest &t) {
        const auto img = gauss::hermite_gaussian_image(1, 2, 0.77, 0.05, 64);
        std::stringstream ss;
        gauss::io::write_pgm(ss, img);
        const auto back = gauss::io::read_pgm(ss, 0.05);
        double worst = 0.0;
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            worst = std::max(worst, std::abs(img.pixels[i] - back.pixels[i]));
        t.check("graymap round trip", back.width == 64 && worst <= 0.5 / 65535.0 + 1e-12, {{"max_error", worst}});
    });
}

// ---- quantize / purcell / budget ---------------------------------------------

struct ChainOptions
{
    std::optional<double> membrane_nm;
    std::optional<double> air_gap_nm;
    bool no_snap = false;
    std::optional<double> wavelength_nm;
    std::optional<double> waist_um;
    double step_nm = 1.0;
};

struct Chain
{
    CavityAssembly cavity;
    double wavelength_nm = 0.0;
    purcell::QuantizedField field;
    purcell::ModeVolume volume;
};

inline Chain quantize_chain(const ChainOptions &o, const Defaults &d)
{
    Chain ch;
    ch.wavelength_nm = o.wavelength_nm.value_or(default_stokes_nm(d));
    ch.cavity = with_geometry(d.cavity(), o.membrane_nm.value_or(d.membrane_nm), o.air_gap_nm.value_or(d.air_gap_nm));
    if (!o.no_snap)
        ch.cavity = coupled::snap_air_gap(ch.cavity, ch.wavelength_nm);
    ch.field = purcell::quantize_cavity(ch.cavity, o.waist_um.value_or(d.waist_intensity_um), ch.wavelength_nm,
                                        o.step_nm);
    ch.volume = purcell::mode_volume(ch.field, ch.cavity.membrane.refractive_index);
    return ch;
}

inline json chain_json(const Chain &ch)
{
    return {{"wavelength_nm", ch.wavelength_nm},
            {"membrane_nm", ch.cavity.membrane_thickness_nm},
            {"air_gap_nm", ch.cavity.air_gap_nm},
            {"waist_intensity_um", ch.field.waist_intensity_um},
            {"max_field_V_per_m", ch.field.max_field_V_per_m},
            {"max_field_z_nm", ch.field.max_field_z_nm},
            {"mode_volume_cubic_wavelengths", ch.volume.cubic_wavelengths},
            {"mode_volume_cubic_um", ch.volume.cubic_um}};
}

inline json quantize(const ChainOptions &o, const Defaults &d, Artifacts &art)
{
    const auto ch = quantize_chain(o, d);
    art.write("field.csv", [&](std::ostream &out) {
        out << "z_nm,n,abs_E_V_per_m\n";
        const auto &p = ch.field.profile;
        for (std::size_t i = 0; i < p.z_nm.size(); ++i)
            csv_row(out, {p.z_nm[i], p.refractive_index[i], p.abs_E[i]});
    });
    auto j = chain_json(ch);
    j["normalization_J"] = ch.field.normalization_J;
    j["photon_energy_J"] = ch.field.photon_energy_J;
    return j;
}

inline void quantize_selftest(SelfTest &t)
{
    t.attempt("uniform cavity closed form", [](SelfTest &t) {
        const double n = 2.0;
        const double l = 572.67;
        const Material wall{"wall", 1e9};
        const LayerStack s{wall, {{Material{"medium", n}, 3.0 * l / (2.0 * n)}}, wall};
        const auto q = purcell::quantize_field(tmm::field_profile(s, l, 1.0), 0.77, l);
        const double w = 0.77e-6;
        const double L = 3.0 * l * 1e-9 / (2.0 * n);
        const double a = std::sqrt(2.0 * constants::photon_energy(l) /
                                   (constants::pi * w * w * constants::vacuum_permittivity * n * n * L));
        t.check("uniform cavity closed form", close_rel(q.max_field_V_per_m, a, 1e-9),
                {{"field_V_per_m", q.max_field_V_per_m}, {"expected", a}});
    });
    t.attempt("volume and field are inverse", [](SelfTest &t) {
        const double e = purcell::field_from_volume(84.9, 2.41, 572.67);
        const double v = purcell::mode_volume(e, constants::photon_energy(572.67), 2.41, 572.67).cubic_wavelengths;
        t.check("volume and field are inverse", close_rel(v, 84.9, 1e-12), {{"volume", v}});
    });
}

struct PurcellCmdOptions
{
    ChainOptions chain;
    std::optional<double> q;
    std::optional<double> volume_cubic_wavelengths;
    std::optional<double> averaging;
};

inline json purcell_cmd(const PurcellCmdOptions &o, const Defaults &d, Artifacts &art)
{
    json report;
    double v = 0.0;
    if (o.volume_cubic_wavelengths)
    {
        v = *o.volume_cubic_wavelengths;
        report["mode_volume_source"] = "supplied";
    }
    else
    {
        const auto ch = quantize_chain(o.chain, d);
        v = ch.volume.cubic_wavelengths;
        report["mode_volume_source"] = "computed";
        report["chain"] = chain_json(ch);
    }
    const double q = o.q.value_or(d.q_cavity);
    const double a = o.averaging.value_or(d.averaging);
    const double f = purcell::purcell_factor(q, v, a);
    report["q_cavity"] = q;
    report["mode_volume_cubic_wavelengths"] = v;
    report["averaging"] = a;
    report["purcell_factor"] = f;
    report["beta"] = purcell::beta_factor(f);
    art.write("purcell.csv", [&](std::ostream &out) { write_key_values(out, report); });
    return report;
}

inline void purcell_selftest(SelfTest &t)
{
    t.attempt("no enhancement without Q", [](SelfTest &t) {
        t.check("no enhancement without Q", purcell::purcell_factor(0.0, 10.0) == 1.0);
    });
    t.attempt("closed form", [](SelfTest &t) {
        const double f = purcell::purcell_factor(1000.0, 3.0, 1.0);
        const double expect = 1.0 + 3.0 / (4.0 * constants::pi * constants::pi) * 1000.0 / 3.0;
        t.check("closed form", close_rel(f, expect, 1e-15), {{"purcell_factor", f}});
    });
    t.attempt("beta limits", [](SelfTest &t) {
        t.check("beta limits", purcell::beta_factor(0.0) == 0.0 && close(purcell::beta_factor(1.0), 0.5, 0.0));
    });
}

struct BudgetCmdOptions
{
    ChainOptions chain;
    std::optional<double> purcell;
    std::optional<double> q_cavity;
    std::optional<double> stokes_fwhm_pm;
    std::optional<double> na;
    std::optional<double> na_high;
    std::optional<double> eta_cavity;
    std::optional<double> eta_objective;
    std::optional<double> measured_ratio;
};

inline json budget(const BudgetCmdOptions &o, const Defaults &d, Artifacts &art)
{
    const auto ch = quantize_chain(o.chain, d);
    const double n_host = ch.cavity.membrane.refractive_index;
    const double qc = o.q_cavity.value_or(d.q_cavity);
    const double f = o.purcell.value_or(purcell::purcell_factor(qc, ch.volume.cubic_wavelengths, d.averaging));
    const double qs = raman::linewidth_convert(o.stokes_fwhm_pm.value_or(d.stokes_fwhm_pm), raman::LinewidthUnit::pm,
                                               raman::LinewidthUnit::q, ch.wavelength_nm);
    const auto rates = purcell::mirror_rates(ch.cavity, ch.wavelength_nm);

    auto make = [&](double na) {
        auto b = purcell::enhancement_budget(f, qs, qc, rates, na, n_host);
        if (o.eta_cavity || o.eta_objective)
        {
            const double ec = o.eta_cavity.value_or(b.eta_cavity.value);
            const double eo = o.eta_objective.value_or(b.eta_objective.value);
            auto s = purcell::enhancement_budget(f, qs, qc, ec, eo);
            if (!o.eta_cavity)
                s.eta_cavity.provenance = purcell::Provenance::computed;
            if (!o.eta_objective)
                s.eta_objective.provenance = purcell::Provenance::computed;
            s.kappa_top = b.kappa_top;
            s.kappa_bottom = b.kappa_bottom;
            b = s;
        }
        if (!o.purcell)
            b.purcell.provenance = purcell::Provenance::computed;
        b.measured_ratio = o.measured_ratio.value_or(d.measured_ratio);
        return b;
    };
    const auto main = make(o.na.value_or(d.na));
    const auto high = make(o.na_high.value_or(d.na_high));

    json report;
    report["chain"] = chain_json(ch);
    report["na"] = o.na.value_or(d.na);
    report["budget"] = purcell::io::budget_to_json(main);
    report["na_high"] = o.na_high.value_or(d.na_high);
    report["budget_na_high"] = purcell::io::budget_to_json(high);
    report["mirror_top_fraction"] = rates.top_fraction();
    art.write("budget.csv", [&](std::ostream &out) {
        out << "factor,value,provenance\n";
        auto row = [&](const char *name, const purcell::Factor &x) {
            out << name << ',' << io::format_number(x.value) << ',' << purcell::to_string(x.provenance) << '\n';
        };
        row("purcell_factor", main.purcell);
        row("beta", main.beta);
        if (main.kappa_top)
            row("kappa_top", *main.kappa_top);
        if (main.kappa_bottom)
            row("kappa_bottom", *main.kappa_bottom);
        row("eta_cavity", main.eta_cavity);
        row("eta_objective", main.eta_objective);
        row("q_cavity", main.q_cavity);
        row("q_stokes", main.q_stokes);
        out << "spectral_overlap," << io::format_number(main.spectral_overlap) << ",computed\n";
        out << "collection_gain," << io::format_number(main.collection_gain) << ",computed\n";
        out << "predicted_ratio," << io::format_number(main.predicted_ratio) << ",computed\n";
        if (main.measured_ratio)
            out << "measured_ratio," << io::format_number(*main.measured_ratio) << ",supplied\n";
    });
    return report;
}

inline void budget_selftest(SelfTest &t)
{
    t.attempt("ratio is the product of its factors", [](SelfTest &t) {
        const auto b = purcell::enhancement_budget(4.0, 8000.0, 8000.0, 0.4, 0.1);
        t.check("ratio is the product of its factors", close_rel(b.predicted_ratio, 4.0 * 0.5 * 4.0, 1e-15),
                {{"predicted_ratio", b.predicted_ratio}});
    });
    t.attempt("unresolved cavity line gives full overlap", [](SelfTest &t) {
        const auto b = purcell::enhancement_budget(2.0, 8000.0, 0.0, 0.5, 0.5);
        t.check("unresolved cavity line gives full overlap", b.spectral_overlap == 1.0);
    });
    t.attempt("zero NA collects nothing", [](SelfTest &t) {
        t.check("zero NA collects nothing", purcell::eta_objective(0.0, 2.41) == 0.0);
    });
}

// ---- fit-spectrum ------------------------------------------------------------

struct FitSpectrumOptions
{
    std::string spectrum;
    std::string model = "lorentzian";
    std::optional<double> stokes_center_nm;
    std::optional<double> stokes_fwhm_pm;
    bool free_stokes_center = false;
    bool free_stokes_width = false;
};

inline json fit_spectrum(const FitSpectrumOptions &o, const Defaults &d, Artifacts &art)
{
    if (o.spectrum.empty())
        throw usage_error("fit-spectrum: --spectrum FILE is required");
    const auto s = read_two_column(o.spectrum);
    json report{{"model", o.model}, {"points", s.size()}};
    std::function<double(double)> model;
    if (o.model == "lorentzian")
    {
        const auto f = spectrafit::fit_lorentzian(s);
        report["fit"] = spectrafit::io::to_json(f);
        report["q"] = f.center / f.fwhm;
        model = [f](double x) { return f.evaluate(x); };
    }
    else
    {
        spectrafit::ProductFitOptions po;
        po.fix_stokes_center = !o.free_stokes_center;
        po.fix_stokes_width = !o.free_stokes_width;
        const auto f = spectrafit::fit_lorentzian_product(s, o.stokes_center_nm.value_or(default_stokes_nm(d)),
                                                          o.stokes_fwhm_pm.value_or(d.stokes_fwhm_pm), po);
        report["fit"] = spectrafit::io::to_json(f);
        model = [f](double x) { return f.evaluate(x); };
    }
    art.write("fit.csv", [&](std::ostream &out) {
        out << "lambda_nm,counts,model,residual\n";
        for (std::size_t i = 0; i < s.size(); ++i)
        {
            const double m = model(s.wavelengths_nm[i]);
            csv_row(out, {s.wavelengths_nm[i], s.counts[i], m, s.counts[i] - m});
        }
    });
    return report;
}

inline void fit_spectrum_selftest(SelfTest &t)
{
    t.attempt("noiseless Lorentzian round trip", [](SelfTest &t) {
        std::vector<double> x;
        std::vector<double> y;
        for (double l : numerics::linspace(572.0, 573.4, 281))
        {
            x.push_back(l);
            y.push_back(1000.0 * spectrafit::lorentzian(l, 572.67, 0.07) + 50.0);
        }
        const auto f = spectrafit::fit_lorentzian(x, y);
        t.check("noiseless Lorentzian round trip", close(f.center, 572.67, 1e-6) && close_rel(f.fwhm, 0.07, 1e-6),
                {{"center_nm", f.center}, {"fwhm_pm", f.fwhm_pm()}});
    });
    t.attempt("product with fixed Stokes line", [](SelfTest &t) {
        std::vector<double> x;
        std::vector<double> y;
        for (double l : numerics::linspace(572.2, 573.2, 401))
        {
            x.push_back(l);
            y.push_back(800.0 * spectrafit::lorentzian(l, 572.70, 0.07) * spectrafit::lorentzian(l, 572.67, 0.071) +
                        20.0);
        }
        const auto f = spectrafit::fit_lorentzian_product(x, y, 572.67, 71.0);
        t.check("product with fixed Stokes line", close_rel(f.cavity_fwhm_pm, 70.0, 1e-3),
                {{"cavity_fwhm_pm", f.cavity_fwhm_pm}});
    });
}

// ---- finesse -----------------------------------------------------------------

struct FinesseCmdOptions
{
    std::string scan;
    std::optional<double> wavelength_nm;
};

inline json finesse(const FinesseCmdOptions &o, const Defaults &d, Artifacts &art)
{
    const double lambda = o.wavelength_nm.value_or(default_stokes_nm(d));
    const auto c = d.cavity();
    const double R1 = tmm::response(c.bottom_mirror, lambda).R;
    const double R2 = tmm::response(c.top_mirror, lambda).R;
    json report{{"wavelength_nm", lambda},
                {"R_bottom", R1},
                {"R_top", R2},
                {"design_finesse", spectrafit::design_finesse(R1, R2)}};
    if (!o.scan.empty())
    {
        const auto s = read_two_column(o.scan);
        const auto f = spectrafit::finesse_from_length_scan(s.wavelengths_nm, s.counts, lambda);
        report["finesse"] = f.finesse;
        report["fwhm_gap_nm"] = f.fwhm_nm;
        report["center_gap_nm"] = f.center_nm;
        report["fit"] = spectrafit::io::to_json(f.line);
        art.write("finesse_fit.csv", [&](std::ostream &out) {
            out << "gap_nm,intensity,model\n";
            for (std::size_t i = 0; i < s.size(); ++i)
                csv_row(out, {s.wavelengths_nm[i], s.counts[i], f.line.evaluate(s.wavelengths_nm[i])});
        });
    }
    art.write("finesse.csv", [&](std::ostream &out) { write_key_values(out, report); });
    return report;
}

inline void finesse_selftest(SelfTest &t)
{
    t.attempt("synthetic length scan", [](SelfTest &t) {
        const double l = 572.67;
        const double fwhm = 0.5 * l / 350.0;
        std::vector<double> g;
        std::vector<double> y;
        for (double x : numerics::linspace(2600.0 - 6.0, 2600.0 + 6.0, 241))
        {
            g.push_back(x);
            y.push_back(spectrafit::lorentzian(x, 2600.0, fwhm));
        }
        const auto f = spectrafit::finesse_from_length_scan(g, y, l);
        t.check("synthetic length scan", close_rel(f.finesse, 350.0, 1e-6), {{"finesse", f.finesse}});
    });
    t.attempt("equal mirrors", [](SelfTest &t) {
        const double R = 0.99;
        const double f = spectrafit::design_finesse(R, R);
        t.check("equal mirrors", close_rel(f, constants::pi * std::sqrt(R) / (1.0 - R), 1e-12), {{"finesse", f}});
    });
}

// ---- enhancement -------------------------------------------------------------

struct EnhancementCmdOptions
{
    std::string on;
    std::string off;
    bool subtract_background = false;
};

inline json enhancement(const EnhancementCmdOptions &o, const Defaults &, Artifacts &art)
{
    if (o.on.empty() || o.off.empty())
        throw usage_error("enhancement: --on FILE and --off FILE are required");
    const auto on = read_two_column(o.on);
    const auto off = read_two_column(o.off);
    const auto r = spectrafit::enhancement_ratio(on, off, o.subtract_background);
    json report{{"ratio", r.ratio},
                {"on_integral", r.on_integral},
                {"off_integral", r.off_integral},
                {"subtract_background", o.subtract_background},
                {"on_normalized", {{"integration_time", on.integration_time_s.has_value()},
                                   {"power", on.power_mW.has_value()}}},
                {"off_normalized", {{"integration_time", off.integration_time_s.has_value()},
                                    {"power", off.power_mW.has_value()}}}};
    art.write("enhancement.csv", [&](std::ostream &out) { write_key_values(out, report); });
    return report;
}

inline void enhancement_selftest(SelfTest &t)
{
    MeasuredSpectrum s;
    for (double l : numerics::linspace(570.0, 575.0, 51))
    {
        s.wavelengths_nm.push_back(l);
        s.counts.push_back(100.0 + 10.0 * spectrafit::lorentzian(l, 572.67, 0.2));
    }
    t.attempt("identical spectra", [&](SelfTest &t) {
        t.check("identical spectra", spectrafit::enhancement_ratio(s, s).ratio == 1.0);
    });
    t.attempt("integration time normalization", [&](SelfTest &t) {
        auto a = s;
        auto b = s;
        a.integration_time_s = 1.0;
        b.integration_time_s = 2.0;
        const double r = spectrafit::enhancement_ratio(a, b).ratio;
        t.check("integration time normalization", close_rel(r, 2.0, 1e-14), {{"ratio", r}});
    });
}

// ---- raman-convert -----------------------------------------------------------

struct RamanOptions
{
    std::optional<double> pump_nm;
    std::optional<double> shift_invcm;
    std::optional<double> stokes_nm;
    std::optional<double> linewidth_pm;
    std::optional<double> linewidth_ghz;
    std::optional<double> linewidth_q;
    std::optional<double> reference_nm;
    std::optional<double> instrument_ghz;
};

inline json raman_convert(const RamanOptions &o, const Defaults &d, Artifacts &art)
{
    const raman::RamanShift shift{o.shift_invcm.value_or(d.shift_invcm)};
    json report;
    report["shift_invcm"] = shift.invcm;
    double stokes = 0.0;
    if (o.stokes_nm)
    {
        stokes = *o.stokes_nm;
        report["stokes_nm"] = stokes;
        report["pump_nm"] = raman::pump_wavelength(stokes, shift);
    }
    else
    {
        const double pump = o.pump_nm.value_or(d.pump_nm);
        stokes = raman::stokes_wavelength(pump, shift);
        report["pump_nm"] = pump;
        report["stokes_nm"] = stokes;
    }

    std::optional<raman::Linewidth> w;
    if (o.linewidth_pm)
        w = raman::Linewidth{*o.linewidth_pm, raman::LinewidthUnit::pm, {}};
    else if (o.linewidth_ghz)
        w = raman::Linewidth{*o.linewidth_ghz, raman::LinewidthUnit::ghz, {}};
    else if (o.linewidth_q)
        w = raman::Linewidth{*o.linewidth_q, raman::LinewidthUnit::q, {}};
    if (w)
    {
        w->reference_nm = o.reference_nm.value_or(stokes);
        const double ghz = raman::convert(*w, raman::LinewidthUnit::ghz).value;
        json lw{{"reference_nm", *w->reference_nm},
                {"pm", raman::convert(*w, raman::LinewidthUnit::pm).value},
                {"ghz", ghz},
                {"q", raman::convert(*w, raman::LinewidthUnit::q).value}};
        double phonon = ghz;
        if (o.instrument_ghz)
        {
            phonon = raman::deconvolve_lorentzian(ghz, *o.instrument_ghz);
            lw["instrument_ghz"] = *o.instrument_ghz;
            lw["deconvolved_ghz"] = phonon;
        }
        lw["phonon_lifetime_ps"] = raman::phonon_lifetime_ps(phonon);
        report["linewidth"] = lw;
    }
    else if (o.reference_nm || o.instrument_ghz)
        throw usage_error("raman-convert: --reference-nm and --instrument-ghz need a --linewidth-* value");
    art.write("conversion.csv", [&](std::ostream &out) { write_key_values(out, report); });
    return report;
}

inline void raman_selftest(SelfTest &t)
{
    t.attempt("zero shift keeps the pump", [](SelfTest &t) {
        t.check("zero shift keeps the pump", raman::stokes_wavelength(532.0, 0.0) == 532.0);
    });
    t.attempt("pump and Stokes round trip", [](SelfTest &t) {
        const double p = raman::pump_wavelength(raman::stokes_wavelength(532.0, 1335.0), raman::RamanShift{1335.0});
        t.check("pump and Stokes round trip", close(p, 532.0, 1e-9), {{"pump_nm", p}});
    });
    t.attempt("linewidth unit round trip", [](SelfTest &t) {
        using U = raman::LinewidthUnit;
        const double ghz = raman::linewidth_convert(71.0, U::pm, U::ghz, 572.67);
        const double q = raman::linewidth_convert(ghz, U::ghz, U::q, 572.67);
        const double pm = raman::linewidth_convert(q, U::q, U::pm, 572.67);
        t.check("linewidth unit round trip", close_rel(pm, 71.0, 1e-12), {{"pm", pm}});
    });
}

// ---- linearity ---------------------------------------------------------------

struct LinearityCmdOptions
{
    std::string data;
};

inline json linearity(const LinearityCmdOptions &o, const Defaults &, Artifacts &art)
{
    if (o.data.empty())
        throw usage_error("linearity: --data FILE is required");
    const auto s = read_two_column(o.data);
    const auto l = spectrafit::power_linearity(s.wavelengths_nm, s.counts);
    art.write("linearity.csv", [&](std::ostream &out) {
        out << "power_mW,signal,line\n";
        for (std::size_t i = 0; i < s.size(); ++i)
            csv_row(out, {s.wavelengths_nm[i], s.counts[i], l.intercept + l.slope * s.wavelengths_nm[i]});
    });
    json report = spectrafit::io::to_json(l);
    report["points"] = s.size();
    return report;
}

inline void linearity_selftest(SelfTest &t)
{
    const std::vector<double> p{1.0, 2.0, 4.0, 8.0, 16.0};
    t.attempt("proportional signal is linear", [&](SelfTest &t) {
        std::vector<double> y;
        for (double x : p)
            y.push_back(3.0 * x);
        const auto l = spectrafit::power_linearity(p, y);
        t.check("proportional signal is linear", close(l.exponent, 1.0, 1e-12) && l.verdict == "linear",
                {{"exponent", l.exponent}});
    });
    t.attempt("quadratic signal is super-linear", [&](SelfTest &t) {
        std::vector<double> y;
        for (double x : p)
            y.push_back(x * x);
        const auto l = spectrafit::power_linearity(p, y);
        t.check("quadratic signal is super-linear", close(l.exponent, 2.0, 1e-12) && l.verdict == "super-linear",
                {{"exponent", l.exponent}});
    });
}

} // namespace fpcav::cli
