#pragma once

// Command-line front end. run() never calls exit(); the return value is the exit status.

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"

namespace fpcav::cli
{

struct Options
{
    std::string defaults_file;
    std::string out_dir;
    bool selftest = false;

    SpectrumOptions spectrum;
    StopbandOptions stopband;
    RefineCmdOptions refine;
    ModeMapCmdOptions mode_map;
    FitGeometryCmdOptions fit_geometry;
    GaussCmdOptions gauss;
    RenderOptions render;
    ChainOptions quantize;
    PurcellCmdOptions purcell;
    BudgetCmdOptions budget;
    FitSpectrumOptions fit_spectrum;
    FinesseCmdOptions finesse;
    EnhancementCmdOptions enhancement;
    RamanOptions raman;
    LinearityCmdOptions linearity;
};

using Handler = std::function<json(const Options &, const Defaults &, Artifacts &)>;

struct Command
{
    Handler handler;
    std::function<void(SelfTest &)> selftest;
};

inline void add_stack_source(CLI::App *s, StackSource &src)
{
    auto *f = s->add_option("--stack", src.file, "stack document (JSON)")->check(CLI::ExistingFile);
    s->add_option("--mirror", src.mirror, "use a mirror from the defaults")
        ->check(CLI::IsMember({"bottom", "top", "cavity"}))
        ->excludes(f);
}

inline void add_chain_options(CLI::App *s, ChainOptions &c)
{
    s->add_option("--membrane-nm", c.membrane_nm, "membrane thickness");
    s->add_option("--air-gap-nm", c.air_gap_nm, "air gap (snapped to resonance unless --no-snap)");
    s->add_flag("--no-snap", c.no_snap, "use the air gap as given");
    s->add_option("--wavelength-nm", c.wavelength_nm, "mode wavelength (default: Stokes line)");
    s->add_option("--waist-um", c.waist_um, "1/e intensity waist");
    s->add_option("--step-nm", c.step_nm, "field sampling step")->check(CLI::PositiveNumber);
}

inline std::map<std::string, Command> build_app(CLI::App &app, Options &o)
{
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.add_option("--defaults", o.defaults_file, "defaults file (overrides FPCAV_DEFAULTS)")
        ->check(CLI::ExistingFile);

    std::map<std::string, Command> cmds;
    auto sub = [&](const std::string &name, const std::string &help, Handler h, std::function<void(SelfTest &)> st) {
        auto *s = app.add_subcommand(name, help);
        s->add_option("--out-dir", o.out_dir, "directory for data artifacts");
        s->add_flag("--selftest", o.selftest, "run the built-in checks");
        cmds[name] = {std::move(h), std::move(st)};
        return s;
    };

    auto *s = sub("stack-spectrum", "reflectance and transmittance of a layer stack",
                  [](const Options &o, const Defaults &d, Artifacts &a) { return stack_spectrum(o.spectrum, d, a); },
                  stack_spectrum_selftest);
    add_stack_source(s, o.spectrum.stack);
    s->add_option("--lambda-min-nm", o.spectrum.lambda_min_nm, "first wavelength");
    s->add_option("--lambda-max-nm", o.spectrum.lambda_max_nm, "last wavelength");
    s->add_option("--lambda-step-nm", o.spectrum.lambda_step_nm, "wavelength step")->check(CLI::PositiveNumber);

    s = sub("stopband", "high-reflectance band of a mirror",
            [](const Options &o, const Defaults &d, Artifacts &a) { return stopband(o.stopband, d, a); },
            stopband_selftest);
    add_stack_source(s, o.stopband.stack);
    s->add_option("--lambda-min-nm", o.stopband.lambda_min_nm, "first wavelength");
    s->add_option("--lambda-max-nm", o.stopband.lambda_max_nm, "last wavelength");
    s->add_option("--lambda-step-nm", o.stopband.lambda_step_nm, "wavelength step")->check(CLI::PositiveNumber);
    s->add_option("--threshold", o.stopband.threshold, "reflectance defining the band");
    s->add_option("--probe-nm", o.stopband.probe_nm, "wavelengths to test (default: pump and Stokes)");

    s = sub("refine", "fit layer thicknesses to a measured transmission spectrum",
            [](const Options &o, const Defaults &d, Artifacts &a) { return refine(o.refine, d, a); }, refine_selftest);
    add_stack_source(s, o.refine.stack);
    s->add_option("--measured", o.refine.measured, "two-column transmission spectrum")->check(CLI::ExistingFile);
    s->add_option("--thickness-tolerance", o.refine.thickness_tolerance, "relative bound per layer");
    s->add_option("--max-evaluations", o.refine.max_evaluations, "model evaluation budget");

    s = sub("mode-map", "transmission resonances versus air gap",
            [](const Options &o, const Defaults &d, Artifacts &a) { return mode_map(o.mode_map, d, a); },
            mode_map_selftest);
    s->add_option("--membrane-nm", o.mode_map.membrane_nm, "membrane thickness");
    s->add_option("--gap-min-nm", o.mode_map.gap_min_nm, "first air gap");
    s->add_option("--gap-max-nm", o.mode_map.gap_max_nm, "last air gap");
    s->add_option("--gap-step-nm", o.mode_map.gap_step_nm, "air-gap step")->check(CLI::PositiveNumber);
    s->add_option("--lambda-min-nm", o.mode_map.lambda_min_nm, "window start");
    s->add_option("--lambda-max-nm", o.mode_map.lambda_max_nm, "window end");
    s->add_option("--lambda-step-nm", o.mode_map.lambda_step_nm, "detection grid")->check(CLI::PositiveNumber);
    s->add_option("--probe-nm", o.mode_map.probe_nm, "wavelength for branch slopes (default: Stokes line)");

    s = sub("fit-geometry", "membrane thickness and air gap from two branch slopes",
            [](const Options &o, const Defaults &d, Artifacts &a) { return fit_geometry(o.fit_geometry, d, a); },
            fit_geometry_selftest);
    auto &fg = o.fit_geometry;
    s->add_option("--slopes-pm-per-nm", fg.slopes_pm_per_nm, "two slopes, shorter-gap branch first")->expected(2);
    s->add_option("--wavelength-nm", fg.wavelength_nm, "wavelength of the slopes (default: Stokes line)");
    s->add_option("--membrane-nm", fg.membrane_nm, "hold the membrane thickness fixed");
    s->add_option("--membrane-min-nm", fg.membrane_min_nm, "search bound");
    s->add_option("--membrane-max-nm", fg.membrane_max_nm, "search bound");
    s->add_option("--gap-min-nm", fg.gap_min_nm, "search bound");
    s->add_option("--gap-max-nm", fg.gap_max_nm, "search bound");
    s->add_option("--membrane-step-nm", fg.membrane_step_nm, "coarse grid step");
    s->add_option("--tolerance-pm-per-nm", fg.tolerance_pm_per_nm, "rms slope mismatch counted as a match");
    auto *nm = s->add_option("--nominal-membrane-nm", fg.nominal_membrane_nm, "prior for basin selection");
    auto *ng = s->add_option("--nominal-gap-nm", fg.nominal_gap_nm, "prior for basin selection");
    s->add_flag("--no-nominal", fg.no_nominal, "select by residual only")->excludes(nm)->excludes(ng);
    s->add_option("--max-candidates", fg.max_candidates, "candidates listed in the report");

    s = sub("gauss-modes", "Hermite-Gauss resonance lengths and beam waists",
            [](const Options &o, const Defaults &d, Artifacts &a) { return gauss_modes(o.gauss, d, a); },
            gauss_modes_selftest);
    s->add_option("--wavelength-nm", o.gauss.wavelength_nm, "wavelength (default: Stokes line)");
    s->add_option("--radius-um", o.gauss.radius_um, "mirror radius of curvature");
    s->add_option("--length-um", o.gauss.length_um, "cavity length for waists and reference");
    s->add_option("--length-min-um", o.gauss.length_min_um, "map range");
    s->add_option("--length-max-um", o.gauss.length_max_um, "map range");
    s->add_option("--max-order", o.gauss.max_order, "largest n+m");

    s = sub("render-mode", "Hermite-Gauss intensity image",
            [](const Options &o, const Defaults &d, Artifacts &a) { return render_mode(o.render, d, a); },
            render_mode_selftest);
    s->add_option("--n", o.render.n, "x order");
    s->add_option("--m", o.render.m, "y order");
    s->add_option("--waist-um", o.render.waist_um, "1/e intensity waist");
    s->add_option("--pitch-um", o.render.pitch_um, "pixel pitch");
    s->add_option("--size-px", o.render.size_px, "image side");

    s = sub("quantize", "vacuum field of the cavity mode",
            [](const Options &o, const Defaults &d, Artifacts &a) { return quantize(o.quantize, d, a); },
            quantize_selftest);
    add_chain_options(s, o.quantize);

    s = sub("purcell", "Purcell factor from Q and mode volume",
            [](const Options &o, const Defaults &d, Artifacts &a) { return purcell_cmd(o.purcell, d, a); },
            purcell_selftest);
    add_chain_options(s, o.purcell.chain);
    s->add_option("--q", o.purcell.q, "cavity quality factor");
    s->add_option("--mode-volume-cubic-wavelengths", o.purcell.volume_cubic_wavelengths,
                  "mode volume in (lambda/n)^3 (default: computed)");
    s->add_option("--averaging", o.purcell.averaging, "dipole orientation factor");

    s = sub("budget", "predicted cavity-to-objective signal ratio",
            [](const Options &o, const Defaults &d, Artifacts &a) { return budget(o.budget, d, a); },
            budget_selftest);
    auto &b = o.budget;
    add_chain_options(s, b.chain);
    s->add_option("--purcell", b.purcell, "Purcell factor (default: computed)");
    s->add_option("--q-cavity", b.q_cavity, "cavity quality factor");
    s->add_option("--stokes-fwhm-pm", b.stokes_fwhm_pm, "free-space Stokes linewidth");
    s->add_option("--na", b.na, "objective numerical aperture");
    s->add_option("--na-high", b.na_high, "second numerical aperture for comparison");
    s->add_option("--eta-cavity", b.eta_cavity, "cavity collection efficiency (default: computed)");
    s->add_option("--eta-objective", b.eta_objective, "objective collection efficiency (default: computed)");
    s->add_option("--measured-ratio", b.measured_ratio, "measured enhancement for comparison");

    s = sub("fit-spectrum", "Lorentzian or Lorentzian-product fit",
            [](const Options &o, const Defaults &d, Artifacts &a) { return fit_spectrum(o.fit_spectrum, d, a); },
            fit_spectrum_selftest);
    auto &fs = o.fit_spectrum;
    s->add_option("--spectrum", fs.spectrum, "two-column spectrum")->check(CLI::ExistingFile);
    s->add_option("--model", fs.model, "lorentzian or product")->check(CLI::IsMember({"lorentzian", "product"}));
    s->add_option("--stokes-center-nm", fs.stokes_center_nm, "Stokes line centre (default: from pump)");
    s->add_option("--stokes-fwhm-pm", fs.stokes_fwhm_pm, "Stokes line width");
    s->add_flag("--free-stokes-center", fs.free_stokes_center, "fit the Stokes centre");
    s->add_flag("--free-stokes-width", fs.free_stokes_width, "fit the Stokes width");

    s = sub("finesse", "finesse from the mirrors and from a length scan",
            [](const Options &o, const Defaults &d, Artifacts &a) { return finesse(o.finesse, d, a); },
            finesse_selftest);
    s->add_option("--scan", o.finesse.scan, "two-column scan: air gap (nm), intensity")->check(CLI::ExistingFile);
    s->add_option("--wavelength-nm", o.finesse.wavelength_nm, "scan wavelength (default: Stokes line)");

    s = sub("enhancement", "ratio of integrated on- and off-cavity spectra",
            [](const Options &o, const Defaults &d, Artifacts &a) { return enhancement(o.enhancement, d, a); },
            enhancement_selftest);
    s->add_option("--on", o.enhancement.on, "cavity spectrum")->check(CLI::ExistingFile);
    s->add_option("--off", o.enhancement.off, "reference spectrum")->check(CLI::ExistingFile);
    s->add_flag("--subtract-background", o.enhancement.subtract_background, "remove the end-point mean");

    s = sub("raman-convert", "Stokes wavelength and linewidth units",
            [](const Options &o, const Defaults &d, Artifacts &a) { return raman_convert(o.raman, d, a); },
            raman_selftest);
    auto &r = o.raman;
    auto *pump = s->add_option("--pump-nm", r.pump_nm, "pump wavelength");
    s->add_option("--shift-invcm", r.shift_invcm, "Raman shift");
    s->add_option("--stokes-nm", r.stokes_nm, "Stokes wavelength; reports the pump")->excludes(pump);
    auto *lp = s->add_option("--linewidth-pm", r.linewidth_pm, "linewidth");
    auto *lg = s->add_option("--linewidth-ghz", r.linewidth_ghz, "linewidth")->excludes(lp);
    s->add_option("--linewidth-q", r.linewidth_q, "linewidth as a quality factor")->excludes(lp)->excludes(lg);
    s->add_option("--reference-nm", r.reference_nm, "wavelength for unit conversion (default: Stokes)");
    s->add_option("--instrument-ghz", r.instrument_ghz, "Lorentzian width to subtract before the lifetime");

    s = sub("linearity", "power-law exponent of signal versus pump power",
            [](const Options &o, const Defaults &d, Artifacts &a) { return linearity(o.linearity, d, a); },
            linearity_selftest);
    s->add_option("--data", o.linearity.data, "two-column file: power (mW), signal")->check(CLI::ExistingFile);

    return cmds;
}

inline int fail(std::ostream &err, int code, const std::string &kind, const std::string &message)
{
    const json e{{"error", kind}, {"exit_code", code}, {"message", message}};
    err << e.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    return code;
}

inline Defaults resolve_defaults(const Options &o)
{
    if (!o.defaults_file.empty())
        return read_defaults(o.defaults_file);
    return load_defaults();
}

inline int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Tunable Fabry-Perot microcavity toolkit", "fpcav"};
    Options o;
    std::map<std::string, Command> cmds;
    try
    {
        cmds = build_app(app, o);
        app.parse(argc, argv);
    }
    catch (const CLI::Success &e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError &e)
    {
        return fail(err, exit_usage, "usage", e.what());
    }

    const std::string name = app.get_subcommands().front()->get_name();
    const auto &cmd = cmds.at(name);
    try
    {
        if (o.selftest)
        {
            SelfTest t;
            cmd.selftest(t);
            out << t.report(name).dump(2) << '\n';
            return t.ok() ? exit_ok : exit_numeric;
        }
        const auto defaults = resolve_defaults(o);
        Artifacts art(o.out_dir);
        json report{{"command", name}, {"defaults", defaults.source}};
        const json body = cmd.handler(o, defaults, art);
        for (const auto &[k, v] : body.items())
            report[k] = v;
        if (art.enabled())
            report["artifacts"] = art.list();
        out << report.dump(2) << '\n';
        return exit_ok;
    }
    catch (const usage_error &e)
    {
        return fail(err, exit_usage, "usage", e.what());
    }
    catch (const format_error &e)
    {
        return fail(err, exit_format, "input-format", e.what());
    }
    catch (const nlohmann::json::exception &e)
    {
        return fail(err, exit_format, "input-format", e.what());
    }
    catch (const numeric_error &e)
    {
        return fail(err, exit_numeric, "numeric", e.what());
    }
    catch (const std::invalid_argument &e)
    {
        return fail(err, exit_usage, "usage", e.what());
    }
    catch (const std::exception &e)
    {
        return fail(err, exit_numeric, "numeric", e.what());
    }
}

} // namespace fpcav::cli
