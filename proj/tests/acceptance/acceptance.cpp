// Acceptance run: one PASS/FAIL line per criterion, INFO lines for context.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <fpcav/fpcav.hpp>

#include "oracles.hpp"

using namespace fpcav;

namespace
{
int failures = 0;

void verdict(int id, const char *name, bool pass, const std::string &detail)
{
    std::printf("%s %2d %-22s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    if (!pass)
        ++failures;
}

void info(const std::string &text) { std::printf("INFO    %s\n", text.c_str()); }

std::string fmt(const char *f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

const Defaults defaults = load_defaults();
const double lambda_s = raman::stokes_wavelength(defaults.pump_nm, defaults.shift_invcm);

CavityAssembly paper_cavity() { return coupled::snap_air_gap(defaults.cavity(), lambda_s); }

void raman_kinematics()
{
    const double s = raman::stokes_wavelength(532.0, 1335.0);
    const double o = oracle::stokes_from_energy(532.0, 1335.0);
    verdict(1, "raman-kinematics", within(s, 572.67, 0.05) && within(s, o, 1e-9),
            fmt("stokes(532 nm, 1335 /cm) = %.4f nm, energy oracle %.4f nm, target 572.67 +- 0.05", s, o));
}

void linewidth_chain()
{
    using U = raman::LinewidthUnit;
    const double narrow = raman::stokes_wavelength(636.0, 1335.0);
    const double g77 = raman::linewidth_convert(77.0, U::pm, U::ghz, narrow);
    const double g71 = raman::linewidth_convert(71.0, U::pm, U::ghz, 572.67);
    const double q70 = raman::linewidth_convert(70.0, U::pm, U::q, 572.67);
    const bool ok = within(g77, 47.8, 0.3) && within(g71, 64.9, 0.3) && within(q70, 8200.0, 100.0);
    verdict(2, "linewidth-chain", ok,
            fmt("77 pm @ %.2f nm = %.2f GHz (47.8 +- 0.3); 71 pm = %.2f GHz (64.9 +- 0.3); 70 pm = Q %.0f (8200 +- 100)",
                narrow, g77, g71, q70));
}

void phonon_lifetime()
{
    const double a = raman::phonon_lifetime_ps(40.8);
    const double b = raman::phonon_lifetime_ps(44.2);
    verdict(3, "phonon-lifetime", within(a, 3.9, 0.05) && within(b, 3.6, 0.05),
            fmt("40.8 GHz -> %.3f ps (3.9), 44.2 GHz -> %.3f ps (3.6), tolerance 0.05", a, b));
}

void mode_numbers()
{
    const int a = coupled::effective_mode_number(87.0).q;
    const int b = coupled::effective_mode_number(83.0).q;
    verdict(4, "mode-numbers", a == 23 && b == 24, fmt("87 pm/nm -> q %d (23), 83 pm/nm -> q %d (24)", a, b));
}

void geometry_inversion()
{
    const auto mirrors = defaults.cavity();
    coupled::GeometryFitOptions opt;
    opt.membrane_min_nm = defaults.fit_membrane_min_nm;
    opt.membrane_max_nm = defaults.fit_membrane_max_nm;
    opt.gap_min_nm = defaults.fit_gap_min_nm;
    opt.gap_max_nm = defaults.fit_gap_max_nm;
    opt.membrane_step_nm = defaults.fit_membrane_step_nm;
    opt.tolerance_pm_per_nm = defaults.fit_tolerance_pm_per_nm;
    opt.nominal_membrane_nm = defaults.fit_nominal_membrane_nm;
    opt.nominal_gap_nm = defaults.fit_nominal_gap_nm;
    const auto fit = coupled::fit_geometry(87.0, 83.0, mirrors, lambda_s, opt);
    const bool paper_ok = fit.best.membrane_nm >= 740.0 && fit.best.membrane_nm <= 800.0 &&
                          fit.best.gap_nm >= 2500.0 && fit.best.gap_nm <= 2700.0;

    // Synthetic round trip on a 5 x 5 grid of true geometries.
    const double period = lambda_s / 2.0;
    int good = 0;
    double worst = 0.0;
    for (double td : {700.0, 735.0, 770.0, 805.0, 840.0})
        for (double ta : {2300.0, 2450.0, 2600.0, 2750.0, 2900.0})
        {
            const auto truth = coupled::snap_air_gap(with_geometry(mirrors, td, ta), lambda_s);
            const double s2 = coupled::model_slope(truth, lambda_s);
            const double s1 = coupled::model_slope(with_geometry(truth, td, truth.air_gap_nm - period), lambda_s);
            coupled::GeometryFitOptions o;
            o.membrane_min_nm = td - 57.3;
            o.membrane_max_nm = td + 61.1;
            o.gap_min_nm = truth.air_gap_nm - 400.0;
            o.gap_max_nm = truth.air_gap_nm + 400.0;
            o.nominal_membrane_nm = td + 5.0;
            o.nominal_gap_nm = truth.air_gap_nm + 10.0;
            o.tolerance_pm_per_nm = 0.01;
            const auto f = coupled::fit_geometry(s1, s2, mirrors, lambda_s, o);
            const double e = std::max(std::abs(f.best.membrane_nm / td - 1.0),
                                      std::abs(f.best.gap_nm / truth.air_gap_nm - 1.0));
            worst = std::max(worst, e);
            good += e <= 0.01;
        }

    verdict(5, "geometry-inversion", paper_ok && good == 25,
            fmt("(87, 83) pm/nm -> t_d %.1f nm [740, 800], t_a %.1f nm [2500, 2700], q %d/%d, residual %.3f, "
                "selection %s; synthetic %d/25 within 1%% (worst %.2e)",
                fit.best.membrane_nm, fit.best.gap_nm, fit.q1, fit.q2, fit.best.residual_pm_per_nm,
                fit.selection.c_str(), good, worst));

    opt.nominal_membrane_nm = 800.0;
    opt.nominal_gap_nm = 2600.0;
    const auto assisted = coupled::fit_geometry(87.0, 83.0, mirrors, lambda_s, opt);
    info(fmt("geometry with the reported t_a = 2600 nm as prior: t_d %.1f nm, t_a %.1f nm, residual %.3f "
             "(%zu candidate basins; the slopes alone do not fix t_a)",
             assisted.best.membrane_nm, assisted.best.gap_nm, assisted.best.residual_pm_per_nm,
             assisted.candidates.size()));
}

void gaussian_optics()
{
    const auto w = gauss::beam_waists(4.07, 10.0, 572.67);
    const auto o = oracle::plano_concave_waists(4.07, 10.0, 572.67e-3);
    const bool oracle_ok = within(w.w0_field_um, o.w0, 1e-9) && within(w.w_mirror_field_um, o.wL, 1e-9);
    verdict(6, "gaussian-optics",
            within(w.w_mirror_intensity_um, 0.87, 0.03) && within(w.average_intensity_um(), 0.77, 0.03) && oracle_ok,
            fmt("w_mirror_I %.3f um (0.87 +- 0.03), average %.3f um (0.77 +- 0.03), ABCD oracle %s",
                w.w_mirror_intensity_um, w.average_intensity_um(), oracle_ok ? "agrees" : "disagrees"));
}

void quantization_chain()
{
    const auto c = paper_cavity();
    const double n = c.membrane.refractive_index;
    const auto q = purcell::quantize_cavity(c, defaults.waist_intensity_um, lambda_s);
    const auto v = purcell::mode_volume(q, n);
    const double back = purcell::field_from_volume(v.cubic_wavelengths, n, lambda_s);
    const double consistency = std::abs(back / q.max_field_V_per_m - 1.0);
    const double f = purcell::purcell_factor(defaults.q_cavity, v.cubic_wavelengths, defaults.averaging);
    const bool ok = within(q.max_field_V_per_m, 54.4e3, 0.1 * 54.4e3) && within(v.cubic_wavelengths, 84.9, 8.49) &&
                    within(f, 4.7, 0.2) && consistency < 1e-6;
    verdict(7, "quantization-chain", ok,
            fmt("E_max %.1f kV/m (54.4 +- 10%%), V %.2f (lambda/n)^3 (84.9 +- 10%%), F_P %.3f (4.7 +- 0.2), "
                "V<->E %.1e",
                q.max_field_V_per_m * 1e-3, v.cubic_wavelengths, f, consistency));
}

void enhancement_budget()
{
    const auto c = paper_cavity();
    const double n = c.membrane.refractive_index;
    const auto q = purcell::quantize_cavity(c, defaults.waist_intensity_um, lambda_s);
    const double f = purcell::purcell_factor(defaults.q_cavity, purcell::mode_volume(q, n).cubic_wavelengths,
                                             defaults.averaging);
    const double qs = raman::linewidth_convert(defaults.stokes_fwhm_pm, raman::LinewidthUnit::pm,
                                               raman::LinewidthUnit::q, lambda_s);
    const auto rates = purcell::mirror_rates(c, lambda_s);
    const auto b = purcell::enhancement_budget(f, qs, defaults.q_cavity, rates, defaults.na, n);
    verdict(8, "enhancement-budget", within(b.predicted_ratio, 56.8, 0.15 * 56.8),
            fmt("S_c/S_o %.1f (56.8 +- 15%%), measured %.1f; F_P %.3f, overlap %.3f, kappa_t/(kappa_t+kappa_b) %.3f, "
                "eta_c %.3f, eta_o %.5f",
                b.predicted_ratio, defaults.measured_ratio, f, b.spectral_overlap, rates.top_fraction(),
                b.eta_cavity.value, b.eta_objective.value));
    const double needed = 56.8 / (f * b.spectral_overlap * purcell::beta_factor(f) / b.eta_objective.value);
    info(fmt("the reported 56.8 needs kappa_t/(kappa_t+kappa_b) = %.3f with these factors; the mirror "
             "transmittances give %.3f",
             needed, rates.top_fraction()));
}

void tmm_properties()
{
    std::mt19937_64 rng(20240501);
    std::uniform_int_distribution<int> count(0, 20);
    std::uniform_real_distribution<double> index(1.0, 3.0);
    std::uniform_real_distribution<double> thick(5.0, 500.0);
    std::uniform_real_distribution<double> wl(350.0, 1100.0);
    double worst = 0.0;
    double worst_oracle = 0.0;
    for (int k = 0; k < 10000; ++k)
    {
        LayerStack s{{"in", index(rng)}, {}, {"out", index(rng)}};
        std::vector<oracle::SimpleLayer> ol;
        for (int i = count(rng); i > 0; --i)
        {
            const Layer l{{"l", index(rng)}, thick(rng)};
            s.layers.push_back(l);
            ol.push_back({l.material.refractive_index, l.thickness_nm});
        }
        const double lam = wl(rng);
        const auto r = tmm::response(s, lam);
        worst = std::max(worst, std::abs(r.R + r.T - 1.0));
        const auto o = oracle::amplitude_tmm(s.incident.refractive_index, ol, s.exit.refractive_index, lam);
        worst_oracle = std::max(worst_oracle, std::abs(r.R - o.R));
    }

    const double nd = materials::diamond().refractive_index;
    const double fres = tmm::response(LayerStack{materials::air(), {}, materials::diamond()}, 600.0).R;
    const double fres_closed = oracle::fresnel_reflectance(1.0, nd);

    double qw = 0.0;
    const double nh = materials::ta2o5().refractive_index;
    const double nl = materials::sio2().refractive_index;
    const double ns = materials::silica().refractive_index;
    for (int p = 1; p <= 20; ++p)
    {
        const auto s = build_quarter_wave_dbr(600.0, p, materials::ta2o5(), materials::sio2(), materials::silica());
        qw = std::max(qw, std::abs(tmm::response(s, 600.0).R - oracle::quarter_wave_reflectance(p, 1.0, ns, nh, nl)));
    }
    const bool ok = worst < 1e-9 && std::abs(fres - fres_closed) < 1e-6 && within(fres, 0.171, 5e-4) && qw < 1e-6;
    verdict(9, "tmm-properties", ok,
            fmt("max |R+T-1| %.1e over 1e4 random stacks (amplitude oracle %.1e); air-diamond R %.6f vs closed form "
                "%.6f (n = %.2f, quoted 0.171); quarter-wave 1-20 pairs max error %.1e",
                worst, worst_oracle, fres, fres_closed, nd, qw));
}

void stopbands()
{
    const auto grid = numerics::arange(450.0, 800.0, 0.05);
    const auto bottom = tmm::stopband(tmm::spectrum(defaults.bottom_mirror, grid));
    const auto top = tmm::stopband(tmm::spectrum(defaults.top_mirror, grid));
    const bool ok = within(bottom.center_nm, 625.0, 10.0) && within(top.center_nm, 629.0, 10.0) &&
                    !bottom.contains(532.0) && !top.contains(532.0) && bottom.contains(573.0) && top.contains(573.0);
    verdict(10, "stopbands", ok,
            fmt("bottom centre %.1f nm (625 +- 10) [%.1f, %.1f], top centre %.1f nm (629 +- 10) [%.1f, %.1f]; "
                "532 nm outside, 573 nm inside: %s",
                bottom.center_nm, bottom.low_edge_nm, bottom.high_edge_nm, top.center_nm, top.low_edge_nm,
                top.high_edge_nm,
                (!bottom.contains(532.0) && !top.contains(532.0) && bottom.contains(573.0) && top.contains(573.0))
                    ? "yes"
                    : "no"));
}

void refinement()
{
    const auto nominal = defaults.bottom_mirror;
    auto truth = nominal;
    for (auto &l : truth.layers)
        l.thickness_nm *= 1.02;
    MeasuredSpectrum m;
    for (double l : numerics::linspace(450.0, 900.0, 451))
    {
        m.wavelengths_nm.push_back(l);
        m.counts.push_back(tmm::response(truth, l).T);
    }
    const auto r = tmm::refine_stack(nominal, m, {0.03, 10000});
    double worst = 0.0;
    bool bounded = true;
    for (std::size_t i = 0; i < truth.layers.size(); ++i)
    {
        worst = std::max(worst, std::abs(r.stack.layers[i].thickness_nm / truth.layers[i].thickness_nm - 1.0));
        bounded = bounded && std::abs(r.multipliers[i] - 1.0) <= 0.03 + 1e-12;
    }
    verdict(11, "refinement", worst <= 0.005 && bounded,
            fmt("%zu-layer mirror, +2%% truth: worst layer error %.2e (0.5%%), multipliers within 3%%: %s, "
                "residual %.1e",
                truth.layers.size(), worst, bounded ? "yes" : "no", r.residual));
}

void fitting_suite()
{
    using spectrafit::lorentzian;
    // Noiseless single line.
    std::vector<double> x;
    std::vector<double> y;
    for (double l : numerics::linspace(571.5, 573.8, 461))
    {
        x.push_back(l);
        y.push_back(1200.0 * lorentzian(l, 572.71, 0.074) + 30.0);
    }
    const auto lf = spectrafit::fit_lorentzian(x, y);
    double noiseless = std::max({std::abs(lf.center / 572.71 - 1.0), std::abs(lf.fwhm / 0.074 - 1.0),
                                 std::abs(lf.amplitude / 1200.0 - 1.0), std::abs(lf.offset / 30.0 - 1.0)});

    // Noiseless product.
    auto product = [&](double c, double w, double amp, double off) {
        std::vector<double> py;
        for (double l : x)
            py.push_back(amp * lorentzian(l, c, w) * lorentzian(l, lambda_s, 0.071) + off);
        return py;
    };
    const auto pf = spectrafit::fit_lorentzian_product(x, product(lambda_s + 0.25, 0.070, 1000.0, 5.0), lambda_s, 71.0);
    noiseless = std::max(noiseless, std::abs(pf.cavity_fwhm_pm / 70.0 - 1.0));

    // Shot-noise product spectra, 1000 counts peak above a 50-count background, at five
    // detunings; linewidth within 10 %.
    std::mt19937_64 rng(7);
    int good = 0;
    double worst = 0.0;
    int trials = 0;
    for (double det : {-0.5, -0.2, 0.0, 0.2, 0.5})
    {
        auto shape = product(lambda_s + det, 0.070, 1.0, 0.0);
        const double peak = *std::max_element(shape.begin(), shape.end());
        const auto clean = product(lambda_s + det, 0.070, 1000.0 / peak, 50.0);
        for (int k = 0; k < 10; ++k, ++trials)
        {
            std::vector<double> noisy;
            for (double v : clean)
                noisy.push_back(static_cast<double>(std::poisson_distribution<long>(v)(rng)));
            const auto f = spectrafit::fit_lorentzian_product(x, noisy, lambda_s, 71.0);
            const double e = std::abs(f.cavity_fwhm_pm / 70.0 - 1.0);
            worst = std::max(worst, e);
            good += e <= 0.10;
        }
    }

    // Length scans of an Airy resonance at finesse 350.
    const double F = defaults.finesse;
    const double coeff = std::pow(2.0 * F / constants::pi, 2);
    const double q9 = 9.0 * lambda_s / 2.0;
    std::vector<double> gaps = numerics::linspace(q9 - 6.0, q9 + 6.0, 481);
    std::vector<double> t;
    for (double g : gaps)
        t.push_back(1.0 / (1.0 + coeff * std::pow(std::sin(2.0 * constants::pi * g / lambda_s), 2)));
    const double fin = spectrafit::finesse_from_length_scan(gaps, t, lambda_s).finesse;

    verdict(12, "fitting-suite", noiseless <= 1e-3 && good == trials && within(fin, F, 0.02 * F),
            fmt("noiseless max relative error %.1e (1e-3); product width within 10%% in %d/%d shot-noise spectra "
                "(worst %.1f%%); Airy scan finesse %.1f (%.0f +- 2%%)",
                noiseless, good, trials, 100.0 * worst, fin, F));
}

void resonance_relation()
{
    const double inf = std::numeric_limits<double>::infinity();
    double residual = 0.0;
    bool planar = true;
    bool degenerate = true;
    for (int q = 1; q <= 25; ++q)
    {
        for (int k = 0; k <= 6; ++k)
        {
            for (int m = 0; m <= k; ++m)
            {
                const gauss::ModeIndex mode{q, k - m, m};
                const double L = gauss::effective_length(mode, 572.67, 10.0);
                residual = std::max(residual, std::abs(gauss::effective_length_residual(mode, 572.67, 10.0, L)));
                degenerate = degenerate && L == gauss::effective_length({q, k, 0}, 572.67, 10.0);
                const double p = gauss::effective_length(mode, 572.67, inf);
                planar = planar && std::abs(p - oracle::planar_length_um(q, 572.67)) <=
                                       2.0 * std::numeric_limits<double>::epsilon() * p;
            }
        }
    }
    verdict(13, "resonance-relation", residual < 1e-9 && planar && degenerate,
            fmt("fixed-point residual %.1e (1e-9); planar comb exact: %s; equal n+m degenerate: %s", residual,
                planar ? "yes" : "no", degenerate ? "yes" : "no"));
}

void power_linearity()
{
    const auto p = numerics::linspace(0.5, 10.0, 12);
    std::vector<double> s;
    for (double v : p)
        s.push_back(37.0 * v);
    const double clean = spectrafit::power_linearity(p, s).exponent;

    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.05);
    const int trials = 200;
    int good = 0;
    double lo = 10.0;
    double hi = -10.0;
    for (int k = 0; k < trials; ++k)
    {
        std::vector<double> n;
        for (double v : p)
            n.push_back(37.0 * v * (1.0 + noise(rng)));
        const double e = spectrafit::power_linearity(p, n).exponent;
        lo = std::min(lo, e);
        hi = std::max(hi, e);
        good += e >= 0.9 && e <= 1.1;
    }
    verdict(14, "power-linearity", within(clean, 1.0, 0.01) && good == trials,
            fmt("noiseless exponent %.6f (1.00 +- 0.01); 5%% noise: %d/%d in [0.9, 1.1], range [%.3f, %.3f]", clean,
                good, trials, lo, hi));
}
} // namespace

int main()
{
    info("defaults: " + defaults.source);
    raman_kinematics();
    linewidth_chain();
    phonon_lifetime();
    mode_numbers();
    geometry_inversion();
    gaussian_optics();
    quantization_chain();
    enhancement_budget();
    tmm_properties();
    stopbands();
    refinement();
    fitting_suite();
    resonance_relation();
    power_linearity();
    std::printf("%d of 14 criteria failed\n", failures);
    return failures;
}
