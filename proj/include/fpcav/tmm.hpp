#pragma once

// Normal-incidence transfer-matrix method for lossless, non-dispersive stacks.
//
// Each layer is represented by its characteristic matrix
//
//     | cos d        i sin d / n |
//     | i n sin d    cos d       |,   d = 2 pi n t / lambda,
//
// which maps the tangential fields (E, H) at the layer's far side to its near side.
// H is measured in units of the free-space admittance so that H = n E for a forward wave.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"
#include "lsq.hpp"
#include "measured_spectrum.hpp"
#include "numerics.hpp"
#include "stack.hpp"

namespace fpcav::tmm
{
using complex = std::complex<double>;

struct Matrix2
{
    complex m11{1.0}, m12{0.0}, m21{0.0}, m22{1.0};

    static Matrix2 identity() { return {}; }

    complex determinant() const { return m11 * m22 - m12 * m21; }

    friend Matrix2 operator*(const Matrix2 &a, const Matrix2 &b)
    {
        return {a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
                a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22};
    }
};

inline Matrix2 characteristic_matrix(double refractive_index, double thickness_nm, double wavelength_nm)
{
    const double delta = 2.0 * constants::pi * refractive_index * thickness_nm / wavelength_nm;
    const double c = std::cos(delta);
    const double s = std::sin(delta);
    return {complex(c, 0.0), complex(0.0, s / refractive_index), complex(0.0, refractive_index * s),
            complex(c, 0.0)};
}

inline Matrix2 characteristic_matrix(const Layer &layer, double wavelength_nm)
{
    if (!(wavelength_nm > 0.0))
        throw invalid_argument("wavelength must be positive");
    return characteristic_matrix(layer.material.refractive_index, layer.thickness_nm, wavelength_nm);
}

inline Matrix2 stack_matrix(std::span<const Layer> layers, double wavelength_nm)
{
    Matrix2 m;
    for (const auto &l : layers)
        m = m * characteristic_matrix(l.material.refractive_index, l.thickness_nm, wavelength_nm);
    return m;
}

struct Response
{
    complex r; // amplitude reflection coefficient
    complex t; // amplitude transmission coefficient
    double R = 0.0;
    double T = 0.0;
};

// Reflection/transmission of a stack with total matrix `m` between media n0 and ns.
inline Response response(const Matrix2 &m, double n_incident, double n_exit)
{
    const complex B = m.m11 + m.m12 * n_exit;
    const complex C = m.m21 + m.m22 * n_exit;
    const complex denom = n_incident * B + C;
    Response out;
    out.r = (n_incident * B - C) / denom;
    out.t = 2.0 * n_incident / denom;
    out.R = std::norm(out.r);
    out.T = 4.0 * n_incident * n_exit / std::norm(denom);
    return out;
}

inline Response response(const LayerStack &stack, double wavelength_nm)
{
    if (!(wavelength_nm > 0.0))
        throw invalid_argument("wavelength must be positive");
    return response(stack_matrix(stack.layers, wavelength_nm), stack.incident.refractive_index,
                    stack.exit.refractive_index);
}

// Stack with periodic runs (e.g. Bragg pairs) folded into (unit)^count blocks, so that a
// matrix evaluation costs one characteristic matrix per distinct layer plus O(log count)
// products per block.
class CompiledStack
{
public:
    explicit CompiledStack(std::span<const Layer> layers)
    {
        std::size_t i = 0;
        while (i < layers.size())
        {
            std::size_t best_period = 1;
            std::size_t best_count = 1;
            for (std::size_t p = 1; p <= 4 && i + p <= layers.size(); ++p)
            {
                std::size_t count = 1;
                while (i + (count + 1) * p <= layers.size() &&
                       std::equal(layers.begin() + static_cast<std::ptrdiff_t>(i),
                                  layers.begin() + static_cast<std::ptrdiff_t>(i + p),
                                  layers.begin() + static_cast<std::ptrdiff_t>(i + count * p)))
                    ++count;
                if (count > 1 && p * count > best_period * best_count)
                {
                    best_period = p;
                    best_count = count;
                }
            }
            Block b;
            for (std::size_t k = 0; k < best_period; ++k)
                b.unit.push_back({layers[i + k].material.refractive_index, layers[i + k].thickness_nm});
            b.count = best_count;
            blocks_.push_back(std::move(b));
            i += best_period * best_count;
        }
    }

    Matrix2 matrix(double wavelength_nm) const
    {
        Matrix2 total;
        for (const auto &b : blocks_)
        {
            Matrix2 unit;
            for (const auto &[n, d] : b.unit)
                unit = unit * characteristic_matrix(n, d, wavelength_nm);
            Matrix2 power;
            for (std::size_t e = b.count; e > 0; e >>= 1)
            {
                if (e & 1u)
                    power = power * unit;
                unit = unit * unit;
            }
            total = total * power;
        }
        return total;
    }

    std::size_t block_count() const { return blocks_.size(); }

private:
    struct Block
    {
        std::vector<std::pair<double, double>> unit; // (n, thickness)
        std::size_t count = 1;
    };
    std::vector<Block> blocks_;
};

struct ComplexSpectrum
{
    std::vector<double> wavelengths_nm;
    std::vector<complex> r;
    std::vector<complex> t;
    std::vector<double> R;
    std::vector<double> T;
};

inline ComplexSpectrum spectrum(const LayerStack &stack, std::span<const double> wavelengths_nm)
{
    if (wavelengths_nm.empty())
        throw invalid_argument("spectrum: empty wavelength grid");
    validate(stack);
    ComplexSpectrum out;
    out.wavelengths_nm.assign(wavelengths_nm.begin(), wavelengths_nm.end());
    out.r.reserve(wavelengths_nm.size());
    out.t.reserve(wavelengths_nm.size());
    out.R.reserve(wavelengths_nm.size());
    out.T.reserve(wavelengths_nm.size());
    for (std::size_t i = 0; i < wavelengths_nm.size(); ++i)
    {
        const double lambda = wavelengths_nm[i];
        if (!(lambda > 0.0))
            throw invalid_argument("spectrum: wavelengths must be positive");
        if (i > 0 && !(lambda > wavelengths_nm[i - 1]))
            throw invalid_argument("spectrum: wavelengths must be strictly increasing");
        const auto resp = response(stack, lambda);
        out.r.push_back(resp.r);
        out.t.push_back(resp.t);
        out.R.push_back(resp.R);
        out.T.push_back(resp.T);
    }
    return out;
}

struct Stopband
{
    double center_nm = 0.0;
    double low_edge_nm = 0.0;
    double high_edge_nm = 0.0;
    double peak_wavelength_nm = 0.0;
    double peak_reflectance = 0.0;
    bool truncated = false; // the R >= threshold window runs into the end of the grid

    double width_nm() const { return high_edge_nm - low_edge_nm; }
    bool contains(double wavelength_nm) const
    {
        return wavelength_nm >= low_edge_nm && wavelength_nm <= high_edge_nm;
    }
};

// Contiguous R >= threshold window around the reflectance maximum; edges linearly
// interpolated between grid points.
inline Stopband stopband(const ComplexSpectrum &s, double threshold = 0.99)
{
    if (!(threshold > 0.0 && threshold < 1.0))
        throw invalid_argument("stopband threshold must lie in (0, 1)");
    if (s.R.empty())
        throw invalid_argument("stopband: empty spectrum");
    const auto peak = static_cast<std::size_t>(std::max_element(s.R.begin(), s.R.end()) - s.R.begin());
    if (s.R[peak] < threshold)
        throw not_found_error("stopband: no point reaches R >= threshold");

    const auto &x = s.wavelengths_nm;
    const auto &R = s.R;
    Stopband out;
    out.peak_wavelength_nm = x[peak];
    out.peak_reflectance = R[peak];

    std::size_t lo = peak;
    while (lo > 0 && R[lo - 1] >= threshold)
        --lo;
    std::size_t hi = peak;
    while (hi + 1 < R.size() && R[hi + 1] >= threshold)
        ++hi;

    auto crossing = [&](std::size_t in, std::size_t out_idx) {
        const double f = (R[in] - threshold) / (R[in] - R[out_idx]);
        return x[in] + f * (x[out_idx] - x[in]);
    };
    if (lo == 0)
    {
        out.low_edge_nm = x.front();
        out.truncated = true;
    }
    else
        out.low_edge_nm = crossing(lo, lo - 1);
    if (hi + 1 == R.size())
    {
        out.high_edge_nm = x.back();
        out.truncated = true;
    }
    else
        out.high_edge_nm = crossing(hi, hi + 1);
    out.center_nm = 0.5 * (out.low_edge_nm + out.high_edge_nm);
    return out;
}

// Field inside one layer: E(s) = E0 cos(k s) - i (H0 / n) sin(k s), s measured from the
// layer's near side (smaller z).
struct FieldSegment
{
    std::string material;
    double refractive_index = 1.0;
    double z_start_nm = 0.0;
    double thickness_nm = 0.0;
    complex E0;
    complex H0;
    double wavenumber = 0.0; // 2 pi n / lambda, 1/nm

    complex field(double s_nm) const
    {
        const double ks = wavenumber * s_nm;
        return E0 * std::cos(ks) - complex(0.0, 1.0) * (H0 / refractive_index) * std::sin(ks);
    }

    // Integral of |E|^2 over the layer, nm * (field units)^2.
    double intensity_integral() const
    {
        const complex B = -complex(0.0, 1.0) * H0 / refractive_index;
        const double a2 = std::norm(E0);
        const double b2 = std::norm(B);
        const double ab = (E0 * std::conj(B)).real();
        const double k = wavenumber;
        const double d = thickness_nm;
        return 0.5 * (a2 + b2) * d + 0.25 * (a2 - b2) * std::sin(2.0 * k * d) / k +
               0.5 * ab * (1.0 - std::cos(2.0 * k * d)) / k;
    }

    // max |E| over the closed layer.
    double max_abs_field() const
    {
        const complex B = -complex(0.0, 1.0) * H0 / refractive_index;
        const double p = 0.5 * (std::norm(E0) + std::norm(B));
        const double qc = 0.5 * (std::norm(E0) - std::norm(B));
        const double qs = (E0 * std::conj(B)).real();
        double best = std::max(std::norm(E0), std::norm(field(thickness_nm)));
        double phase = std::atan2(qs, qc);
        if (phase < 0.0)
            phase += 2.0 * constants::pi;
        const double s_star = phase / (2.0 * wavenumber);
        if (s_star <= thickness_nm)
            best = std::max(best, p + std::hypot(qc, qs));
        return std::sqrt(best);
    }
};

struct FieldProfile
{
    double wavelength_nm = 0.0;
    std::vector<double> z_nm;
    std::vector<double> refractive_index;
    std::vector<double> abs_E;
    std::vector<FieldSegment> segments; // one per layer, propagation order

    // |E| at z, evaluated from the layer solution (not the samples).
    double abs_field_at(double z_nm) const
    {
        if (segments.empty())
            return 0.0;
        for (const auto &seg : segments)
            if (z_nm <= seg.z_start_nm + seg.thickness_nm)
                return std::abs(seg.field(std::max(0.0, z_nm - seg.z_start_nm)));
        const auto &last = segments.back();
        return std::abs(last.field(last.thickness_nm));
    }

    double total_thickness_nm() const
    {
        return segments.empty() ? 0.0 : segments.back().z_start_nm + segments.back().thickness_nm;
    }
};

// Standing-wave field for light incident from stack.incident, normalized to a unit
// transmitted amplitude in the exit medium. z = 0 at the first layer's near side.
inline FieldProfile field_profile(const LayerStack &stack, double wavelength_nm, double step_nm)
{
    if (!(wavelength_nm > 0.0))
        throw invalid_argument("field_profile: wavelength must be positive");
    if (!(step_nm > 0.0))
        throw invalid_argument("field_profile: sampling step must be positive");
    validate(stack);

    FieldProfile out;
    out.wavelength_nm = wavelength_nm;
    const auto &layers = stack.layers;
    out.segments.resize(layers.size());

    // Backward pass: fields at each layer's near side.
    complex E = 1.0;
    complex H = stack.exit.refractive_index;
    for (std::size_t i = layers.size(); i-- > 0;)
    {
        const auto m = characteristic_matrix(layers[i], wavelength_nm);
        const complex En = m.m11 * E + m.m12 * H;
        const complex Hn = m.m21 * E + m.m22 * H;
        E = En;
        H = Hn;
        auto &seg = out.segments[i];
        seg.material = layers[i].material.name;
        seg.refractive_index = layers[i].material.refractive_index;
        seg.thickness_nm = layers[i].thickness_nm;
        seg.E0 = E;
        seg.H0 = H;
        seg.wavenumber = 2.0 * constants::pi * seg.refractive_index / wavelength_nm;
    }
    double z = 0.0;
    for (auto &seg : out.segments)
    {
        seg.z_start_nm = z;
        z += seg.thickness_nm;
    }

    for (const auto &seg : out.segments)
    {
        const auto count = static_cast<std::size_t>(std::floor(seg.thickness_nm / step_nm));
        for (std::size_t j = 0; j <= count; ++j)
        {
            const double s = static_cast<double>(j) * step_nm;
            if (s >= seg.thickness_nm)
                break; // the end point is emitted below
            out.z_nm.push_back(seg.z_start_nm + s);
            out.refractive_index.push_back(seg.refractive_index);
            out.abs_E.push_back(std::abs(seg.field(s)));
        }
        out.z_nm.push_back(seg.z_start_nm + seg.thickness_nm);
        out.refractive_index.push_back(seg.refractive_index);
        out.abs_E.push_back(std::abs(seg.field(seg.thickness_nm)));
    }
    return out;
}

struct Peak
{
    double position = 0.0;
    double value = 0.0;
};

// Local maxima of f sampled on `grid`, each refined by golden-section search to
// `tolerance` within the neighbouring grid cells. Peaks below `min_value` are dropped.
template <class F>
std::vector<Peak> find_peaks(F &&f, std::span<const double> grid, double tolerance, double min_value = 0.0)
{
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        values[i] = f(grid[i]);
    std::vector<Peak> out;
    for (auto i : numerics::local_maxima(values))
    {
        if (values[i] < min_value)
            continue;
        const auto best = numerics::golden_section_max(f, grid[i - 1], grid[i + 1], tolerance);
        if (best.value >= values[i])
            out.push_back({best.x, best.value});
        else
            out.push_back({grid[i], values[i]});
    }
    return out;
}

// Resonance-location tolerance, nm (0.1 pm).
inline constexpr double resonance_tolerance_nm = 1e-4;

struct RefineOptions
{
    double thickness_tolerance = 0.03; // multipliers restricted to [1 - tol, 1 + tol]
    int max_evaluations = 10000;
};

struct RefineResult
{
    LayerStack stack;
    std::vector<double> multipliers;
    double initial_residual = 0.0; // mean squared transmittance error
    double residual = 0.0;
    bool converged = false;
    std::string status;
    int evaluations = 0;
    std::vector<double> residual_history; // accepted steps, non-increasing
};

// Bounded least-squares fit of per-layer thickness multipliers to a measured,
// normalized transmission spectrum.
inline RefineResult refine_stack(const LayerStack &stack, const MeasuredSpectrum &measured,
                                 const RefineOptions &opt = {})
{
    validate(stack);
    validate(measured);
    if (!(opt.thickness_tolerance >= 0.0) || opt.thickness_tolerance >= 1.0)
        throw invalid_argument("refine_stack: thickness tolerance must lie in [0, 1)");
    if (measured.size() == 0)
        throw invalid_argument("refine_stack: empty measured spectrum");
    for (double c : measured.counts)
        if (c > 1.0 + 1e-9)
            throw invalid_argument("refine_stack: measured transmission must be normalized to [0, 1]");

    const auto n_layers = static_cast<Eigen::Index>(stack.layers.size());
    const auto &lambdas = measured.wavelengths_nm;
    auto model = [&](const lsq::Vector &mult) {
        LayerStack s = stack;
        for (Eigen::Index j = 0; j < n_layers; ++j)
            s.layers[static_cast<std::size_t>(j)].thickness_nm *= mult[j];
        lsq::Vector r(static_cast<Eigen::Index>(lambdas.size()));
        for (std::size_t i = 0; i < lambdas.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = response(s, lambdas[i]).T - measured.counts[i];
        return r;
    };
    const double m = static_cast<double>(lambdas.size());

    RefineResult out;
    out.multipliers.assign(stack.layers.size(), 1.0);
    const lsq::Vector ones = lsq::Vector::Ones(n_layers);
    out.initial_residual = model(ones).squaredNorm() / m;

    if (opt.thickness_tolerance == 0.0 || n_layers == 0)
    {
        out.stack = stack;
        out.residual = out.initial_residual;
        out.converged = true;
        out.status = "nothing to refine";
        out.evaluations = 1;
        out.residual_history = {out.initial_residual};
        return out;
    }

    // Stage 1: common scale factor (scan + golden section). A uniform thickness error
    // shifts the whole spectrum, which traps a per-layer local search in side minima.
    auto uniform_cost = [&](double f) { return model(lsq::Vector::Constant(n_layers, f)).squaredNorm(); };
    const double tol = opt.thickness_tolerance;
    constexpr int scan = 61;
    double best_f = 1.0;
    double best_cost = uniform_cost(1.0);
    int evaluations = 1;
    for (int i = 0; i < scan; ++i)
    {
        const double f = 1.0 - tol + 2.0 * tol * i / (scan - 1);
        const double c = uniform_cost(f);
        ++evaluations;
        if (c < best_cost)
        {
            best_cost = c;
            best_f = f;
        }
    }
    const double cell = 2.0 * tol / (scan - 1);
    const auto refined = numerics::golden_section_min(uniform_cost, std::max(1.0 - tol, best_f - cell),
                                                      std::min(1.0 + tol, best_f + cell), 1e-9);
    evaluations += 40;
    if (refined.value < best_cost)
    {
        best_cost = refined.value;
        best_f = refined.x;
    }
    out.residual_history.push_back(out.initial_residual);
    if (best_cost < out.initial_residual * m)
        out.residual_history.push_back(best_cost / m);

    // Stage 2: per-layer multipliers.
    lsq::Bounds bounds{lsq::Vector::Constant(n_layers, 1.0 - opt.thickness_tolerance),
                       lsq::Vector::Constant(n_layers, 1.0 + opt.thickness_tolerance)};
    lsq::Options lo;
    lo.max_iterations = opt.max_evaluations;
    lo.relative_step = 1e-7;
    lo.cost_tolerance = 1e-10;
    lo.step_tolerance = 1e-12;
    lo.max_evaluations = std::max(opt.max_evaluations - evaluations, static_cast<int>(n_layers) + 2);
    const auto fit = lsq::levenberg_marquardt(model, lsq::Vector::Constant(n_layers, best_f), ones, bounds, lo);

    out.stack = stack;
    for (Eigen::Index j = 0; j < n_layers; ++j)
    {
        out.multipliers[static_cast<std::size_t>(j)] = fit.params[j];
        out.stack.layers[static_cast<std::size_t>(j)].thickness_nm *= fit.params[j];
    }
    out.residual = fit.cost / m;
    out.converged = fit.converged;
    out.status = fit.status;
    out.evaluations = evaluations + fit.evaluations;
    for (std::size_t i = 1; i < fit.cost_history.size(); ++i)
        out.residual_history.push_back(fit.cost_history[i] / m);
    return out;
}

} // namespace fpcav::tmm
