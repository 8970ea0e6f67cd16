#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fpcav::numerics
{
inline constexpr double inv_golden = 0.6180339887498949;

struct Extremum
{
    double x = 0.0;
    double value = 0.0;
};

// Golden-section search for the maximum of a unimodal function on [lo, hi].
// Stops when the bracket is narrower than `tolerance`.
template <class F>
Extremum golden_section_max(F &&f, double lo, double hi, double tolerance)
{
    double a = lo;
    double b = hi;
    double c = b - inv_golden * (b - a);
    double d = a + inv_golden * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tolerance)
    {
        if (fc > fd)
        {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_golden * (b - a);
            fc = f(c);
        }
        else
        {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_golden * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    return {x, f(x)};
}

template <class F>
Extremum golden_section_min(F &&f, double lo, double hi, double tolerance)
{
    auto r = golden_section_max([&](double x) { return -f(x); }, lo, hi, tolerance);
    return {r.x, -r.value};
}

// Evenly spaced grid including both end points.
inline std::vector<double> linspace(double first, double last, std::size_t count)
{
    if (count == 0)
        return {};
    if (count == 1)
        return {first};
    std::vector<double> out(count);
    const double step = (last - first) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = first + step * static_cast<double>(i);
    out.back() = last;
    return out;
}

// Grid first, first+step, ... up to and including last (within half a step).
inline std::vector<double> arange(double first, double last, double step)
{
    if (!(step > 0.0))
        throw std::invalid_argument("grid step must be positive");
    const auto count = static_cast<std::size_t>(std::floor((last - first) / step + 0.5)) + 1;
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = first + step * static_cast<double>(i);
    return out;
}

inline double trapezoid(std::span<const double> x, std::span<const double> y)
{
    double sum = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i)
        sum += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return sum;
}

// Indices i where y[i] is a strict local maximum (plateaus count once, at their left end).
inline std::vector<std::size_t> local_maxima(std::span<const double> y)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < y.size(); ++i)
        if (y[i] > y[i - 1] && y[i] >= y[i + 1])
            out.push_back(i);
    return out;
}

} // namespace fpcav::numerics
