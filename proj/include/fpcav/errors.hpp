#pragma once

#include <stdexcept>
#include <string>

namespace fpcav
{
// Bad parameter values (non-positive wavelength, NA >= n, ...).
using invalid_argument = std::invalid_argument;

// Malformed input documents or data files.
class format_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure: no convergence, no solution, degenerate data.
class numeric_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// A searched-for feature (stopband, branch crossing, peak) does not exist.
class not_found_error : public numeric_error
{
public:
    using numeric_error::numeric_error;
};

// Gaussian-optics geometry outside the stable range 0 <= g <= 1.
class unstable_geometry_error : public numeric_error
{
public:
    using numeric_error::numeric_error;
};

// Least-squares fit diverged or the data cannot support the model.
class fit_error : public numeric_error
{
public:
    using numeric_error::numeric_error;
};

} // namespace fpcav
