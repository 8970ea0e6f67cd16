#pragma once

// Levenberg-Marquardt with forward-difference Jacobian, Marquardt diagonal scaling
// and optional box bounds (projection plus an active set for parameters pinned at a
// bound with the gradient pointing outward).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fpcav::lsq
{
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Options
{
    int max_iterations = 500;
    int max_evaluations = 10000;
    double initial_damping = 1e-3;
    double relative_step = 1e-7;       // finite-difference step, relative to max(|x|, scale)
    double cost_tolerance = 1e-12;     // relative cost decrease of an accepted step
    double step_tolerance = 1e-10;     // max |dx_j| / scale_j
    double gradient_tolerance = 1e-14; // max |g_j| scale_j relative to cost
};

struct Bounds
{
    Vector lower;
    Vector upper;
};

struct Result
{
    Vector params;
    Vector residuals;
    Matrix jacobian;
    double cost = 0.0; // sum of squared residuals
    double initial_cost = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string status;
    std::vector<double> cost_history; // cost after each accepted step, starting with the initial cost
};

namespace detail
{
inline Vector clamp(Vector x, const std::optional<Bounds> &b)
{
    if (!b)
        return x;
    for (Eigen::Index j = 0; j < x.size(); ++j)
        x[j] = std::clamp(x[j], b->lower[j], b->upper[j]);
    return x;
}
} // namespace detail

// `residuals(const Vector&) -> Vector`. `scale` holds the typical magnitude of each
// parameter (initial guesses, widths); it sets finite-difference steps and the
// step-size convergence test.
template <class F>
Result levenberg_marquardt(F &&residuals, const Vector &x0, const Vector &scale,
                          const std::optional<Bounds> &bounds = std::nullopt, const Options &opt = {})
{
    const Eigen::Index n = x0.size();
    if (scale.size() != n)
        throw invalid_argument("lsq: scale has wrong size");
    if (bounds && (bounds->lower.size() != n || bounds->upper.size() != n))
        throw invalid_argument("lsq: bounds have wrong size");
    if (bounds && (bounds->lower.array() > bounds->upper.array()).any())
        throw invalid_argument("lsq: lower bound above upper bound");

    Result res;
    Vector x = detail::clamp(x0, bounds);
    Vector r = residuals(x);
    res.evaluations = 1;
    if (!r.allFinite())
        throw fit_error("lsq: residuals not finite at the initial point");
    double cost = r.squaredNorm();
    res.initial_cost = cost;
    res.cost_history.push_back(cost);

    Matrix J(r.size(), n);
    auto jacobian = [&]() {
        for (Eigen::Index j = 0; j < n; ++j)
        {
            double h = opt.relative_step * std::max(std::abs(x[j]), std::abs(scale[j]));
            if (h == 0.0)
                h = opt.relative_step;
            Vector xp = x;
            if (bounds && x[j] + h > bounds->upper[j])
                h = -h;
            xp[j] += h;
            J.col(j) = (residuals(xp) - r) / h;
        }
        res.evaluations += static_cast<int>(n);
    };

    double damping = opt.initial_damping;
    bool done = false;
    res.status = "iteration budget exhausted";
    for (res.iterations = 0; res.iterations < opt.max_iterations && !done; ++res.iterations)
    {
        if (res.evaluations + n + 1 > opt.max_evaluations)
        {
            res.status = "evaluation budget exhausted";
            break;
        }
        if (cost == 0.0)
        {
            res.converged = true;
            res.status = "exact fit";
            break;
        }
        jacobian();
        const Vector g = J.transpose() * r;
        const Matrix A = J.transpose() * J;

        std::vector<Eigen::Index> free;
        for (Eigen::Index j = 0; j < n; ++j)
        {
            const bool pinned_low = bounds && x[j] <= bounds->lower[j] && g[j] > 0.0;
            const bool pinned_high = bounds && x[j] >= bounds->upper[j] && g[j] < 0.0;
            if (!pinned_low && !pinned_high)
                free.push_back(j);
        }
        if (free.empty())
        {
            res.converged = true;
            res.status = "all parameters at bounds";
            break;
        }
        double gmax = 0.0;
        for (auto j : free)
            gmax = std::max(gmax, std::abs(g[j]) * std::max(std::abs(scale[j]), 1e-300));
        if (gmax <= opt.gradient_tolerance * cost)
        {
            res.converged = true;
            res.status = "gradient below tolerance";
            break;
        }

        const auto nf = static_cast<Eigen::Index>(free.size());
        Matrix Af(nf, nf);
        Vector gf(nf);
        double dmax = 0.0;
        for (Eigen::Index a = 0; a < nf; ++a)
        {
            gf[a] = g[free[a]];
            for (Eigen::Index b = 0; b < nf; ++b)
                Af(a, b) = A(free[a], free[b]);
            dmax = std::max(dmax, Af(a, a));
        }

        while (true)
        {
            Matrix M = Af;
            for (Eigen::Index a = 0; a < nf; ++a)
                M(a, a) += damping * std::max(Af(a, a), 1e-12 * dmax + std::numeric_limits<double>::min());
            const Vector dxf = M.ldlt().solve(-gf);
            Vector xn = x;
            for (Eigen::Index a = 0; a < nf; ++a)
                xn[free[a]] += dxf[a];
            xn = detail::clamp(xn, bounds);

            const Vector rn = residuals(xn);
            ++res.evaluations;
            const double cn = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();

            double step = 0.0;
            for (Eigen::Index j = 0; j < n; ++j)
                step = std::max(step, std::abs(xn[j] - x[j]) / std::max(std::abs(scale[j]), 1e-300));

            if (cn < cost)
            {
                const double drop = cost - cn;
                x = std::move(xn);
                r = rn;
                cost = cn;
                res.cost_history.push_back(cost);
                damping = std::max(damping * 0.1, 1e-15);
                if (drop <= opt.cost_tolerance * cost || step <= opt.step_tolerance)
                {
                    res.converged = true;
                    res.status = "converged";
                    done = true;
                }
                break;
            }
            damping *= 10.0;
            if (step <= opt.step_tolerance || damping > 1e16)
            {
                res.converged = true;
                res.status = "no further decrease";
                done = true;
                break;
            }
            if (res.evaluations >= opt.max_evaluations)
            {
                res.status = "evaluation budget exhausted";
                done = true;
                break;
            }
        }
    }

    res.params = x;
    res.residuals = r;
    res.cost = cost;
    // Jacobian at the returned point, for covariance estimates.
    jacobian();
    res.jacobian = J;
    return res;
}

// Parameter covariance s^2 (J^T J)^-1 with s^2 = cost / (m - p); empty if singular.
inline Matrix covariance(const Result &r)
{
    const auto m = r.residuals.size();
    const auto p = r.params.size();
    if (m <= p)
        return {};
    const Matrix A = r.jacobian.transpose() * r.jacobian;
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible())
        return {};
    return lu.inverse() * (r.cost / static_cast<double>(m - p));
}

} // namespace fpcav::lsq
