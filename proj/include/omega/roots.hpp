#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "errors.hpp"

namespace omega::detail {

// Bisection in log-space for a residual that is decreasing in s > 0.
// Returns s with rho(s) changing sign from + to - at s.
template <class F>
double bisect_log_decreasing(F&& rho, double lo, double hi, int max_iter = 200) {
    for (int i = 0; i < max_iter; ++i) {
        if (hi / lo - 1.0 <= 4e-16) break;
        const double mid = std::sqrt(lo) * std::sqrt(hi);
        if (!(mid > lo && mid < hi)) break;
        if (rho(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo) * std::sqrt(hi);
}

inline constexpr double slope_floor = 1e-12;
inline constexpr double slope_ceiling = 1e12;

// Root of a residual decreasing in the slope s, searched outward from s = 1
// by factors of 4 until the sign changes inside [1e-12, 1e12].
template <class F>
double solve_slope(F&& rho, const char* what) {
    double lo = 1.0, hi = 1.0;
    if (rho(1.0) > 0.0) {
        while (true) {
            lo = hi;
            hi = std::min(hi * 4.0, slope_ceiling);
            if (rho(hi) <= 0.0) break;
            if (hi >= slope_ceiling)
                throw numerical_error(std::string(what) + ": no sign change below slope 1e12");
        }
    } else {
        while (true) {
            hi = lo;
            lo = std::max(lo / 4.0, slope_floor);
            if (rho(lo) > 0.0) break;
            if (lo <= slope_floor)
                throw numerical_error(std::string(what) + ": no sign change above slope 1e-12");
        }
    }
    return bisect_log_decreasing(rho, lo, hi);
}

// Root on a known bracket [lo, hi] (lo > 0) of a decreasing residual with
// rho(lo) > 0 >= rho(hi); hi may be expanded upward if needed.
template <class F>
double solve_slope_between(F&& rho, double lo, double hi, const char* what) {
    if (!(lo > 0.0)) lo = slope_floor;
    while (rho(lo) <= 0.0) {
        if (lo <= slope_floor) throw numerical_error(std::string(what) + ": lower bracket failed");
        hi = lo;
        lo = std::max(lo / 4.0, slope_floor);
    }
    if (!std::isfinite(hi)) hi = std::max(lo * 4.0, 1.0);
    while (rho(hi) > 0.0) {
        if (hi >= slope_ceiling) throw numerical_error(std::string(what) + ": upper bracket failed");
        lo = hi;
        hi = std::min(hi * 4.0, slope_ceiling);
    }
    return bisect_log_decreasing(rho, lo, hi);
}

// Bracketed root via TOMS 748; returns the endpoint whose residual is smaller.
template <class F>
std::pair<double, double> toms748_best(F&& f, double a, double b, double fa, double fb,
                                       double abs_tol, std::uintmax_t max_iter = 200) {
    if (fa == 0.0) return {a, fa};
    if (fb == 0.0) return {b, fb};
    auto tol = [abs_tol](double x, double y) { return std::abs(x - y) <= abs_tol; };
    std::uintmax_t iters = max_iter;
    double best_x = std::abs(fa) < std::abs(fb) ? a : b;
    double best_f = std::abs(fa) < std::abs(fb) ? fa : fb;
    auto tracked = [&](double x) {
        const double v = f(x);
        if (std::abs(v) < std::abs(best_f) || (std::abs(v) == std::abs(best_f) && x < best_x)) {
            best_x = x;
            best_f = v;
        }
        return v;
    };
    boost::math::tools::toms748_solve(tracked, a, b, fa, fb, tol, iters);
    return {best_x, best_f};
}

}  // namespace omega::detail
