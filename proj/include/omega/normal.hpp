#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace omega {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684758586311649;

inline double norm_pdf(double x) {
    if (std::isinf(x)) return 0.0;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Phi(b) - Phi(a) for a <= b, using the upper tail when both are positive.
inline double norm_cdf_diff(double a, double b) {
    if (!(a < b)) return 0.0;
    if (a > 0.0) return norm_cdf(-a) - norm_cdf(-b);
    return norm_cdf(b) - norm_cdf(a);
}

inline double norm_quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace omega
