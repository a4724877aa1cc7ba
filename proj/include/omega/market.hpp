#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "normal.hpp"
#include "quadrature.hpp"

namespace omega {

// Deterministic short rate: a constant or a per-year table (value k applies on
// [k, k+1); the last entry extends to the horizon).
class RateCurve {
public:
    RateCurve(double constant = 0.0) : values_{constant}, constant_(true) {}
    explicit RateCurve(std::vector<double> per_year) : values_(std::move(per_year)), constant_(false) {
        if (values_.empty()) throw std::invalid_argument("RateCurve: empty table");
        if (values_.size() == 1) constant_ = true;
    }

    bool is_constant() const { return constant_; }
    const std::vector<double>& values() const { return values_; }

    double at(double t) const {
        if (constant_) return values_[0];
        const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(t)));
        return values_[std::min(k, values_.size() - 1)];
    }

    // Constant pieces covering [t0, t1] as (start, end, rate).
    template <class F>
    void for_each_piece(double t0, double t1, F&& f) const {
        if (constant_) {
            if (t1 > t0) f(t0, t1, values_[0]);
            return;
        }
        double s = t0;
        while (s < t1) {
            const double k = std::floor(s);
            const auto idx = static_cast<std::size_t>(std::max(0.0, k));
            double e = idx + 1 >= values_.size() ? t1 : std::min(t1, k + 1.0);
            if (e <= s) e = std::min(t1, std::nextafter(k + 1.0, 2.0 * (k + 2.0)));
            f(s, e, values_[std::min(idx, values_.size() - 1)]);
            s = e;
        }
    }

    double integral(double t0, double t1) const {
        double acc = 0.0;
        for_each_piece(t0, t1, [&](double a, double b, double r) { acc += r * (b - a); });
        return acc;
    }

private:
    std::vector<double> values_;
    bool constant_;
};

struct MarketParams {
    double T = 40.0;
    RateCurve r_n{0.04};
    RateCurve r_r{0.02};
    double sigma_I = 0.4;
    double sigma_S1 = 0.3;
    double sigma_S2 = 0.4;
    double mu = 0.1;
    double sigma_C1 = 0.2;
    double sigma_C2 = 0.3;
    double lambda_I = 0.2;
    double lambda_S = 0.3;
    double i0 = 1.0;
    double c0 = 0.8;
    double x0 = 1.0;

    void validate() const {
        auto need = [](bool ok, const char* msg) {
            if (!ok) throw std::invalid_argument(std::string("MarketParams: ") + msg);
        };
        need(T > 0.0, "T must be positive");
        need(sigma_I > 0.0, "sigma_I must be positive");
        need(sigma_S2 > 0.0, "sigma_S2 must be positive");
        need(sigma_C1 >= 0.0 && sigma_C2 >= 0.0, "contribution volatilities must be nonnegative");
        need(i0 > 0.0, "i0 must be positive");
        need(c0 >= 0.0, "c0 must be nonnegative");
        need(x0 >= 0.0, "x0 must be nonnegative");
    }

    // Drift of the contribution rate under the pricing measure.
    double contribution_drift() const { return mu - sigma_C1 * lambda_I - sigma_C2 * lambda_S; }

    // Squared volatility of the pricing kernel.
    double kernel_variance_rate() const {
        const double a = lambda_I - sigma_I;
        return a * a + lambda_S * lambda_S;
    }
};

// H(T) = exp(-a - x) with x ~ N(0, Sigma).
struct KernelLaw {
    double a = 0.0;
    double Sigma = 0.0;

    double sd() const { return std::sqrt(Sigma); }
    double mean() const { return std::exp(-a + 0.5 * Sigma); }
    double kernel(double x) const { return std::exp(-a - x); }
};

inline KernelLaw kernel_law(const MarketParams& p) {
    const double Sigma = p.kernel_variance_rate() * p.T;
    if (!(Sigma > 0.0)) throw degenerate_market("kernel_law: kernel variance is zero");
    return {p.r_r.integral(0.0, p.T) + 0.5 * Sigma, Sigma};
}

// Present value at t of one unit of contribution rate paid continuously to T.
inline double annuity_factor(const MarketParams& p, double t) {
    if (!(t >= 0.0 && t <= p.T)) throw domain_error("annuity: t outside [0, T]");
    const double kappa = p.contribution_drift();
    double acc = 0.0;
    double log_growth = 0.0;  // kappa (s - t) - int_t^s r_n at the start of each piece
    p.r_n.for_each_piece(t, p.T, [&](double a, double b, double r) {
        const double rate = kappa - r;
        const double len = b - a;
        const double seg = rate == 0.0 ? len : std::expm1(rate * len) / rate;
        acc += std::exp(log_growth) * seg;
        log_growth += rate * len;
    });
    return acc;
}

inline double annuity(const MarketParams& p, double t, double c_t) { return c_t * annuity_factor(p, t); }

inline double auxiliary_initial(const MarketParams& p) {
    return (p.x0 + annuity(p, 0.0, p.c0)) / p.i0;
}

enum class Verdict { Feasible, ViolatesLower, ViolatesUpper };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Feasible: return "Feasible";
        case Verdict::ViolatesLower: return "ViolatesLower";
        case Verdict::ViolatesUpper: return "ViolatesUpper";
    }
    return "?";
}

struct FeasibilityReport {
    double lower = 0.0;
    double upper = 0.0;
    double x0_tilde = 0.0;
    double tail_quantile = 0.0;  // q(eps), the eps-quantile of N(0, Sigma)
    Verdict verdict = Verdict::Feasible;
    std::optional<double> lower_by_quadrature;
};

// L * int_q^inf e^{-a-x} f(x) dx by Gauss-Legendre panels in standardized units.
inline double feasibility_lower_quadrature(const KernelLaw& law, double floor, double eps) {
    if (floor == 0.0 || eps >= 1.0) return 0.0;
    const double s = law.sd();
    const double lo = eps <= 0.0 ? -60.0 : std::max(norm_quantile(eps), -60.0);
    // Integrand e^{-a - s u} phi(u) peaks at u = -s; cover +-40 around it.
    const double hi = std::max(lo, -s) + 40.0;
    static const Rule gl = gauss_legendre(20);
    const int panels = 200;
    const double w = (hi - lo) / panels;
    double acc = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double c = lo + (k + 0.5) * w;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double u = c + 0.5 * w * gl.nodes[i];
            acc += 0.5 * w * gl.weights[i] * std::exp(-law.a - s * u) * norm_pdf(u);
        }
    }
    return floor * acc;
}

inline FeasibilityReport feasibility(const MarketParams& p, double theta, double floor, double eps,
                                     bool cross_check = false) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw domain_error("feasibility: eps outside [0, 1]");
    if (!(floor >= 0.0)) throw domain_error("feasibility: floor must be nonnegative");
    if (!(theta > 0.0)) throw domain_error("feasibility: theta must be positive");
    const KernelLaw law = kernel_law(p);
    const double s = law.sd();
    FeasibilityReport r;
    const double z = norm_quantile(eps);
    r.tail_quantile = s * z;
    // e^{-a + Sigma/2} Phi(-q/s - s), with e^{-a+Sigma/2} = e^{-int r_r}.
    r.lower = (floor == 0.0 || eps >= 1.0) ? 0.0 : floor * law.mean() * norm_cdf(-z - s);
    r.upper = std::exp(-p.r_r.integral(0.0, p.T)) * theta;
    r.x0_tilde = auxiliary_initial(p);
    if (!(r.lower < r.x0_tilde))
        r.verdict = Verdict::ViolatesLower;
    else if (!(r.x0_tilde < r.upper))
        r.verdict = Verdict::ViolatesUpper;
    else
        r.verdict = Verdict::Feasible;
    if (cross_check) r.lower_by_quadrature = feasibility_lower_quadrature(law, floor, eps);
    return r;
}

// Auxiliary allocation (pi~_P, pi~_S) <-> nominal allocation (pi_P, pi_S).
struct Allocation {
    double bond = 0.0;
    double stock = 0.0;
};

inline void require_invertible(const MarketParams& p) {
    if (p.sigma_I == 0.0 || p.sigma_S2 == 0.0)
        throw singular_transform("transform: sigma_I and sigma_S2 must be nonzero");
}

inline Allocation forward_transform(const MarketParams& p, double I_t, double F_t, double X_t,
                                    const Allocation& nominal) {
    require_invertible(p);
    if (!(I_t > 0.0)) throw domain_error("transform: I_t must be positive");
    Allocation aux;
    aux.stock = (nominal.stock * p.sigma_S2 + p.sigma_C2 * F_t) / (I_t * p.sigma_S2);
    const double lhs = (nominal.bond * p.sigma_I + nominal.stock * p.sigma_S1 + p.sigma_C1 * F_t -
                        p.sigma_I * (X_t + F_t)) / I_t;
    aux.bond = (lhs - aux.stock * p.sigma_S1) / p.sigma_I;
    return aux;
}

inline Allocation back_transform(const MarketParams& p, double I_t, double F_t, double X_t,
                                 const Allocation& aux) {
    require_invertible(p);
    if (!(I_t > 0.0)) throw domain_error("transform: I_t must be positive");
    Allocation nominal;
    nominal.stock = (I_t * aux.stock * p.sigma_S2 - p.sigma_C2 * F_t) / p.sigma_S2;
    nominal.bond = (I_t * (aux.bond * p.sigma_I + aux.stock * p.sigma_S1) - nominal.stock * p.sigma_S1 -
                    p.sigma_C1 * F_t + p.sigma_I * (X_t + F_t)) / p.sigma_I;
    return nominal;
}

}  // namespace omega
