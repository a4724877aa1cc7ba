#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace omega {

enum class PenaltyShape { Convex, Concave };

enum class Assumption { H1, H2, H3, H4, ShapeFlag };

inline const char* to_string(Assumption a) {
    switch (a) {
        case Assumption::H1: return "H1";
        case Assumption::H2: return "H2";
        case Assumption::H3: return "H3";
        case Assumption::H4: return "H4";
        case Assumption::ShapeFlag: return "ShapeFlag";
    }
    return "?";
}

struct PowerParams {
    double gamma1 = 0.3;
    double gamma2 = 2.2;
    double A = 1.0;
};

// Reward U and penalty D with derivatives and inverse marginals.
class PreferencePair {
public:
    using Fn = std::function<double(double)>;

    // U(x) = x^gamma1, D(x) = A x^gamma2.
    static PreferencePair power(double gamma1, double gamma2, double A = 1.0) {
        if (!(gamma1 > 0.0 && gamma2 > 0.0 && A > 0.0))
            throw std::invalid_argument("power pair: exponents and scale must be positive");
        PreferencePair p;
        p.power_ = true;
        p.pp_ = {gamma1, gamma2, A};
        p.shape_ = gamma2 > 1.0 ? PenaltyShape::Convex : PenaltyShape::Concave;
        return p;
    }

    // Arbitrary callables; missing derivatives fall back to central differences.
    static PreferencePair general(Fn reward, Fn penalty, PenaltyShape shape, Fn reward_slope = {},
                                  Fn penalty_slope = {}) {
        if (!reward || !penalty) throw std::invalid_argument("general pair: U and D are required");
        PreferencePair p;
        p.power_ = false;
        p.shape_ = shape;
        p.u_ = std::move(reward);
        p.d_ = std::move(penalty);
        p.up_ = std::move(reward_slope);
        p.dp_ = std::move(penalty_slope);
        return p;
    }

    bool is_power() const { return power_; }
    const PowerParams& power_params() const {
        if (!power_) throw unsupported("power_params: not a power pair");
        return pp_;
    }
    PenaltyShape shape() const { return shape_; }

    double reward(double x) const { return power_ ? std::pow(x, pp_.gamma1) : u_(x); }
    double penalty(double x) const { return power_ ? pp_.A * std::pow(x, pp_.gamma2) : d_(x); }

    double reward_slope(double x) const {
        if (power_) return pp_.gamma1 * std::pow(x, pp_.gamma1 - 1.0);
        return up_ ? up_(x) : central_difference(u_, x);
    }
    double penalty_slope(double x) const {
        if (power_) return pp_.A * pp_.gamma2 * std::pow(x, pp_.gamma2 - 1.0);
        return dp_ ? dp_(x) : central_difference(d_, x);
    }

    // I1 = (U')^{-1}
    double inverse_reward_slope(double y) const {
        if (!(y > 0.0)) throw domain_error("inverse marginal: y must be positive");
        if (power_) return std::pow(y / pp_.gamma1, 1.0 / (pp_.gamma1 - 1.0));
        return invert_decreasing([this](double x) { return reward_slope(x); }, y);
    }

    // I2 = (D')^{-1}; D' is increasing for convex D and decreasing for concave D.
    double inverse_penalty_slope(double y) const {
        if (!(y > 0.0)) throw domain_error("inverse marginal: y must be positive");
        if (power_) return std::pow(y / (pp_.A * pp_.gamma2), 1.0 / (pp_.gamma2 - 1.0));
        if (shape_ == PenaltyShape::Concave)
            return invert_decreasing([this](double x) { return penalty_slope(x); }, y);
        return invert_decreasing([this](double x) { return -penalty_slope(x); }, -y);
    }

    static double difference_step(double x) { return x * 1e-6 + 1e-9; }

private:
    static double central_difference(const Fn& f, double x) {
        double h = difference_step(x);
        if (x > 0.0 && h >= x) h = 0.5 * x;
        if (x - h < 0.0) return (f(x + h) - f(x)) / h;
        return (f(x + h) - f(x - h)) / (2.0 * h);
    }

    // Solve g(x) = y for g decreasing on (0, inf) by log-bisection.
    template <class G>
    static double invert_decreasing(G&& g, double y) {
        double lo = 1.0, hi = 1.0;
        constexpr double lim_lo = 1e-150, lim_hi = 1e150;
        if (g(1.0) > y) {
            while (g(hi) > y) {
                lo = hi;
                hi *= 16.0;
                if (hi > lim_hi) throw numerical_error("inverse marginal: bracket failed above");
            }
        } else {
            while (g(lo) <= y) {
                hi = lo;
                lo /= 16.0;
                if (lo < lim_lo) throw numerical_error("inverse marginal: bracket failed below");
            }
        }
        for (int i = 0; i < 200 && hi / lo - 1.0 > 1e-13; ++i) {
            const double mid = std::sqrt(lo) * std::sqrt(hi);
            if (g(mid) > y)
                lo = mid;
            else
                hi = mid;
        }
        return std::sqrt(lo) * std::sqrt(hi);
    }

    bool power_ = true;
    PowerParams pp_{};
    PenaltyShape shape_ = PenaltyShape::Convex;
    Fn u_, d_, up_, dp_;
};

// f_{nu,lambda}(x) = U((x-theta)+) - nu D((theta-x)+) + lambda 1{x >= L}
struct LinearizedObjective {
    double nu = 0.0;
    double lambda = 0.0;
    double theta = 1.0;
    double floor = 0.0;
};

inline double eval_f_nu(const PreferencePair& pair, const LinearizedObjective& o, double x) {
    if (!(x >= 0.0)) throw domain_error("eval_f: x must be nonnegative");
    if (x > o.theta) return pair.reward(x - o.theta);
    if (x < o.theta) return o.nu == 0.0 ? 0.0 : -o.nu * pair.penalty(o.theta - x);
    return 0.0;
}

inline double eval_f(const PreferencePair& pair, const LinearizedObjective& o, double x) {
    return eval_f_nu(pair, o, x) + (x >= o.floor ? o.lambda : 0.0);
}

inline std::pair<double, double> inverse_marginals(const PreferencePair& pair, double y) {
    return {pair.inverse_reward_slope(y), pair.inverse_penalty_slope(y)};
}

// Violated assumptions: analytic for the power family, sampled otherwise.
inline std::vector<Assumption> validate(const PreferencePair& pair) {
    std::vector<Assumption> out;
    if (pair.is_power()) {
        const auto& p = pair.power_params();
        // -x U''/U' = 1 - gamma1, so gamma1 in (0,1) satisfies H2-H4 and gamma1 >= 1 fails all three.
        if (p.gamma1 >= 1.0) out = {Assumption::H2, Assumption::H3, Assumption::H4};
        return out;
    }
    constexpr int n = 1000;
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = std::pow(10.0, -6.0 + 12.0 * i / (n - 1));

    bool h1 = pair.reward(0.0) == 0.0 && pair.penalty(0.0) == 0.0;
    for (int i = 1; i < n && h1; ++i)
        h1 = pair.reward(xs[i]) > pair.reward(xs[i - 1]) && pair.penalty(xs[i]) > pair.penalty(xs[i - 1]);
    if (!h1) out.push_back(Assumption::H1);

    const double u1 = pair.reward_slope(1.0);
    const bool h2 = pair.reward_slope(1e-12) / u1 > 10.0 && pair.reward_slope(1e12) / u1 < 0.1;
    if (!h2) out.push_back(Assumption::H2);

    // Strict concavity: second differences on the grid are negative.
    bool h3 = true;
    for (int i = 1; i + 1 < n && h3; ++i) {
        const double a = pair.reward(xs[i - 1]), b = pair.reward(xs[i]), c = pair.reward(xs[i + 1]);
        const double left = (b - a) / (xs[i] - xs[i - 1]);
        const double right = (c - b) / (xs[i + 1] - xs[i]);
        h3 = right < left;
    }
    if (!h3) out.push_back(Assumption::H3);

    // Asymptotic elasticity x U'(x) / U(x) stays below 1 for large x.
    bool h4 = true;
    for (double x : {1e4, 1e6, 1e8}) {
        const double e = x * pair.reward_slope(x) / pair.reward(x);
        if (!(e < 1.0 - 1e-6)) h4 = false;
    }
    if (!h4) out.push_back(Assumption::H4);

    // Shape flag against the sign of D''.
    int convex_votes = 0, concave_votes = 0;
    for (int i = 1; i + 1 < n; i += 10) {
        const double a = pair.penalty(xs[i - 1]), b = pair.penalty(xs[i]), c = pair.penalty(xs[i + 1]);
        const double left = (b - a) / (xs[i] - xs[i - 1]);
        const double right = (c - b) / (xs[i + 1] - xs[i]);
        if (right > left) ++convex_votes;
        if (right < left) ++concave_votes;
    }
    const bool shape_ok = pair.shape() == PenaltyShape::Convex ? concave_votes == 0 : convex_votes == 0;
    if (!shape_ok) out.push_back(Assumption::ShapeFlag);
    return out;
}

}  // namespace omega
