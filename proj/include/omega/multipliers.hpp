#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "envelope.hpp"
#include "errors.hpp"
#include "market.hpp"
#include "normal.hpp"
#include "quadrature.hpp"
#include "roots.hpp"

namespace omega {

struct QuadratureSpec {
    int nodes = 400;
    bool split_at_breakpoints = true;

    void validate() const {
        if (nodes < 64) throw std::invalid_argument("QuadratureSpec: at least 64 nodes required");
    }
};

struct Tolerances {
    double budget = 1e-9;  // relative
    double value = 1e-8;
    double slack = 1e-8;
};

// E[H Z], P(Z >= L), E[U((Z - theta)+)], E[D((theta - Z)+)] at Z = x*(beta H(T)).
struct Moments {
    double budget = 0.0;
    double prob_floor = 0.0;
    double reward = 0.0;
    double penalty = 0.0;

    double value(double nu) const { return reward - nu * penalty; }
};

namespace detail {

inline constexpr int panel_order = 16;

// Half-width of the standardized window: the Gaussian factor must be
// negligible beyond it even after tilting by the gain-branch growth.
inline double window_half_width(const KernelLaw& law, const PiecewiseSolution& sol) {
    double tilt = 10.0;
    if (sol.pair().is_power()) tilt = std::max(1.0, 1.0 / (1.0 - sol.pair().power_params().gamma1));
    return 40.0 + law.sd() * tilt;
}

// Calls g(weight, H, x, kind) over a quadrature of u ~ N(0,1), H = exp(-a - s u).
// extra_y adds panel cuts where the integrand jumps inside a branch.
template <class G>
void integrate(const KernelLaw& law, const PiecewiseSolution& sol, double beta, const QuadratureSpec& q, G&& g,
               const std::vector<double>& extra_y = {}) {
    q.validate();
    const double s = law.sd();
    const double log_beta = std::log(beta);
    auto kernel = [&](double u) { return std::exp(-law.a - s * u); };
    if (!q.split_at_breakpoints) {
        static thread_local int cached_n = 0;
        static thread_local Rule gh;
        if (cached_n != q.nodes) {
            gh = gauss_hermite(q.nodes);
            cached_n = q.nodes;
        }
        const double norm = 1.0 / std::sqrt(std::numbers::pi);
        for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
            const double u = std::numbers::sqrt2 * gh.nodes[i];
            const double H = kernel(u);
            const double y = beta * H;
            const auto& br = sol.branches()[sol.index_of(y)];
            g(gh.weights[i] * norm, H, sol.value(br.kind, y), br.kind);
        }
        return;
    }
    static const Rule gl = gauss_legendre(panel_order);
    const double W = window_half_width(law, sol);
    std::vector<double> cuts{-W, W};
    auto ys = sol.breakpoints();
    ys.insert(ys.end(), extra_y.begin(), extra_y.end());
    for (double yb : ys) {
        if (!(yb > 0.0) || std::isinf(yb)) continue;
        const double u = (log_beta - std::log(yb) - law.a) / s;
        if (u > -W && u < W) cuts.push_back(u);
    }
    std::sort(cuts.begin(), cuts.end());
    const int panels = std::max(1, q.nodes / panel_order);
    const double width = 2.0 * W / panels;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double lo = cuts[c], hi = cuts[c + 1];
        if (!(hi > lo)) continue;
        const double um = 0.5 * (lo + hi);
        const auto& br = sol.branches()[sol.index_of(beta * kernel(um))];
        const int m = std::max(1, static_cast<int>(std::ceil((hi - lo) / width)));
        const double w = (hi - lo) / m;
        for (int p = 0; p < m; ++p) {
            const double centre = lo + (p + 0.5) * w;
            for (int i = 0; i < panel_order; ++i) {
                const double u = centre + 0.5 * w * gl.nodes[i];
                const double H = kernel(u);
                g(0.5 * w * gl.weights[i] * norm_pdf(u), H, sol.value(br.kind, beta * H), br.kind);
            }
        }
    }
}

}  // namespace detail

// Exact P(x*(beta H) >= L) from the largest y with x*(y) >= L.
inline double var_S(const KernelLaw& law, const PiecewiseSolution& sol, double beta) {
    if (sol.objective().floor <= 0.0) return 1.0;
    const double yL = sol.floor_threshold();
    if (yL <= 0.0) return 0.0;
    if (std::isinf(yL)) return 1.0;
    const double uL = (std::log(beta) - std::log(yL) - law.a) / law.sd();
    return norm_cdf(-uL);
}

inline Moments moments(const KernelLaw& law, const PiecewiseSolution& sol, double beta, const QuadratureSpec& q) {
    const auto& P = sol.pair();
    const double theta = sol.objective().theta;
    Moments m;
    detail::integrate(law, sol, beta, q, [&](double w, double H, double x, BranchKind) {
        m.budget += w * H * x;
        if (x > theta) m.reward += w * P.reward(x - theta);
        if (x < theta) m.penalty += w * P.penalty(theta - x);
    });
    m.prob_floor = var_S(law, sol, beta);
    if (!std::isfinite(m.budget) || !std::isfinite(m.reward) || !std::isfinite(m.penalty))
        throw numerical_error("moments: non-finite quadrature result");
    return m;
}

inline double budget_R(const KernelLaw& law, const PiecewiseSolution& sol, double beta, const QuadratureSpec& q) {
    double acc = 0.0;
    detail::integrate(law, sol, beta, q, [&](double w, double H, double x, BranchKind) { acc += w * H * x; });
    if (!std::isfinite(acc)) throw numerical_error("budget_R: non-finite quadrature result");
    return acc;
}

// P(Z >= L) by quadrature of the indicator; used to cross-check var_S.
inline double var_S_quadrature(const KernelLaw& law, const PiecewiseSolution& sol, double beta,
                               const QuadratureSpec& q) {
    double acc = 0.0;
    const double L = sol.objective().floor;
    detail::integrate(
        law, sol, beta, q,
        [&](double w, double, double x, BranchKind k) {
            if (k == BranchKind::Floor || x >= L) acc += w;
        },
        {sol.floor_threshold()});
    return acc;
}

inline double value_v(const KernelLaw& law, const PiecewiseSolution& sol, double beta, const QuadratureSpec& q) {
    return moments(law, sol, beta, q).value(sol.objective().nu);
}

// beta* with R(beta*) = x~0, or nullopt when doubling/halving from 1 never brackets it.
inline std::optional<double> solve_beta(const KernelLaw& law, const PiecewiseSolution& sol, double x0_tilde,
                                        const QuadratureSpec& q, const Tolerances& tol = {}) {
    if (!(x0_tilde > 0.0)) throw domain_error("solve_beta: x~0 must be positive");
    constexpr double step = 0.6931471805599453;  // ln 2
    constexpr double limit = 1000.0 * step;
    auto f = [&](double t) { return budget_R(law, sol, std::exp(t), q) - x0_tilde; };
    double lo = 0.0, hi = 0.0;
    double flo = f(0.0), fhi = flo;
    if (flo == 0.0) return 1.0;
    if (flo > 0.0) {
        while (fhi > 0.0) {
            lo = hi;
            flo = fhi;
            hi += step;
            if (hi > limit) return std::nullopt;
            fhi = f(hi);
        }
    } else {
        while (flo < 0.0) {
            hi = lo;
            fhi = flo;
            lo -= step;
            if (lo < -limit) return std::nullopt;
            flo = f(lo);
        }
    }
    const auto [t, r] = detail::toms748_best(f, lo, hi, flo, fhi, 1e-14);
    if (!(std::abs(r) <= tol.budget * x0_tilde))
        throw numerical_error("solve_beta: budget residual " + std::to_string(r) + " above tolerance");
    return std::exp(t);
}

enum class Existence { Solved, VarInfeasible, BudgetInfeasible };

inline const char* to_string(Existence e) {
    switch (e) {
        case Existence::Solved: return "Solved";
        case Existence::VarInfeasible: return "VarInfeasible";
        case Existence::BudgetInfeasible: return "BudgetInfeasible";
    }
    return "?";
}

struct Problem {
    KernelLaw law;
    PreferencePair pair = PreferencePair::power(0.3, 2.2, 1.0);
    double x0_tilde = 1.0;
    double theta = 1.0;
    double floor = 0.0;
    double eps = 1.0;
    QuadratureSpec quad;
    Tolerances tol;

    LinearizedObjective objective(double nu, double lambda) const { return {nu, lambda, theta, floor}; }
};

// Z_{nu,lambda} with its budget multiplier and moments.
struct InnerSolution {
    double nu = 0.0;
    double lambda = 0.0;
    double beta = 0.0;
    PiecewiseSolution solution;
    Moments moments;
};

inline std::optional<InnerSolution> solve_inner(const Problem& pb, double nu, double lambda) {
    auto sol = classify_and_solve(pb.objective(nu, lambda), pb.pair);
    const auto beta = solve_beta(pb.law, sol, pb.x0_tilde, pb.quad, pb.tol);
    if (!beta) return std::nullopt;
    auto m = moments(pb.law, sol, *beta, pb.quad);
    return InnerSolution{nu, lambda, *beta, std::move(sol), m};
}

struct LambdaResult {
    Existence verdict = Existence::Solved;
    std::optional<InnerSolution> inner;
    std::optional<double> p;  // sup over lambda of S, when it was needed
};

inline constexpr double lambda_grid_lo = 1e-6;
inline constexpr double lambda_grid_hi = 1e6;
inline constexpr int lambda_grid_points = 60;

inline double lambda_grid(int j) {
    return lambda_grid_lo * std::pow(lambda_grid_hi / lambda_grid_lo, static_cast<double>(j) / (lambda_grid_points - 1));
}

// The floor trade-off is against nu D, so for nu > 1 the same geometric grid
// continues until it covers lambda_grid_hi * nu.
inline int lambda_grid_count(double nu) {
    int n = lambda_grid_points;
    const double top = lambda_grid_hi * std::max(1.0, nu) * (1.0 - 1e-12);
    while (lambda_grid(n - 1) < top) ++n;
    return n;
}

inline LambdaResult solve_lambda(const Problem& pb, double nu) {
    const double target = 1.0 - pb.eps;
    auto at = [&](double lam) {
        auto r = solve_inner(pb, nu, lam);
        if (!r) throw numerical_error("solve_lambda: budget multiplier not bracketed");
        return std::move(*r);
    };
    LambdaResult out;
    auto first = solve_inner(pb, nu, 0.0);
    if (!first) {
        out.verdict = Existence::BudgetInfeasible;
        return out;
    }
    if (first->moments.prob_floor >= target) {
        out.inner = std::move(first);
        return out;
    }

    double lo = 0.0, hi = -1.0;
    double best_S = first->moments.prob_floor;
    int best_j = -1;
    std::optional<InnerSolution> hi_sol;
    const int grid_n = lambda_grid_count(nu);
    for (int j = 0; j < grid_n; ++j) {
        const double lam = lambda_grid(j);
        auto cur = at(lam);
        const double S = cur.moments.prob_floor;
        if (S > best_S) {
            best_S = S;
            best_j = j;
        }
        if (S >= target) {
            hi = lam;
            hi_sol = std::move(cur);
            break;
        }
        lo = lam;
    }

    if (hi < 0.0) {
        // No grid point reaches the target: refine the supremum around the best point.
        double p = best_S;
        double p_lam = best_j < 0 ? 0.0 : lambda_grid(best_j);
        if (best_j >= 0) {
            const double a = std::log(lambda_grid(std::max(0, best_j - 1)));
            const double b = std::log(lambda_grid(std::min(grid_n - 1, best_j + 1)));
            if (b > a) {
                std::uintmax_t iters = 60;
                const auto r = boost::math::tools::brent_find_minima(
                    [&](double t) { return -at(std::exp(t)).moments.prob_floor; }, a, b, 30, iters);
                if (-r.second > p) {
                    p = -r.second;
                    p_lam = std::exp(r.first);
                }
            }
        }
        if (p >= target) {
            hi = p_lam;
            hi_sol = at(p_lam);
            lo = best_j > 0 ? lambda_grid(best_j - 1) : 0.0;
        } else {
            out.verdict = Existence::VarInfeasible;
            out.p = p;
            return out;
        }
    }

    // S(lambda) - (1 - eps) changes sign on [lo, hi].
    std::map<double, InnerSolution> seen;
    auto f = [&](double lam) {
        auto it = seen.find(lam);
        if (it == seen.end()) it = seen.emplace(lam, at(lam)).first;
        return it->second.moments.prob_floor - target;
    };
    const double flo = f(lo);
    seen.emplace(hi, std::move(*hi_sol));
    const double fhi = seen.at(hi).moments.prob_floor - target;
    auto [lam, r] = detail::toms748_best(f, lo, hi, flo, fhi, 1e-15 * std::max(1.0, hi));
    if (!(std::abs(r) <= pb.tol.slack)) {
        // No crossing to tolerance (S jumps): keep the smallest feasible lambda seen.
        double best = hi;
        for (const auto& [l, s] : seen)
            if (s.moments.prob_floor >= target && l < best) best = l;
        lam = best;
    }
    out.inner = std::move(seen.at(lam));
    return out;
}

struct Residuals {
    double budget = 0.0;  // |R - x~0| / x~0
    double slack = 0.0;   // lambda (S - (1 - eps))
    double var_gap = 0.0; // S - (1 - eps)
    double value = 0.0;   // |v(nu)|
    double ratio = 0.0;   // |E[U]/E[D] - nu| / nu
};

struct SolverResult {
    Existence verdict = Existence::Solved;
    double nu = 0.0;
    double lambda = 0.0;
    double beta = 0.0;
    std::optional<double> p;
    std::optional<PiecewiseSolution> solution;
    Moments moments;
    Residuals residuals;
    int nu_evaluations = 0;
    bool nu_fixed = false;
};

inline Residuals residuals_of(const Problem& pb, const InnerSolution& in) {
    Residuals r;
    const double R = budget_R(pb.law, in.solution, in.beta, pb.quad);
    r.budget = std::abs(R - pb.x0_tilde) / pb.x0_tilde;
    r.var_gap = in.moments.prob_floor - (1.0 - pb.eps);
    r.slack = in.lambda * r.var_gap;
    r.value = std::abs(in.moments.value(in.nu));
    r.ratio = in.moments.penalty > 0.0 && in.nu > 0.0
                  ? std::abs(in.moments.reward / in.moments.penalty - in.nu) / in.nu
                  : std::numeric_limits<double>::infinity();
    return r;
}

inline SolverResult assemble(const Problem& pb, const LambdaResult& lr, int evals, bool fixed) {
    SolverResult out;
    out.verdict = lr.verdict;
    out.p = lr.p;
    out.nu_evaluations = evals;
    out.nu_fixed = fixed;
    if (lr.inner) {
        const auto& in = *lr.inner;
        out.nu = in.nu;
        out.lambda = in.lambda;
        out.beta = in.beta;
        out.solution = in.solution;
        out.moments = in.moments;
        out.residuals = residuals_of(pb, in);
    }
    return out;
}

inline constexpr double nu_max = 1e6;

// nu* with v(nu*) = 0, each v evaluation running the lambda and beta solves.
inline SolverResult solve_nu(const Problem& pb) {
    std::map<double, LambdaResult> cache;
    int evals = 0;
    std::optional<LambdaResult> failed;
    auto eval = [&](double nu) -> const LambdaResult& {
        auto it = cache.find(nu);
        if (it == cache.end()) {
            ++evals;
            it = cache.emplace(nu, solve_lambda(pb, nu)).first;
        }
        return it->second;
    };
    auto v = [&](double nu) {
        const auto& r = eval(nu);
        if (r.verdict != Existence::Solved) {
            failed = r;
            throw r.verdict;
        }
        return r.inner->moments.value(nu);
    };
    try {
        const double v0 = v(0.0);
        if (!(v0 > 0.0)) throw numerical_error("solve_nu: v(0) is not positive");
        double lo = 0.0, hi = 1.0, flo = v0, fhi = v(hi);
        while (fhi >= 0.0) {
            lo = hi;
            flo = fhi;
            hi *= 2.0;
            if (hi > nu_max) throw numerical_error("solve_nu: no sign change of v on [0, 1e6]");
            fhi = v(hi);
        }
        const auto [nu, r] = detail::toms748_best(v, lo, hi, flo, fhi, 1e-15 * hi);
        (void)r;
        return assemble(pb, cache.at(nu), evals, false);
    } catch (Existence) {
        return assemble(pb, *failed, evals, false);
    }
}

// The lambda and beta solves at a pinned nu (no fractional-programming loop).
inline SolverResult solve_fixed_nu(const Problem& pb, double nu) {
    return assemble(pb, solve_lambda(pb, nu), 1, true);
}

}  // namespace omega
