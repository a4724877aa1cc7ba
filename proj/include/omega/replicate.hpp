#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "envelope.hpp"
#include "errors.hpp"
#include "market.hpp"
#include "normal.hpp"

namespace omega {

// g H^alpha + b on beta H(T) in [h1, h2); h1, h2 are kernel-scaled (y) values.
struct PayoffAtom {
    BranchKind kind = BranchKind::Zero;
    double g = 0.0;
    double alpha = 0.0;
    double b = 0.0;
    double h1 = 0.0;
    double h2 = std::numeric_limits<double>::infinity();
};

struct Payoff {
    double beta = 1.0;
    std::vector<PayoffAtom> atoms;

    // Z*(H) from the atom representation.
    double terminal(double H) const {
        const double y = beta * H;
        for (const auto& a : atoms)
            if (y >= a.h1 && y < a.h2) return (a.g == 0.0 ? 0.0 : a.g * std::pow(H, a.alpha)) + a.b;
        return 0.0;
    }
};

inline Payoff atoms_from_solution(const PiecewiseSolution& sol, double beta) {
    if (!sol.pair().is_power()) throw unsupported("atoms_from_solution: closed form needs the power family");
    if (!(beta > 0.0)) throw domain_error("atoms_from_solution: beta must be positive");
    const auto& pp = sol.pair().power_params();
    const auto& obj = sol.objective();
    Payoff out{beta, {}};
    for (const auto& br : sol.branches()) {
        PayoffAtom a;
        a.kind = br.kind;
        a.h1 = br.y_lo;
        a.h2 = br.y_hi;
        switch (br.kind) {
            case BranchKind::Gain:
                a.alpha = 1.0 / (pp.gamma1 - 1.0);
                a.g = std::pow(beta / pp.gamma1, a.alpha);
                a.b = obj.theta;
                break;
            case BranchKind::Loss:
                a.alpha = 1.0 / (pp.gamma2 - 1.0);
                a.g = -std::pow(beta / (obj.nu * pp.A * pp.gamma2), a.alpha);
                a.b = obj.theta;
                break;
            case BranchKind::Floor: a.b = obj.floor; break;
            case BranchKind::Zero: break;
        }
        out.atoms.push_back(a);
    }
    return out;
}

// R(t) = -int_t^T r_r and the kernel variance Sigma(t) left at time t.
struct Horizon {
    double t = 0.0;
    double R = 0.0;
    double Sigma = 0.0;
    double remaining = 0.0;  // T - t
};

inline Horizon horizon(const MarketParams& p, double t) {
    if (!(t >= 0.0 && t <= p.T)) throw domain_error("horizon: t outside [0, T]");
    return {t, -p.r_r.integral(t, p.T), p.kernel_variance_rate() * (p.T - t), p.T - t};
}

inline constexpr double maturity_guard = 1e-8;

struct AtomValue {
    double wealth = 0.0;
    double psi = 0.0;  // -H d(wealth)/dH
};

namespace detail {

// Standardized log-kernel bound for a y-space endpoint; +-inf for 0 and inf.
inline double kernel_bound(double h, double beta, double H, const Horizon& hz, double sd) {
    if (h <= 0.0) return -std::numeric_limits<double>::infinity();
    if (std::isinf(h)) return std::numeric_limits<double>::infinity();
    return (std::log(h / (beta * H)) + 0.5 * hz.Sigma - hz.R) / sd;
}

}  // namespace detail

inline AtomValue atom_value(const PayoffAtom& a, double beta, const Horizon& hz, double H) {
    if (!(H > 0.0)) throw domain_error("wealth_t: H must be positive");
    if (hz.remaining < maturity_guard || hz.Sigma <= 0.0) {
        // At maturity the conditional expectation is the payoff itself.
        const double y = beta * H;
        if (!(y >= a.h1 && y < a.h2)) return {};
        const double gh = a.g == 0.0 ? 0.0 : a.g * std::pow(H, a.alpha);
        return {gh + a.b, -a.alpha * gh};
    }
    const double sd = std::sqrt(hz.Sigma);
    const double H1 = detail::kernel_bound(a.h1, beta, H, hz, sd);
    const double H2 = detail::kernel_bound(a.h2, beta, H, hz, sd);
    AtomValue out;
    if (a.b != 0.0) {
        const double eR = std::exp(hz.R);
        out.wealth += a.b * eR * norm_cdf_diff(H1 - sd, H2 - sd);
        out.psi += a.b * eR * (norm_pdf(H2 - sd) - norm_pdf(H1 - sd)) / sd;
    }
    if (a.g != 0.0) {
        const double c1 = (a.alpha + 1.0) * sd;
        const double lnK = std::log(std::abs(a.g)) + a.alpha * std::log(H) + (a.alpha + 1.0) * hz.R +
                           0.5 * a.alpha * (a.alpha + 1.0) * hz.Sigma;
        const double sign = a.g > 0.0 ? 1.0 : -1.0;
        const double mass = norm_cdf_diff(H1 - c1, H2 - c1);
        const double scaled = mass > 0.0 ? std::exp(lnK + std::log(mass)) : 0.0;
        auto pdf_scaled = [&](double x) {
            if (std::isinf(x)) return 0.0;
            return inv_sqrt_2pi * std::exp(lnK - 0.5 * x * x);
        };
        out.wealth += sign * scaled;
        out.psi += sign * (-a.alpha * scaled + (pdf_scaled(H2 - c1) - pdf_scaled(H1 - c1)) / sd);
    }
    return out;
}

// X~*(t) and the aggregate Psi at kernel value H(t) = H.
inline AtomValue wealth_and_psi(const Payoff& pay, const Horizon& hz, double H) {
    AtomValue acc;
    for (const auto& a : pay.atoms) {
        const auto v = atom_value(a, pay.beta, hz, H);
        acc.wealth += v.wealth;
        acc.psi += v.psi;
    }
    return acc;
}

inline double wealth_t(const Payoff& pay, const MarketParams& p, double t, double H) {
    if (p.T - t < maturity_guard) return pay.terminal(H);
    return wealth_and_psi(pay, horizon(p, t), H).wealth;
}

inline double psi(const PayoffAtom& a, double beta, const MarketParams& p, double t, double H) {
    return atom_value(a, beta, horizon(p, t), H).psi;
}

// Divisor of the bond formula: printed sigma_S1, or sigma_I from matching the W_I diffusion.
enum class BondVariant { AsPrinted, VolatilityMatched };

inline const char* to_string(BondVariant v) {
    return v == BondVariant::AsPrinted ? "as_printed" : "volatility_matched";
}

// Nominal (pi_P, pi_S) given the aggregate Psi and the state at t.
inline Allocation strategy_from_psi(const MarketParams& p, double psi_sum, double I, double F, double X_tilde,
                                    BondVariant variant) {
    require_invertible(p);
    const double divisor = variant == BondVariant::AsPrinted ? p.sigma_S1 : p.sigma_I;
    if (divisor == 0.0) throw singular_transform("strategy: bond divisor is zero");
    Allocation a;
    a.stock = (p.lambda_S * I * psi_sum - p.sigma_C2 * F) / p.sigma_S2;
    a.bond = ((p.lambda_I - p.sigma_I) * I * psi_sum + p.sigma_I * I * X_tilde - p.sigma_S1 * a.stock -
              p.sigma_C1 * F) / divisor;
    return a;
}

struct WealthSnapshot {
    double t = 0.0;
    double H = 0.0;
    double X_tilde = 0.0;
    double psi_sum = 0.0;
    double pi_P = 0.0;
    double pi_S = 0.0;
    double I = 0.0;
    double F = 0.0;
};

inline WealthSnapshot strategy(const Payoff& pay, const MarketParams& p, double t, double H, double I, double F,
                               double X_tilde, BondVariant variant = BondVariant::AsPrinted) {
    if (p.T - t < maturity_guard) throw domain_error("strategy: t must be before maturity");
    const auto v = wealth_and_psi(pay, horizon(p, t), H);
    const auto a = strategy_from_psi(p, v.psi, I, F, X_tilde, variant);
    return {t, H, v.wealth, v.psi, a.bond, a.stock, I, F};
}

struct SampleStat {
    double mean = 0.0;
    double se = 0.0;
};

// Uniform steps, or t_k = T (1 - (1 - k/n)^2) which refines towards maturity
// where the hedge of a discontinuous payoff moves fastest.
enum class TimeGrid { Uniform, MaturityRefined };

inline const char* to_string(TimeGrid g) { return g == TimeGrid::Uniform ? "uniform" : "maturity_refined"; }

inline std::vector<double> time_grid(double T, std::uint64_t steps, TimeGrid kind) {
    std::vector<double> t(steps + 1);
    for (std::uint64_t k = 0; k <= steps; ++k) {
        const double u = static_cast<double>(k) / static_cast<double>(steps);
        t[k] = kind == TimeGrid::Uniform ? T * u : T * (1.0 - (1.0 - u) * (1.0 - u));
    }
    t[steps] = T;
    return t;
}

struct SimulationSpec {
    std::uint64_t paths = 10000;
    std::uint64_t steps = 10000;
    TimeGrid grid = TimeGrid::Uniform;
    std::uint64_t seed = 1;
    unsigned threads = 0;                  // 0: hardware concurrency
    std::uint64_t block = 256;             // paths per independent substream
    std::vector<double> checkpoints;       // interior times for the martingale test
};

struct CheckpointStat {
    double t = 0.0;
    SampleStat closed_form;  // H(t) X~*(t) from the closed form at the simulated H(t)
    SampleStat hedged;       // H(t) X~(t) along the simulated hedge
};

struct PathStatistics {
    std::uint64_t paths = 0;
    SampleStat terminal;          // X~(T) of the hedge
    SampleStat payoff;            // Z*(H(T))
    double rms_relative = 0.0;    // ||X~(T) - Z*|| / ||Z*||
    SampleStat prob_floor;        // P(Z* >= L)
    SampleStat ratio;             // E[U] / E[D], delta-method SE
    double min_terminal = 0.0;
    std::vector<CheckpointStat> checkpoints;
};

// Auxiliary allocation (pi~_P, pi~_S) at step k given (H, I, F, X~).
struct StrategySource {
    std::function<Allocation(std::uint64_t step, double t, double H, double I, double F, double X_tilde)> aux;
    const Payoff* payoff = nullptr;  // optional: enables payoff, floor and ratio statistics
    double theta = 0.0;
    double floor = 0.0;
    const PreferencePair* pair = nullptr;
};

// Closed-form hedge with per-step horizons precomputed.
class ClosedFormHedge {
public:
    ClosedFormHedge(const MarketParams& p, Payoff pay, BondVariant variant, const std::vector<double>& times)
        : p_(p), pay_(std::move(pay)), variant_(variant) {
        require_invertible(p_);
        hz_.reserve(times.size());
        for (double t : times) hz_.push_back(horizon(p_, t));
    }

    const Payoff& payoff() const { return pay_; }

    Allocation nominal(std::uint64_t step, double H, double I, double F, double X_tilde) const {
        const auto v = wealth_and_psi(pay_, hz_.at(step), H);
        return strategy_from_psi(p_, v.psi, I, F, X_tilde, variant_);
    }

    Allocation auxiliary(std::uint64_t step, double H, double I, double F, double X_tilde) const {
        return forward_transform(p_, I, F, I * X_tilde - F, nominal(step, H, I, F, X_tilde));
    }

    double wealth(std::uint64_t step, double H) const { return wealth_and_psi(pay_, hz_.at(step), H).wealth; }

private:
    MarketParams p_;
    Payoff pay_;
    BondVariant variant_;
    std::vector<Horizon> hz_;
};

namespace detail {

struct StepGrid {
    std::vector<double> t, dt, rn, rr, annuity;  // per-step length, rate integrals, annuity factor at step start
};

inline StepGrid step_grid(const MarketParams& p, std::uint64_t steps, TimeGrid kind) {
    StepGrid g;
    g.t = time_grid(p.T, steps, kind);
    g.dt.resize(steps);
    g.rn.resize(steps);
    g.rr.resize(steps);
    g.annuity.resize(steps);
    for (std::uint64_t k = 0; k < steps; ++k) {
        g.dt[k] = g.t[k + 1] - g.t[k];
        g.rn[k] = p.r_n.integral(g.t[k], g.t[k + 1]);
        g.rr[k] = p.r_r.integral(g.t[k], g.t[k + 1]);
        g.annuity[k] = annuity_factor(p, g.t[k]);
    }
    return g;
}

struct Accumulator {
    double n = 0, sx = 0, sxx = 0, sz = 0, szz = 0, sdiff2 = 0, sz2 = 0, sfloor = 0, su = 0, sd = 0, suu = 0,
           sdd = 0, sud = 0;
    double min_x = std::numeric_limits<double>::infinity();
    std::vector<double> cf, cf2, hx, hx2;

    explicit Accumulator(std::size_t checkpoints)
        : cf(checkpoints, 0.0), cf2(checkpoints, 0.0), hx(checkpoints, 0.0), hx2(checkpoints, 0.0) {}

    void merge(const Accumulator& o) {
        n += o.n; sx += o.sx; sxx += o.sxx; sz += o.sz; szz += o.szz; sdiff2 += o.sdiff2; sz2 += o.sz2;
        sfloor += o.sfloor; su += o.su; sd += o.sd; suu += o.suu; sdd += o.sdd; sud += o.sud;
        min_x = std::min(min_x, o.min_x);
        for (std::size_t j = 0; j < cf.size(); ++j) {
            cf[j] += o.cf[j]; cf2[j] += o.cf2[j]; hx[j] += o.hx[j]; hx2[j] += o.hx2[j];
        }
    }
};

inline SampleStat sample(double s, double ss, double n) {
    const double m = s / n;
    const double var = n > 1 ? std::max(0.0, ss / n - m * m) * n / (n - 1.0) : 0.0;
    return {m, std::sqrt(var / n)};
}

}  // namespace detail

// Exact lognormal steps for I, c and H; exponential-Euler for X~ under the source's allocation.
// Each block of spec.block paths draws from mt19937_64 seeded with (seed, block index).
inline PathStatistics simulate_paths(const MarketParams& p, double x0_tilde, const StrategySource& src,
                                     const SimulationSpec& spec,
                                     std::vector<WealthSnapshot>* first_path = nullptr,
                                     std::uint64_t record_every = 0) {
    if (spec.paths < 1 || spec.steps < 1) throw domain_error("simulate_paths: paths and steps must be positive");
    const auto grid = detail::step_grid(p, spec.steps, spec.grid);
    const double kI = p.lambda_I - p.sigma_I;
    const double Srate = p.kernel_variance_rate();
    std::vector<std::uint64_t> cp_steps;
    for (double t : spec.checkpoints) {
        // Nearest grid time.
        const auto it = std::lower_bound(grid.t.begin(), grid.t.end(), t);
        auto k = static_cast<std::uint64_t>(it - grid.t.begin());
        if (k > 0 && (k > spec.steps || t - grid.t[k - 1] < grid.t[k] - t)) --k;
        if (k == 0 || k >= spec.steps) throw domain_error("simulate_paths: checkpoint must be interior");
        cp_steps.push_back(k);
    }
    const ClosedFormHedge* cf_src = nullptr;
    std::optional<ClosedFormHedge> cf_holder;
    if (src.payoff && !cp_steps.empty()) {
        cf_holder.emplace(p, *src.payoff, BondVariant::VolatilityMatched, grid.t);
        cf_src = &*cf_holder;
    }

    const std::uint64_t blocks = (spec.paths + spec.block - 1) / spec.block;
    std::vector<detail::Accumulator> acc(blocks, detail::Accumulator(cp_steps.size()));

    auto run_block = [&](std::uint64_t b) {
        std::seed_seq ss{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                         static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        std::mt19937_64 rng(ss);
        std::normal_distribution<double> N01;
        auto& A = acc[b];
        const std::uint64_t first = b * spec.block, last = std::min(spec.paths, first + spec.block);
        for (std::uint64_t path = first; path < last; ++path) {
            double lnI = std::log(p.i0), lnc = std::log(p.c0 > 0.0 ? p.c0 : 1.0), lnH = 0.0, X = x0_tilde;
            const double cscale = p.c0 > 0.0 ? 1.0 : 0.0;
            std::size_t next_cp = 0;
            const bool record = first_path && path == 0;
            for (std::uint64_t k = 0; k < spec.steps; ++k) {
                const double t = grid.t[k], dt = grid.dt[k], sq = std::sqrt(dt);
                const double I = std::exp(lnI), H = std::exp(lnH);
                const double F = cscale * std::exp(lnc) * grid.annuity[k];
                if (next_cp < cp_steps.size() && cp_steps[next_cp] == k) {
                    const double w = H * cf_src->wealth(k, H);
                    A.cf[next_cp] += w; A.cf2[next_cp] += w * w;
                    A.hx[next_cp] += H * X; A.hx2[next_cp] += H * X * H * X;
                    ++next_cp;
                }
                const Allocation aux = src.aux(k, t, H, I, F, X);
                if (record && record_every > 0 && k % record_every == 0) {
                    const Allocation nom = back_transform(p, I, F, I * X - F, aux);
                    first_path->push_back({t, H, X, 0.0, nom.bond, nom.stock, I, F});
                }
                const double dWI = sq * N01(rng), dWS = sq * N01(rng);
                const double a = aux.bond * p.sigma_I + aux.stock * p.sigma_S1;
                const double bS = aux.stock * p.sigma_S2;
                X = X * std::exp(grid.rr[k]) + a * (kI * dt + dWI) + bS * (p.lambda_S * dt + dWS);
                lnI += grid.rn[k] - grid.rr[k] + (p.sigma_I * p.lambda_I - 0.5 * p.sigma_I * p.sigma_I) * dt +
                       p.sigma_I * dWI;
                lnc += (p.mu - 0.5 * (p.sigma_C1 * p.sigma_C1 + p.sigma_C2 * p.sigma_C2)) * dt + p.sigma_C1 * dWI +
                       p.sigma_C2 * dWS;
                lnH += -grid.rr[k] - 0.5 * Srate * dt - kI * dWI - p.lambda_S * dWS;
            }
            const double HT = std::exp(lnH);
            if (record && record_every > 0)
                first_path->push_back({p.T, HT, X, 0.0, 0.0, 0.0, std::exp(lnI), 0.0});
            A.n += 1; A.sx += X; A.sxx += X * X; A.min_x = std::min(A.min_x, X);
            if (src.payoff) {
                const double Z = src.payoff->terminal(HT);
                A.sz += Z; A.szz += Z * Z; A.sdiff2 += (X - Z) * (X - Z); A.sz2 += Z * Z;
                A.sfloor += Z >= src.floor ? 1.0 : 0.0;
                if (src.pair) {
                    const double u = Z > src.theta ? src.pair->reward(Z - src.theta) : 0.0;
                    const double d = Z < src.theta ? src.pair->penalty(src.theta - Z) : 0.0;
                    A.su += u; A.sd += d; A.suu += u * u; A.sdd += d * d; A.sud += u * d;
                }
            }
        }
    };

    unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, blocks));
    if (threads <= 1) {
        for (std::uint64_t b = 0; b < blocks; ++b) run_block(b);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i)
            pool.emplace_back([&] {
                for (std::uint64_t b; (b = next.fetch_add(1)) < blocks;) run_block(b);
            });
        for (auto& th : pool) th.join();
    }

    detail::Accumulator tot(cp_steps.size());
    for (const auto& a : acc) tot.merge(a);
    PathStatistics out;
    out.paths = spec.paths;
    const double n = tot.n;
    out.terminal = detail::sample(tot.sx, tot.sxx, n);
    out.min_terminal = tot.min_x;
    if (src.payoff) {
        out.payoff = detail::sample(tot.sz, tot.szz, n);
        out.rms_relative = tot.sz2 > 0.0 ? std::sqrt(tot.sdiff2 / tot.sz2) : std::sqrt(tot.sdiff2 / n);
        out.prob_floor = detail::sample(tot.sfloor, tot.sfloor, n);
        if (src.pair && tot.sd > 0.0) {
            const double mu = tot.su / n, md = tot.sd / n, r = mu / md;
            // Var(U - r D) / (n E[D]^2)
            const double vu = tot.suu / n - mu * mu, vd = tot.sdd / n - md * md, cov = tot.sud / n - mu * md;
            const double v = std::max(0.0, vu - 2.0 * r * cov + r * r * vd);
            out.ratio = {r, std::sqrt(v / n) / md};
        }
    }
    for (std::size_t j = 0; j < cp_steps.size(); ++j)
        out.checkpoints.push_back({grid.t[cp_steps[j]], detail::sample(tot.cf[j], tot.cf2[j], n),
                                   detail::sample(tot.hx[j], tot.hx2[j], n)});
    return out;
}

inline StrategySource closed_form_source(const ClosedFormHedge& hedge, const PiecewiseSolution& sol) {
    StrategySource s;
    s.aux = [&hedge](std::uint64_t k, double, double H, double I, double F, double X) {
        return hedge.auxiliary(k, H, I, F, X);
    };
    s.payoff = &hedge.payoff();
    s.theta = sol.objective().theta;
    s.floor = sol.objective().floor;
    s.pair = &sol.pair();
    return s;
}

}  // namespace omega
