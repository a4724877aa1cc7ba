#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "preferences.hpp"
#include "roots.hpp"

namespace omega {

enum class CaseLabel {
    ConvexI, ConvexII, ConvexIII, ConvexIV, ConvexV, ConvexVI, ConvexVII,
    ConvexVIII, ConvexIX, ConvexX, ConvexXI, ConvexXII, ConvexXIII, ConvexXIV,
    ConcaveI, ConcaveII, ConcaveIII, ConcaveIV, ConcaveV, ConcaveVI,
};

inline constexpr int case_label_count = 20;

inline bool is_convex(CaseLabel c) { return static_cast<int>(c) < 14; }

inline const char* roman(CaseLabel c) {
    static const char* names[] = {"I", "II", "III", "IV", "V", "VI", "VII",
                                  "VIII", "IX", "X", "XI", "XII", "XIII", "XIV"};
    const int i = static_cast<int>(c);
    return names[i < 14 ? i : i - 14];
}

inline std::string to_string(CaseLabel c) {
    return std::string(is_convex(c) ? "convex/" : "concave/") + roman(c);
}

// How a label was reached when it is not the plain display of its case.
enum class Variant {
    Standard,
    TangentBelowZero,      // z6 <= 0 or z12 <= 0: two-region form
    FloorAtReference,      // L == theta
    FloorAtReferenceBelowZero,
    FloorInactive,         // lambda == 0 or L <= 0
};

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::Standard: return "standard";
        case Variant::TangentBelowZero: return "tangent_below_zero";
        case Variant::FloorAtReference: return "floor_at_reference";
        case Variant::FloorAtReferenceBelowZero: return "floor_at_reference_below_zero";
        case Variant::FloorInactive: return "floor_inactive";
    }
    return "?";
}

enum class BranchKind { Gain, Loss, Floor, Zero };

inline const char* to_string(BranchKind k) {
    switch (k) {
        case BranchKind::Gain: return "Gain";
        case BranchKind::Loss: return "Loss";
        case BranchKind::Floor: return "Floor";
        case BranchKind::Zero: return "Zero";
    }
    return "?";
}

// x*(y) = branch formula on [y_lo, y_hi)
struct Branch {
    double y_lo = 0.0;
    double y_hi = std::numeric_limits<double>::infinity();
    BranchKind kind = BranchKind::Zero;
};

struct ThresholdSet {
    std::optional<double> k;
    std::optional<double> z1, z2, z_prime, z3, z4, z5, z6, z7, z6p, z7p, z8, z9, z10, z11, z12, z13;
    std::optional<double> z, L0, z_tilde0, z_hat, z_hat0;

    template <class F>
    void for_each(F&& f) const {
        const std::pair<const char*, const std::optional<double>*> all[] = {
            {"k", &k},     {"z1", &z1},   {"z2", &z2},   {"z_prime", &z_prime}, {"z3", &z3},
            {"z4", &z4},   {"z5", &z5},   {"z6", &z6},   {"z7", &z7},           {"z6_prime", &z6p},
            {"z7_prime", &z7p}, {"z8", &z8}, {"z9", &z9}, {"z10", &z10},        {"z11", &z11},
            {"z12", &z12}, {"z13", &z13}, {"z", &z},     {"L0", &L0},           {"z_tilde0", &z_tilde0},
            {"z_hat", &z_hat}, {"z_hat0", &z_hat0}};
        for (const auto& [name, v] : all)
            if (v->has_value()) f(name, **v);
    }
};

class PiecewiseSolution {
public:
    PiecewiseSolution(PreferencePair pair, LinearizedObjective obj, CaseLabel label, Variant variant,
                      std::vector<Branch> branches, ThresholdSet thresholds)
        : pair_(std::move(pair)), obj_(obj), label_(label), variant_(variant),
          branches_(std::move(branches)), thresholds_(std::move(thresholds)) {}

    CaseLabel label() const { return label_; }
    Variant variant() const { return variant_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const ThresholdSet& thresholds() const { return thresholds_; }
    const PreferencePair& pair() const { return pair_; }
    const LinearizedObjective& objective() const { return obj_; }

    // Interior breakpoints, strictly increasing.
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        for (std::size_t i = 1; i < branches_.size(); ++i) out.push_back(branches_[i].y_lo);
        return out;
    }

    std::size_t index_of(double y) const {
        auto it = std::upper_bound(branches_.begin(), branches_.end(), y,
                                   [](double v, const Branch& b) { return v < b.y_lo; });
        return static_cast<std::size_t>(std::distance(branches_.begin(), it)) - 1;
    }

    double value(BranchKind kind, double y) const {
        switch (kind) {
            case BranchKind::Gain: return obj_.theta + pair_.inverse_reward_slope(y);
            case BranchKind::Loss: return obj_.theta - pair_.inverse_penalty_slope(y / obj_.nu);
            case BranchKind::Floor: return obj_.floor;
            case BranchKind::Zero: return 0.0;
        }
        return 0.0;
    }

    double operator()(double y) const {
        if (!(y > 0.0)) throw domain_error("pointwise_opt: y must be positive");
        return value(branches_[index_of(y)].kind, y);
    }

    // Largest y with x*(y) >= L (0 if none).
    double floor_threshold() const {
        const double L = obj_.floor;
        double best = 0.0;
        for (const auto& b : branches_) {
            double top = -1.0;
            switch (b.kind) {
                case BranchKind::Floor: top = b.y_hi; break;
                case BranchKind::Zero: top = L <= 0.0 ? b.y_hi : -1.0; break;
                case BranchKind::Gain:
                    top = L <= obj_.theta ? b.y_hi : std::min(b.y_hi, pair_.reward_slope(L - obj_.theta));
                    break;
                case BranchKind::Loss:
                    top = L <= 0.0 ? b.y_hi
                          : L < obj_.theta ? std::min(b.y_hi, obj_.nu * pair_.penalty_slope(obj_.theta - L))
                                           : -1.0;
                    break;
            }
            if (top >= b.y_lo) best = std::max(best, top);
        }
        return best;
    }

private:
    PreferencePair pair_;
    LinearizedObjective obj_;
    CaseLabel label_;
    Variant variant_;
    std::vector<Branch> branches_;
    ThresholdSet thresholds_;
};

inline double pointwise_opt(const PiecewiseSolution& sol, double y) { return sol(y); }

namespace detail {

struct Tangency {
    double left = 0.0;   // contact on the loss side (x <= theta) or the anchor
    double right = 0.0;  // contact on the gain side (x >= theta)
    double slope = 0.0;
};

class Classifier {
public:
    Classifier(const PreferencePair& pair, const LinearizedObjective& obj) : P(pair), o(obj) {
        if (!(o.theta > 0.0)) throw domain_error("classify: theta must be positive");
        if (!(o.nu >= 0.0) || !(o.lambda >= 0.0)) throw domain_error("classify: nu and lambda must be nonnegative");
        if (!(o.floor >= 0.0)) throw domain_error("classify: floor must be nonnegative");
    }

    PiecewiseSolution run() {
        return P.shape() == PenaltyShape::Convex ? convex() : concave();
    }

    ThresholdSet ts;

    // Lp(x) = -nu D(theta - x) meets Rp(x) + c = U(x - theta) + c in one line.
    Tangency common_tangent(double c) const {
        auto rho = [&](double s) {
            const double g = P.inverse_reward_slope(s);
            const double d = P.inverse_penalty_slope(s / o.nu);
            return P.reward(g) + c + o.nu * P.penalty(d) - s * (g + d);
        };
        const double s = solve_slope(rho, "common tangent");
        return {o.theta - P.inverse_penalty_slope(s / o.nu), o.theta + P.inverse_reward_slope(s), s};
    }

    // Line through (px, py), px <= theta, tangent to Rp + c.
    Tangency tangent_from_point(double px, double py, double c) const {
        auto rho = [&](double s) {
            const double g = P.inverse_reward_slope(s);
            return P.reward(g) + c - py - s * (o.theta + g - px);
        };
        const double s = solve_slope(rho, "tangent to gain side");
        return {px, o.theta + P.inverse_reward_slope(s), s};
    }

    // Line through (L, pl) tangent to Lp at a point of [0, min(L, theta)).
    Tangency tangent_floor_to_loss(double pl) const {
        const double L = o.floor;
        auto rho = [&](double s) {
            const double d = P.inverse_penalty_slope(s / o.nu);
            return pl + o.nu * P.penalty(d) - s * (L - o.theta + d);
        };
        const double lo = L < o.theta ? o.nu * P.penalty_slope(o.theta - L) : slope_floor;
        const double hi = o.nu * P.penalty_slope(o.theta);
        const double s = solve_slope_between(rho, lo, hi, "tangent from floor to loss side");
        return {o.theta - P.inverse_penalty_slope(s / o.nu), L, s};
    }

    // Line through (L, pl), L > theta, tangent to Rp at a point of [theta, L).
    Tangency tangent_floor_to_gain(double pl) const {
        const double L = o.floor;
        auto rho = [&](double s) {
            const double g = P.inverse_reward_slope(s);
            return pl - P.reward(g) - s * (L - o.theta - g);
        };
        const double lo = P.reward_slope(L - o.theta);
        const double s = solve_slope_between(rho, lo, std::numeric_limits<double>::infinity(),
                                             "tangent from floor to gain side");
        return {L, o.theta + P.inverse_reward_slope(s), s};
    }

private:
    using K = BranchKind;
    const PreferencePair& P;
    LinearizedObjective o;

    double g(double x) const { return eval_f_nu(P, o, x); }

    PiecewiseSolution make(CaseLabel label, Variant variant, std::vector<std::pair<K, double>> starts) {
        std::vector<Branch> out;
        const double inf = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < starts.size(); ++i) {
            const double lo = i == 0 ? 0.0 : starts[i].second;
            const double hi = i + 1 < starts.size() ? starts[i + 1].second : inf;
            if (!(lo <= hi)) {
                // Allow rounding-level inversions between thresholds that coincide analytically.
                if (lo - hi <= 1e-12 * std::max(1.0, std::abs(hi))) continue;
                throw invariant_violation("classify: branch starts out of order in " + to_string(label));
            }
            if (lo == hi) continue;
            if (!out.empty() && out.back().kind == starts[i].first) {
                out.back().y_hi = hi;
                continue;
            }
            out.push_back({out.empty() ? 0.0 : out.back().y_hi, hi, starts[i].first});
        }
        if (out.empty() || out.back().kind != K::Zero)
            throw invariant_violation("classify: table must end with a Zero branch in " + to_string(label));
        return PiecewiseSolution(P, o, label, variant, std::move(out), ts);
    }

    PiecewiseSolution convex() {
        const double nu = o.nu, lam = o.lambda, th = o.theta, L = o.floor;
        const double kD = nu * P.penalty_slope(th);
        const double D_th = nu == 0.0 ? 0.0 : nu * P.penalty(th);
        std::optional<Tangency> t12;
        if (nu > 0.0) {
            t12 = common_tangent(0.0);
            ts.z1 = t12->left;
            ts.z2 = t12->right;
        }
        if (lam == 0.0 || L <= 0.0) {
            const Variant v = lam == 0.0 ? Variant::Standard : Variant::FloorInactive;
            if (t12 && t12->left >= 0.0)
                return make(CaseLabel::ConvexI, v, {{K::Gain, 0}, {K::Loss, t12->slope}, {K::Zero, kD}});
            const auto tp = tangent_from_point(0.0, -D_th, 0.0);
            ts.z_prime = tp.right;
            return make(CaseLabel::ConvexII, v, {{K::Gain, 0}, {K::Zero, tp.slope}});
        }
        const double k = (g(L) + lam + D_th) / L;
        ts.k = k;

        auto case_vi = [&](Variant v) {
            const auto t5 = tangent_from_point(0.0, -D_th, lam);
            ts.z5 = t5.right;
            return make(CaseLabel::ConvexVI, v, {{K::Gain, 0}, {K::Zero, t5.slope}});
        };
        auto case_x = [&](Variant v) {
            const auto t9 = tangent_from_point(0.0, -D_th, lam);
            ts.z9 = t9.right;
            return make(CaseLabel::ConvexX, v, {{K::Gain, 0}, {K::Zero, t9.slope}});
        };

        if (t12 && L < t12->left) {
            const double sLm = nu * P.penalty_slope(th - L);
            if (k > kD)
                return make(CaseLabel::ConvexIII, Variant::Standard,
                            {{K::Gain, 0}, {K::Loss, t12->slope}, {K::Floor, sLm}, {K::Zero, k}});
            const auto t3 = tangent_floor_to_loss(g(L) + lam);
            ts.z3 = t3.left;
            return make(CaseLabel::ConvexIV, Variant::Standard,
                        {{K::Gain, 0}, {K::Loss, t12->slope}, {K::Floor, sLm}, {K::Loss, t3.slope}, {K::Zero, kD}});
        }

        if (L < th) {
            const auto t4 = tangent_from_point(L, g(L), 0.0);
            ts.z4 = t4.right;
            if (k > kD) {
                if (k > t4.slope)
                    return make(CaseLabel::ConvexV, Variant::Standard,
                                {{K::Gain, 0}, {K::Floor, t4.slope}, {K::Zero, k}});
                return case_vi(Variant::Standard);
            }
            const auto t3 = tangent_floor_to_loss(g(L) + lam);
            ts.z3 = t3.left;
            if (t3.slope > t4.slope)
                return make(CaseLabel::ConvexVII, Variant::Standard,
                            {{K::Gain, 0}, {K::Floor, t4.slope}, {K::Loss, t3.slope}, {K::Zero, kD}});
            const auto t67 = common_tangent(lam);
            ts.z6 = t67.left;
            ts.z7 = t67.right;
            if (t67.left <= 0.0) return case_vi(Variant::TangentBelowZero);
            return make(CaseLabel::ConvexVIII, Variant::Standard,
                        {{K::Gain, 0}, {K::Loss, t67.slope}, {K::Zero, kD}});
        }

        if (L == th) {
            if (nu == 0.0) return case_vi(Variant::FloorAtReference);
            const auto t = common_tangent(lam);
            ts.z6p = t.left;
            ts.z7p = t.right;
            if (t.left <= 0.0) return case_vi(Variant::FloorAtReferenceBelowZero);
            return make(CaseLabel::ConvexVIII, Variant::FloorAtReference,
                        {{K::Gain, 0}, {K::Loss, t.slope}, {K::Zero, kD}});
        }

        // L > theta
        const double sL = P.reward_slope(L - th);
        const auto t8 = tangent_floor_to_gain(P.reward(L - th) + lam);
        ts.z8 = t8.right;
        if (k > kD) {
            if (k < sL) return case_x(Variant::Standard);
            if (k < t8.slope)
                return make(CaseLabel::ConvexIX, Variant::Standard,
                            {{K::Gain, 0}, {K::Floor, sL}, {K::Zero, k}});
            const auto t10 = tangent_from_point(0.0, -D_th, 0.0);
            ts.z10 = t10.right;
            return make(CaseLabel::ConvexXI, Variant::Standard,
                        {{K::Gain, 0}, {K::Floor, sL}, {K::Gain, t8.slope}, {K::Zero, t10.slope}});
        }
        const auto t11 = tangent_floor_to_loss(P.reward(L - th) + lam);
        ts.z11 = t11.left;
        if (sL > t11.slope) {
            const auto t = common_tangent(lam);
            ts.z12 = t.left;
            ts.z13 = t.right;
            if (t.left <= 0.0) return case_x(Variant::TangentBelowZero);
            return make(CaseLabel::ConvexXIV, Variant::Standard,
                        {{K::Gain, 0}, {K::Loss, t.slope}, {K::Zero, kD}});
        }
        if (t8.slope > t11.slope)
            return make(CaseLabel::ConvexXII, Variant::Standard,
                        {{K::Gain, 0}, {K::Floor, sL}, {K::Loss, t11.slope}, {K::Zero, kD}});
        if (t12->left < 0.0) {
            // The loss-side tangency falls left of 0: the lower gain region ends at the
            // tangent from the origin, which is the Case XI form.
            const auto t10 = tangent_from_point(0.0, -D_th, 0.0);
            ts.z10 = t10.right;
            return make(CaseLabel::ConvexXI, Variant::TangentBelowZero,
                        {{K::Gain, 0}, {K::Floor, sL}, {K::Gain, t8.slope}, {K::Zero, t10.slope}});
        }
        return make(CaseLabel::ConvexXIII, Variant::Standard,
                    {{K::Gain, 0}, {K::Floor, sL}, {K::Gain, t8.slope}, {K::Loss, t12->slope}, {K::Zero, kD}});
    }

    PiecewiseSolution concave() {
        const double nu = o.nu, lam = o.lambda, th = o.theta, L = o.floor;
        const double D_th = nu == 0.0 ? 0.0 : nu * P.penalty(th);
        const auto tz = tangent_from_point(0.0, -D_th, 0.0);
        ts.z = tz.right;
        if (L <= 0.0)
            return make(CaseLabel::ConcaveVI, Variant::FloorInactive, {{K::Gain, 0}, {K::Zero, tz.slope}});
        const double k = (g(L) + lam + D_th) / L;
        ts.k = k;
        auto gain_zero = [&](CaseLabel label, std::optional<double>& slot) {
            const auto t = tangent_from_point(0.0, -D_th, lam);
            slot = t.right;
            return make(label, Variant::Standard, {{K::Gain, 0}, {K::Zero, t.slope}});
        };
        // L >= z compared through slopes: z can round to theta when nu D(theta) is large.
        if (L > th && P.reward_slope(L - th) <= tz.slope) {
            const double sL = P.reward_slope(L - th);
            if (k > tz.slope)
                return make(CaseLabel::ConcaveI, Variant::Standard, {{K::Gain, 0}, {K::Floor, sL}, {K::Zero, k}});
            double s0 = sL;
            if (lam > 0.0) {
                const auto t0 = tangent_floor_to_gain(P.reward(L - th) + lam);
                s0 = t0.slope;
                ts.L0 = t0.right;
            } else {
                ts.L0 = L;
            }
            return make(CaseLabel::ConcaveII, Variant::Standard,
                        {{K::Gain, 0}, {K::Floor, sL}, {K::Gain, s0}, {K::Zero, tz.slope}});
        }
        if (L >= th) {
            const double sL = L == th ? std::numeric_limits<double>::infinity() : P.reward_slope(L - th);
            if (k >= sL)
                return make(CaseLabel::ConcaveIII, Variant::Standard, {{K::Gain, 0}, {K::Floor, sL}, {K::Zero, k}});
            return gain_zero(CaseLabel::ConcaveIV, ts.z_tilde0);
        }
        const auto th_ = tangent_from_point(L, g(L), 0.0);
        ts.z_hat = th_.right;
        if (k > th_.slope)
            return make(CaseLabel::ConcaveV, Variant::Standard, {{K::Gain, 0}, {K::Floor, th_.slope}, {K::Zero, k}});
        return gain_zero(CaseLabel::ConcaveVI, ts.z_hat0);
    }
};

}  // namespace detail

inline PiecewiseSolution classify_and_solve(const LinearizedObjective& obj, const PreferencePair& pair) {
    detail::Classifier c(pair, obj);
    return c.run();
}

inline ThresholdSet thresholds(const LinearizedObjective& obj, const PreferencePair& pair) {
    return classify_and_solve(obj, pair).thresholds();
}

// Objective f(x) - y x of the pointwise problem.
inline double pointwise_objective(const PreferencePair& pair, const LinearizedObjective& obj, double x, double y) {
    return eval_f(pair, obj, x) - y * x;
}

// Largest objective mismatch between the two branches meeting at each breakpoint.
inline double max_breakpoint_gap(const PiecewiseSolution& sol) {
    double worst = 0.0;
    const auto& br = sol.branches();
    // A branch limit that lands on L or 0 up to rounding takes the exact value,
    // so the floor indicator is evaluated on the correct side.
    auto snap = [&](double x) {
        const double L = sol.objective().floor;
        if (std::abs(x - L) <= 1e-12 * std::max(1.0, L)) return L;
        if (std::abs(x) <= 1e-12) return 0.0;
        return x;
    };
    for (std::size_t i = 1; i < br.size(); ++i) {
        const double y = br[i].y_lo;
        const double xl = snap(sol.value(br[i - 1].kind, y));
        const double xr = snap(sol.value(br[i].kind, y));
        const double a = pointwise_objective(sol.pair(), sol.objective(), xl, y);
        const double b = pointwise_objective(sol.pair(), sol.objective(), xr, y);
        worst = std::max(worst, std::abs(a - b));
    }
    return worst;
}

}  // namespace omega
