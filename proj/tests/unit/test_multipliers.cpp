#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "golden.hpp"
#include "lognormal.hpp"
#include "oracle.hpp"

using namespace omega;
using namespace omega::testing;

namespace {

const Golden& case_iv() {
    static const Golden g = make_golden("theta7", 0.3, 2.2, 7.0, 6.5, 0.01, 0.5);
    return g;
}

const SolverResult& case_iv_result() {
    static const SolverResult r = solve_nu(case_iv().problem());
    return r;
}

void expect_moments_near(const Moments& a, const Moments& b, double rel) {
    auto near = [&](double x, double y, const char* what) {
        EXPECT_NEAR(x, y, rel * std::max(1.0, std::abs(y))) << what;
    };
    near(a.budget, b.budget, "budget");
    near(a.prob_floor, b.prob_floor, "prob_floor");
    near(a.reward, b.reward, "reward");
    near(a.penalty, b.penalty, "penalty");
}

}  // namespace

TEST(Quadrature, RejectsTooFewNodes) {
    QuadratureSpec q{32, true};
    EXPECT_THROW(q.validate(), std::invalid_argument);
    EXPECT_NO_THROW(QuadratureSpec{}.validate());
}

TEST(Moments, MatchLognormalClosedForm) {
    const auto pb = case_iv().problem();
    for (double nu : {0.5, 2.0, 20.0})
        for (double lam : {0.0, 0.3, 5.0})
            for (double beta : {0.05, 0.5, 3.0}) {
                const auto sol = classify_and_solve(pb.objective(nu, lam), pb.pair);
                expect_moments_near(moments(pb.law, sol, beta, pb.quad), lognormal_moments(pb.law, sol, beta), 1e-9);
            }
}

TEST(Moments, MatchClosedFormOnEveryGoldenScenario) {
    for (const auto& g : golden_scenarios()) {
        const auto pb = g.problem();
        for (double nu : {0.3, 3.0})
            for (double lam : {0.0, 1.0}) {
                const auto sol = classify_and_solve(pb.objective(nu, lam), pb.pair);
                SCOPED_TRACE(g.name + " " + to_string(sol.label()));
                expect_moments_near(moments(pb.law, sol, 0.7, pb.quad), lognormal_moments(pb.law, sol, 0.7), 1e-9);
            }
    }
}

TEST(Moments, ConstantFloorBranchBudget) {
    // Floor on [y_lo, y_hi) contributes L E[H 1{...}], checked against a hand-built two-branch table.
    const auto pb = case_iv().problem();
    const auto sol = classify_and_solve(pb.objective(1.0, 50.0), pb.pair);
    bool has_floor = false;
    for (const auto& b : sol.branches()) has_floor |= b.kind == BranchKind::Floor;
    ASSERT_TRUE(has_floor);
    double acc = 0.0;
    for (const auto& b : sol.branches())
        if (b.kind == BranchKind::Floor) acc += pb.floor * partial_power(pb.law, 1.0, 1.0, b.y_lo, b.y_hi);
    double quad = 0.0;
    detail::integrate(pb.law, sol, 1.0, pb.quad, [&](double w, double H, double x, BranchKind k) {
        if (k == BranchKind::Floor) quad += w * H * x;
    });
    EXPECT_NEAR(quad, acc, 1e-10 * acc);
}

TEST(Moments, QuadratureConverged) {
    const auto pb = case_iv().problem();
    const auto sol = classify_and_solve(pb.objective(2.0, 0.5), pb.pair);
    expect_moments_near(moments(pb.law, sol, 0.4, {400, true}), moments(pb.law, sol, 0.4, {3200, true}), 1e-11);
}

TEST(Budget, VanishesForHugeMultiplier) {
    const auto pb = case_iv().problem();
    const auto sol = classify_and_solve(pb.objective(2.0, 0.5), pb.pair);
    EXPECT_LT(budget_R(pb.law, sol, 1e8, pb.quad), 1e-6);
}

TEST(Budget, DecreasingInBeta) {
    const auto pb = case_iv().problem();
    const auto sol = classify_and_solve(pb.objective(2.0, 0.5), pb.pair);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = -20; k <= 20; ++k) {
        const double R = budget_R(pb.law, sol, std::pow(2.0, k), pb.quad);
        EXPECT_LE(R, prev);
        prev = R;
    }
}

TEST(VarS, FloorAtZeroIsCertain) {
    auto pb = case_iv().problem();
    pb.floor = 0.0;
    const auto sol = classify_and_solve(pb.objective(2.0, 0.0), pb.pair);
    EXPECT_EQ(var_S(pb.law, sol, 1.0), 1.0);
}

TEST(VarS, ExactFormAgreesWithIndicatorQuadrature) {
    const auto pb = case_iv().problem();
    for (double lam : {0.0, 0.1, 1.0, 10.0}) {
        const auto sol = classify_and_solve(pb.objective(2.0, lam), pb.pair);
        for (double beta : {0.1, 0.6, 2.0})
            EXPECT_NEAR(var_S(pb.law, sol, beta), var_S_quadrature(pb.law, sol, beta, pb.quad), 1e-10);
    }
}

TEST(VarS, NondecreasingInLambda) {
    const auto pb = case_iv().problem();
    double prev = 0.0;
    for (int j = 0; j < lambda_grid_points; ++j) {
        const auto sol = classify_and_solve(pb.objective(2.0, lambda_grid(j)), pb.pair);
        const double S = var_S(pb.law, sol, 0.6);
        EXPECT_GE(S, prev - 1e-14);
        prev = S;
    }
}

TEST(Beta, BracketsBudget) {
    const auto pb = case_iv().problem();
    for (double lam : {0.0, 0.5, 5.0}) {
        const auto sol = classify_and_solve(pb.objective(2.0, lam), pb.pair);
        const auto beta = solve_beta(pb.law, sol, pb.x0_tilde, pb.quad);
        ASSERT_TRUE(beta);
        EXPECT_NEAR(budget_R(pb.law, sol, *beta, pb.quad), pb.x0_tilde, 1e-9 * pb.x0_tilde);
        EXPECT_GE(budget_R(pb.law, sol, *beta / 2.0, pb.quad), pb.x0_tilde);
        EXPECT_LE(budget_R(pb.law, sol, *beta * 2.0, pb.quad), pb.x0_tilde);
    }
}

TEST(Beta, ContinuousInLambda) {
    const auto pb = case_iv().problem();
    auto beta_at = [&](double lam) {
        return *solve_beta(pb.law, classify_and_solve(pb.objective(2.0, lam), pb.pair), pb.x0_tilde, pb.quad);
    };
    for (double lam : {0.2, 1.0, 3.0}) EXPECT_NEAR(beta_at(lam), beta_at(lam * (1.0 + 1e-7)), 1e-5 * beta_at(lam));
}

TEST(Beta, RejectsNonpositiveBudget) {
    const auto pb = case_iv().problem();
    const auto sol = classify_and_solve(pb.objective(2.0, 0.0), pb.pair);
    EXPECT_THROW(solve_beta(pb.law, sol, 0.0, pb.quad), domain_error);
}

TEST(Lambda, GridEndpoints) {
    EXPECT_DOUBLE_EQ(lambda_grid(0), 1e-6);
    EXPECT_DOUBLE_EQ(lambda_grid(lambda_grid_points - 1), 1e6);
    EXPECT_EQ(lambda_grid_count(0.5), lambda_grid_points);
    EXPECT_EQ(lambda_grid_count(1.0), lambda_grid_points);
    EXPECT_GE(lambda_grid(lambda_grid_count(1e3) - 1), 1e9 * (1.0 - 1e-9));
}

TEST(Lambda, GridReachesLargePenaltyWeights) {
    const auto pb = golden_scenarios()[0].problem();
    for (double nu : {1e4, 1e6}) {
        const auto r = solve_lambda(pb, nu);
        ASSERT_EQ(r.verdict, Existence::Solved) << nu;
        EXPECT_GE(r.inner->moments.prob_floor, 1.0 - pb.eps - 1e-8);
    }
}

TEST(Lambda, NoConstraintMeansZeroMultiplier) {
    auto pb = case_iv().problem();
    pb.eps = 1.0;
    const auto r = solve_lambda(pb, 2.0);
    ASSERT_EQ(r.verdict, Existence::Solved);
    EXPECT_EQ(r.inner->lambda, 0.0);
}

TEST(Lambda, ComplementarySlackness) {
    const auto pb = case_iv().problem();
    for (double nu : {0.5, 2.0, 10.0}) {
        const auto r = solve_lambda(pb, nu);
        ASSERT_EQ(r.verdict, Existence::Solved);
        const double gap = r.inner->moments.prob_floor - (1.0 - pb.eps);
        EXPECT_GE(gap, -1e-8);
        EXPECT_LE(std::abs(r.inner->lambda * gap), 1e-8);
    }
}

TEST(Lambda, VarInfeasibleBelowLowerBound) {
    auto g = case_iv();
    const auto f = feasibility(g.market, g.theta, g.floor, g.eps);
    auto pb = g.problem();
    pb.x0_tilde = 0.8 * f.lower;
    const auto r = solve_lambda(pb, 2.0);
    EXPECT_EQ(r.verdict, Existence::VarInfeasible);
    ASSERT_TRUE(r.p);
    EXPECT_LT(*r.p, 1.0 - pb.eps);
    EXPECT_EQ(solve_nu(pb).verdict, Existence::VarInfeasible);
}

TEST(ValueFunction, PositiveAtZero) {
    const auto r = solve_lambda(case_iv().problem(), 0.0);
    ASSERT_EQ(r.verdict, Existence::Solved);
    EXPECT_GT(r.inner->moments.value(0.0), 0.0);
}

TEST(ValueFunction, NonincreasingAndConvex) {
    const auto pb = case_iv().problem();
    std::vector<double> nus, vs;
    for (double nu = 0.5; nu <= 8.0; nu += 0.5) {
        const auto r = solve_lambda(pb, nu);
        ASSERT_EQ(r.verdict, Existence::Solved);
        nus.push_back(nu);
        vs.push_back(r.inner->moments.value(nu));
    }
    for (std::size_t i = 1; i < vs.size(); ++i) EXPECT_LT(vs[i], vs[i - 1]);
    for (std::size_t i = 1; i + 1 < vs.size(); ++i) EXPECT_GE(vs[i - 1] - 2.0 * vs[i] + vs[i + 1], -1e-7);
}

TEST(Solver, ResidualsAtOptimum) {
    const auto& r = case_iv_result();
    ASSERT_EQ(r.verdict, Existence::Solved);
    EXPECT_LE(r.residuals.budget, 1e-9);
    EXPECT_LE(r.residuals.value, 1e-8);
    EXPECT_LE(r.residuals.slack, 1e-8);
    EXPECT_GE(r.residuals.var_gap, -1e-8);
    EXPECT_FALSE(r.nu_fixed);
}

TEST(Solver, OmegaRatioEqualsNu) {
    const auto& r = case_iv_result();
    ASSERT_EQ(r.verdict, Existence::Solved);
    EXPECT_NEAR(r.moments.reward / r.moments.penalty, r.nu, 1e-6 * r.nu);
}

TEST(Solver, FeasibleCompetitorsDoNotBeatOptimum) {
    const auto pb = case_iv().problem();
    const auto& opt = case_iv_result();
    ASSERT_EQ(opt.verdict, Existence::Solved);
    int checked = 0;
    for (double fn : {0.3, 0.7, 0.9, 1.1, 1.5, 3.0})
        for (double lam : {0.0, opt.lambda, 2.0 * opt.lambda + 0.1, 10.0, 100.0}) {
            const auto in = solve_inner(pb, fn * opt.nu, lam);
            ASSERT_TRUE(in);
            if (in->moments.prob_floor < 1.0 - pb.eps) continue;
            ++checked;
            EXPECT_LE(in->moments.reward / in->moments.penalty, opt.nu * (1.0 + 1e-9)) << fn << " " << lam;
        }
    EXPECT_GT(checked, 5);
}

TEST(Solver, MonteCarloAgreement) {
    const auto pb = case_iv().problem();
    const auto& r = case_iv_result();
    const auto mc = monte_carlo_moments(pb.law, *r.solution, r.beta, 1u << 21, 7);
    EXPECT_NEAR(mc.budget.mean, r.moments.budget, 4.0 * mc.budget.se);
    EXPECT_NEAR(mc.prob_floor.mean, r.moments.prob_floor, 4.0 * mc.prob_floor.se);
    EXPECT_NEAR(mc.reward.mean, r.moments.reward, 4.0 * mc.reward.se);
    EXPECT_NEAR(mc.penalty.mean, r.moments.penalty, 4.0 * mc.penalty.se);
}

TEST(Solver, FixedNuSkipsOuterLoop) {
    const auto pb = case_iv().problem();
    const auto r = solve_fixed_nu(pb, 1.0);
    ASSERT_EQ(r.verdict, Existence::Solved);
    EXPECT_TRUE(r.nu_fixed);
    EXPECT_EQ(r.nu_evaluations, 1);
    EXPECT_EQ(r.nu, 1.0);
}

TEST(Solver, Deterministic) {
    const auto pb = case_iv().problem();
    const auto a = solve_nu(pb), b = solve_nu(pb);
    EXPECT_EQ(a.nu, b.nu);
    EXPECT_EQ(a.lambda, b.lambda);
    EXPECT_EQ(a.beta, b.beta);
}
