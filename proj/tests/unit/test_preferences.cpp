#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "omega/preferences.hpp"

using namespace omega;

namespace {

bool contains(const std::vector<Assumption>& v, Assumption a) { return std::find(v.begin(), v.end(), a) != v.end(); }

PreferencePair general_power(double g1, double g2, double A) {
    return PreferencePair::general([g1](double x) { return std::pow(x, g1); },
                                   [g2, A](double x) { return A * std::pow(x, g2); },
                                   g2 > 1.0 ? PenaltyShape::Convex : PenaltyShape::Concave);
}

}  // namespace

TEST(Validate, BaselinePairPasses) {
    EXPECT_TRUE(validate(PreferencePair::power(0.3, 2.2, 1.0)).empty());
}

TEST(Validate, ConvexRewardViolatesH3) {
    EXPECT_TRUE(contains(validate(PreferencePair::power(1.5, 2.2, 1.0)), Assumption::H3));
}

TEST(Validate, LinearRewardViolatesH2) {
    EXPECT_TRUE(contains(validate(PreferencePair::power(1.0, 2.2, 1.0)), Assumption::H2));
}

TEST(Validate, SampledChecksOnGeneralPair) {
    EXPECT_TRUE(validate(general_power(0.3, 2.2, 1.0)).empty());
    const auto lin = PreferencePair::general([](double x) { return x; }, [](double x) { return x * x; },
                                             PenaltyShape::Convex);
    EXPECT_TRUE(contains(validate(lin), Assumption::H2));
    const auto convex = general_power(1.5, 2.0, 1.0);
    EXPECT_TRUE(contains(validate(convex), Assumption::H3));
}

TEST(EvalF, ZeroAtReference) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.0);
    EXPECT_EQ(eval_f(P, {1.0, 0.0, 6.0, 6.5}, 6.0), 0.0);
}

TEST(EvalF, UnitGain) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.0);
    EXPECT_DOUBLE_EQ(eval_f(P, {1.0, 0.0, 6.0, 6.5}, 7.0), 1.0);
}

TEST(EvalF, GainBelowFloorEarnsNoBonus) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.0);
    const double v = eval_f(P, {1.0, 0.5, 6.0, 6.5}, 6.2);
    // 0.2^0.3 = exp(0.3 ln 0.2)
    EXPECT_NEAR(v, 0.61703386, 1e-8);
    EXPECT_NEAR(v, std::pow(0.2, 0.3), 1e-15);
}

TEST(EvalF, BonusAtReferenceWhenFloorBelow) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.0);
    EXPECT_EQ(eval_f(P, {2.0, 0.7, 6.0, 5.0}, 6.0), 0.7);
    EXPECT_EQ(eval_f(P, {2.0, 0.7, 6.0, 6.5}, 6.0), 0.0);
}

TEST(EvalF, NegativeInputThrows) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.0);
    EXPECT_THROW(eval_f(P, {1.0, 0.0, 6.0, 6.5}, -1e-3), domain_error);
}

TEST(EvalF, BonusDifferenceIsZeroOrLambda) {
    const auto P = PreferencePair::power(0.4, 1.8, 2.0);
    const LinearizedObjective o{3.0, 1.7, 5.0, 4.0};
    LinearizedObjective o0 = o;
    o0.lambda = 0.0;
    for (double x = 0.0; x < 12.0; x += 0.01) {
        const double d = eval_f(P, o, x) - eval_f(P, o0, x);
        EXPECT_TRUE(d == 0.0 || std::abs(d - o.lambda) <= 1e-12 * std::max(1.0, std::abs(eval_f(P, o0, x)))) << x;
        EXPECT_EQ(eval_f(P, o0, x), eval_f_nu(P, o, x));
    }
}

TEST(EvalF, MonotoneAboveReferenceAndInLambda) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.0);
    const LinearizedObjective o{2.0, 0.5, 6.0, 6.5};
    double prev = eval_f(P, o, o.theta);
    for (double x = o.theta; x < 20.0; x += 0.01) {
        const double cur = eval_f(P, o, x);
        EXPECT_GE(cur, prev);
        prev = cur;
    }
    for (double x = 0.0; x < 10.0; x += 0.05) {
        double prev_l = -1e300;
        for (double lam : {0.0, 0.1, 1.0, 10.0}) {
            const double cur = eval_f(P, {2.0, lam, 6.0, 6.5}, x);
            EXPECT_GE(cur, prev_l);
            prev_l = cur;
        }
    }
}

TEST(EvalF, PenaltyCurvatureSign) {
    for (double g2 : {2.2, 0.5}) {
        const auto P = PreferencePair::power(0.3, g2, 1.0);
        const LinearizedObjective o{1.5, 0.0, 6.0, 0.0};
        const double h = 0.01;
        for (double x = h; x + h < o.theta; x += 0.05) {
            const double second = eval_f(P, o, x + h) - 2.0 * eval_f(P, o, x) + eval_f(P, o, x - h);
            // -nu D(theta - x) is concave on [0, theta] for convex D and convex for concave D.
            if (g2 > 1.0)
                EXPECT_LE(second, 1e-12) << x;
            else
                EXPECT_GE(second, -1e-12) << x;
        }
    }
}

TEST(InverseMarginals, UnitPoints) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.7);
    const auto [i1, i2] = inverse_marginals(P, 0.3);
    EXPECT_NEAR(i1, 1.0, 1e-14);
    (void)i2;
    EXPECT_NEAR(inverse_marginals(P, 1.7 * 2.2).second, 1.0, 1e-14);
}

TEST(InverseMarginals, ClosedFormValue) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.0);
    const double i1 = P.inverse_reward_slope(0.6);
    EXPECT_NEAR(i1, std::pow(2.0, -10.0 / 7.0), 1e-14);
    EXPECT_NEAR(i1, 0.3715, 1e-4);
    EXPECT_NEAR(general_power(0.3, 2.2, 1.0).inverse_reward_slope(0.6), i1, 1e-10);
}

TEST(InverseMarginals, NonPositiveThrows) {
    const auto P = PreferencePair::power(0.3, 2.2, 1.0);
    EXPECT_THROW(P.inverse_reward_slope(0.0), domain_error);
    EXPECT_THROW(P.inverse_penalty_slope(-1.0), domain_error);
}

TEST(InverseMarginals, RoundTripOnLogGrid) {
    for (const auto& P : {PreferencePair::power(0.3, 2.2, 1.0), PreferencePair::power(0.8, 1.3, 0.4),
                          PreferencePair::power(0.1, 3.0, 5.0)}) {
        for (int i = 0; i <= 120; ++i) {
            const double x = std::pow(10.0, -6.0 + 0.1 * i);
            EXPECT_NEAR(P.inverse_reward_slope(P.reward_slope(x)), x, 1e-10 * x);
            EXPECT_NEAR(P.inverse_penalty_slope(P.penalty_slope(x)), x, 1e-10 * x);
        }
    }
}

TEST(InverseMarginals, GeneralFamilyByBisection) {
    const auto P = general_power(0.5, 2.0, 1.0);
    for (int i = 0; i <= 40; ++i) {
        const double x = std::pow(10.0, -2.0 + 0.1 * i);
        const double y = P.reward_slope(x);
        EXPECT_NEAR(P.inverse_reward_slope(y), x, 1e-6 * x);
        EXPECT_NEAR(P.inverse_penalty_slope(P.penalty_slope(x)), x, 1e-6 * x);
    }
}

TEST(PreferencePair, PowerShapeFollowsGamma2) {
    EXPECT_EQ(PreferencePair::power(0.3, 2.2).shape(), PenaltyShape::Convex);
    EXPECT_EQ(PreferencePair::power(0.3, 0.5).shape(), PenaltyShape::Concave);
    EXPECT_THROW(PreferencePair::power(0.0, 2.0), std::invalid_argument);
}
