#include <gtest/gtest.h>

#include <cmath>

#include "budgetab/design.hpp"
#include "budgetab/error.hpp"
#include "budgetab/estimators.hpp"
#include "budgetab/sampling.hpp"
#include "enumeration.hpp"
#include "test_support.hpp"

using namespace budgetab;

namespace {

const AllocationMatrix kW1{{1, 0}, {0, 1}};
const AllocationMatrix kW0{{0, 1}, {1, 0}};

}  // namespace

TEST(HtEstimator, NothingObservedIsZero) {
    EXPECT_EQ(ht_estimator(Matrix(2, 2), kW1, kW0, Matrix(2, 2, 0.5)), 0.0);
}

TEST(HtEstimator, SingleTreatmentObservation) {
    const Matrix obs{{2.0, 0.0}, {0.0, 0.0}};
    EXPECT_DOUBLE_EQ(ht_estimator(obs, kW1, kW0, Matrix(2, 2, 0.5)), 4.0);
}

TEST(HtEstimator, ConsistentEdgesCancel) {
    const AllocationMatrix w{{1, 0}};
    EXPECT_EQ(ht_estimator(Matrix{{3.0, 0.0}}, w, w, Matrix{{0.4, 0.0}}), 0.0);
}

TEST(HtEstimator, ZeroProbabilityWithObservationThrows) {
    const Matrix obs{{2.0, 0.0}, {0.0, 0.0}};
    try {
        (void)ht_estimator(obs, kW1, kW0, Matrix(2, 2, 0.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::inconsistent_input);
    }
}

TEST(HtEstimator, ZeroOverZeroSkipped) {
    EXPECT_EQ(ht_estimator(Matrix(2, 2), kW1, kW0, Matrix(2, 2, 0.0)), 0.0);
}

TEST(PluginEstimator, EqualsHtWhenProbabilitiesEqualDesign) {
    auto rng = make_rng(61, {});
    for (int t = 0; t < 20; ++t) {
        const auto inst = fixtures::random_instance(rng, 8, 3);
        const auto x = fixtures::random_support_design(rng, inst);
        Matrix obs(8, 3);
        for (auto& v : obs.data()) v = fixtures::pick(rng, 2) ? fixtures::uniform(rng, 0, 2) : 0.0;
        EXPECT_EQ(plugin_estimator(obs, inst.w1, inst.w0, x), ht_estimator(obs, inst.w1, inst.w0, x));
    }
}

TEST(HajekEstimator, UndefinedWhenArmEmpty) {
    const Matrix obs{{2.0, 0.0}, {0.0, 0.0}};
    const auto h = hajek_estimator(obs, kW1, kW0, Matrix(2, 2, 0.5), Matrix(2, 2, 1.0));
    EXPECT_FALSE(h.defined);
}

TEST(HajekEstimator, SelfNormalizedValue) {
    const Matrix obs{{2.0, 3.0}, {0.0, 0.0}};
    const Matrix p(2, 2, 0.5);
    // Arm 1: m * (2/0.5 / (0.5*2))^-1... normalizer sum o/(p u) with u = o.
    const auto h = hajek_estimator(obs, kW1, kW0, p, obs);
    ASSERT_TRUE(h.defined);
    const double t1 = 2.0 * (2.0 / 0.5) / (2.0 / (0.5 * 2.0));
    const double t0 = 2.0 * (3.0 / 0.5) / (3.0 / (0.5 * 3.0));
    EXPECT_DOUBLE_EQ(h.value, t1 - t0);
}

TEST(HtEstimator, UnbiasedByExactEnumeration) {
    auto rng = make_rng(62, {});
    int checked = 0;
    for (int t = 0; t < 30; ++t) {
        const std::size_t m = 1 + fixtures::pick(rng, 3);
        const std::size_t n = 1 + fixtures::pick(rng, 2);
        auto inst = fixtures::random_two_point_instance(rng, m, n);
        for (auto& b : inst.budgets) b *= fixtures::uniform(rng, 0.5, 1.0);
        const auto x = fixtures::random_support_design(rng, inst);
        for (bool random_order : {false, true}) {
            const auto p = fixtures::exact_inclusion(inst, x, random_order);
            bool positive = true;
            for (std::size_t k = 0; k < x.data().size(); ++k) positive &= x.data()[k] == 0.0 || p.data()[k] > 0.0;
            if (!positive) continue;  // an edge costing more than its budget is never observed
            ++checked;
            const double mean = fixtures::exact_expectation(
                inst, x, random_order, [&](const Matrix& obs) { return ht_estimator(obs, inst.w1, inst.w0, p); });
            EXPECT_NEAR(mean, expected_tte(inst), 1e-10);
        }
    }
    EXPECT_GT(checked, 30);
}

TEST(PluginEstimator, UnbiasedWithoutThrottling) {
    auto rng = make_rng(63, {});
    for (int t = 0; t < 20; ++t) {
        auto inst = fixtures::random_two_point_instance(rng, 3, 2);
        fixtures::make_budgets_slack(inst);
        const auto x = fixtures::random_support_design(rng, inst);
        const double mean = fixtures::exact_expectation(
            inst, x, true, [&](const Matrix& obs) { return plugin_estimator(obs, inst.w1, inst.w0, x); });
        EXPECT_NEAR(mean, expected_tte(inst), 1e-10);
    }
}

TEST(VarianceClosedForm, MatchesExactEnumerationWhenRowsDisagree) {
    auto rng = make_rng(64, {});
    int checked = 0;
    for (int t = 0; t < 200; ++t) {
        auto inst = fixtures::random_two_point_instance(rng, 3, 2);
        bool disagree = true;
        for (std::size_t i = 0; i < 3; ++i) disagree &= inst.w1.buyer(i) != inst.w0.buyer(i);
        if (!disagree) continue;
        ++checked;
        fixtures::make_budgets_slack(inst);
        const auto x = fixtures::random_support_design(rng, inst);
        const double tau = expected_tte(inst);
        const double var = fixtures::exact_expectation(inst, x, false, [&](const Matrix& obs) {
            const double e = plugin_estimator(obs, inst.w1, inst.w0, x) - tau;
            return e * e;
        });
        EXPECT_NEAR(variance_closed_form(inst, x), var, 1e-9 * std::max(1.0, var));
    }
    EXPECT_GT(checked, 10);
}

TEST(MseUpperBound, DominatesExactMseUnderThrottling) {
    auto rng = make_rng(65, {});
    for (int t = 0; t < 20; ++t) {
        auto inst = fixtures::random_two_point_instance(rng, 3, 2);
        for (auto& b : inst.budgets) b *= fixtures::uniform(rng, 0.4, 1.0);
        const auto x = fixtures::random_support_design(rng, inst);
        const double tau = expected_tte(inst);
        const double mse = fixtures::exact_expectation(inst, x, true, [&](const Matrix& obs) {
            const double e = plugin_estimator(obs, inst.w1, inst.w0, x) - tau;
            return e * e;
        });
        EXPECT_LE(mse, mse_upper_bound(inst, x) * (1 + 1e-12));
    }
}

TEST(MseUpperBound, Formula) {
    ProblemInstance inst;
    inst.costs = Matrix{{1.0, 1.0}};
    inst.budgets = {1.0, 1.0};
    inst.w1 = AllocationMatrix{{1, 0}};
    inst.w0 = AllocationMatrix{{0, 1}};
    inst.utility = UtilityModel::fixed(Matrix{{2.0, 1.0}});
    const Matrix x{{0.5, 0.5}};
    EXPECT_DOUBLE_EQ(mse_upper_bound(inst, x), 4.0 / 0.5 + 1.0 / 0.5 + 4.0 + 1.0);
    // Variance: outcomes +4 or -2 with equal odds around tau = 1.
    EXPECT_DOUBLE_EQ(variance_closed_form(inst, x), 9.0);
}
