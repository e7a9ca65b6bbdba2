#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "budgetab/error.hpp"
#include "budgetab/model.hpp"
#include "budgetab/sampling.hpp"
#include "test_support.hpp"

using namespace budgetab;

namespace {

bool mentions(const ValidationReport& report, std::string_view needle) {
    return std::ranges::any_of(report, [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

ProblemInstance two_by_two() {
    ProblemInstance inst;
    inst.costs = Matrix{{1.0, 2.0}, {0.5, 1.0}};
    inst.budgets = {2.0, 2.0};
    inst.w1 = AllocationMatrix{{1, 0}, {0, 1}};
    inst.w0 = AllocationMatrix{{0, 1}, {1, 0}};
    inst.utility = UtilityModel::fixed(Matrix{{1.0, 2.0}, {3.0, 4.0}});
    return inst;
}

}  // namespace

TEST(ValidateInstance, ValidInstanceHasEmptyReport) { EXPECT_TRUE(validate_instance(two_by_two()).empty()); }

TEST(ValidateInstance, ZeroBudgetReported) {
    auto inst = two_by_two();
    inst.budgets[0] = 0.0;
    EXPECT_TRUE(mentions(validate_instance(inst), "budget must be positive"));
}

TEST(ValidateInstance, RowSummingToTwoReported) {
    auto inst = two_by_two();
    inst.w1.set(0, 1, true);
    EXPECT_TRUE(mentions(validate_instance(inst), "row-stochasticity"));
}

TEST(ValidateInstance, ReportsEveryViolation) {
    auto inst = two_by_two();
    inst.costs(1, 1) = -1.0;
    inst.budgets[1] = 0.1;
    const auto report = validate_instance(inst);
    EXPECT_TRUE(mentions(report, "negative"));
    EXPECT_TRUE(mentions(report, "budget-satisfying"));
}

TEST(ValidateInstance, DimensionMismatchReported) {
    auto inst = two_by_two();
    inst.budgets.push_back(1.0);
    EXPECT_FALSE(validate_instance(inst).empty());
}

TEST(ValidateInstance, FixedModeRequiresZeroVariance) {
    auto inst = two_by_two();
    inst.utility.sigma2(0, 0) = 0.5;
    EXPECT_FALSE(validate_instance(inst).empty());
}

TEST(BudgetSatisfying, AllZeroAllocation) {
    EXPECT_TRUE(is_budget_satisfying(AllocationMatrix(3, 2), Matrix(3, 2, 5.0), std::vector<double>{0.1, 0.1}));
}

TEST(BudgetSatisfying, OverspendExampleAllocationsHold) {
    const auto inst = fixtures::overspend_example(2);
    EXPECT_TRUE(is_budget_satisfying(inst.w1, inst.costs, inst.budgets));
    EXPECT_TRUE(is_budget_satisfying(inst.w0, inst.costs, inst.budgets));
    const auto all_first = AllocationMatrix::from_assignment(2, std::vector<int>{0, 0, 0, 0});
    EXPECT_FALSE(is_budget_satisfying(all_first, inst.costs, inst.budgets));
}

TEST(BudgetSatisfying, ToleranceIsAbsolute) {
    const Matrix c{{1.0}};
    const AllocationMatrix w{{1}};
    EXPECT_TRUE(is_budget_satisfying(w, c, std::vector<double>{1.0 - 0.5e-9}));
    EXPECT_FALSE(is_budget_satisfying(w, c, std::vector<double>{1.0 - 2e-9}));
}

TEST(BudgetSatisfying, DimensionMismatchThrows) {
    EXPECT_THROW((void)is_budget_satisfying(AllocationMatrix(2, 2), Matrix(3, 2), std::vector<double>{1, 1}), Error);
    EXPECT_THROW((void)is_expected_budget_satisfying(Matrix(2, 2), Matrix(2, 2), std::vector<double>{1}), Error);
}

TEST(ExpectedBudgetSatisfying, BernoulliMixtureOfSatisfyingAllocations) {
    auto rng = make_rng(21, {});
    for (int t = 0; t < 20; ++t) {
        const auto inst = fixtures::random_instance(rng, 8, 3);
        Matrix x(8, 3);
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t j = 0; j < 3; ++j) x(i, j) = 0.5 * (inst.w1(i, j) + inst.w0(i, j));
        }
        EXPECT_TRUE(is_expected_budget_satisfying(x, inst.costs, inst.budgets));
    }
}

TEST(ExpectedBudgetSatisfying, Examples) {
    EXPECT_TRUE(is_expected_budget_satisfying(Matrix(2, 1), Matrix(2, 1, 1.0), std::vector<double>{1.0}));
    EXPECT_FALSE(is_expected_budget_satisfying(Matrix{{0.8}, {0.8}}, Matrix{{1.0}, {1.0}}, std::vector<double>{1.0}));
}

TEST(ExpectedBudgetSatisfying, ConvexCombinationsStayFeasible) {
    auto rng = make_rng(22, {});
    for (int t = 0; t < 50; ++t) {
        const Matrix c{{fixtures::uniform(rng, 0.5, 2), fixtures::uniform(rng, 0.5, 2)},
                       {fixtures::uniform(rng, 0.5, 2), fixtures::uniform(rng, 0.5, 2)}};
        const std::vector<double> b{1.0, 1.0};
        auto feasible_draw = [&] {
            while (true) {
                Matrix x{{fixtures::uniform(rng, 0, 0.5), fixtures::uniform(rng, 0, 0.5)},
                         {fixtures::uniform(rng, 0, 0.5), fixtures::uniform(rng, 0, 0.5)}};
                if (is_expected_budget_satisfying(x, c, b)) return x;
            }
        };
        const auto xa = feasible_draw();
        const auto xb = feasible_draw();
        for (double l : {0.0, 0.25, 0.5, 0.9, 1.0}) {
            Matrix mix(2, 2);
            for (std::size_t k = 0; k < 4; ++k) mix.data()[k] = l * xa.data()[k] + (1 - l) * xb.data()[k];
            EXPECT_TRUE(is_expected_budget_satisfying(mix, c, b));
        }
    }
}

TEST(ExpectedTte, EqualAllocationsGiveZero) {
    auto inst = two_by_two();
    inst.w0 = inst.w1;
    EXPECT_EQ(expected_tte(inst), 0.0);
}

TEST(ExpectedTte, SingleItemExample) {
    ProblemInstance inst;
    inst.costs = Matrix{{1.0, 1.0}};
    inst.budgets = {1.0, 1.0};
    inst.w1 = AllocationMatrix{{1, 0}};
    inst.w0 = AllocationMatrix{{0, 1}};
    inst.utility = UtilityModel::fixed(Matrix{{2.0, 1.0}});
    EXPECT_DOUBLE_EQ(expected_tte(inst), 1.0);
}

TEST(ExpectedTte, MatchesDirectSummation) {
    auto rng = make_rng(23, {});
    const auto inst = fixtures::random_instance(rng, 12, 4);
    double direct = 0.0;
    for (std::size_t i = 0; i < 12; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            if (inst.w1(i, j)) direct += inst.utility.mu(i, j);
            if (inst.w0(i, j)) direct -= inst.utility.mu(i, j);
        }
    }
    EXPECT_NEAR(expected_tte(inst), direct, 1e-12);
}

TEST(RealizedTte, Examples) {
    ProblemInstance inst;
    inst.costs = Matrix(2, 2, 1.0);
    inst.budgets = {2.0, 2.0};
    inst.w1 = AllocationMatrix{{1, 0}, {0, 1}};
    inst.w0 = AllocationMatrix{{0, 1}, {1, 0}};
    inst.utility = UtilityModel::fixed(Matrix(2, 2, 1.0));
    EXPECT_EQ(realized_tte(inst, Matrix(2, 2, 1.0)), 0.0);

    ProblemInstance one;
    one.costs = Matrix{{1.0}};
    one.budgets = {1.0};
    one.w1 = AllocationMatrix{{1}};
    one.w0 = AllocationMatrix{{0}};
    one.utility = UtilityModel::fixed(Matrix{{3.0}});
    EXPECT_EQ(realized_tte(one, Matrix{{3.0}}), 3.0);
    EXPECT_THROW((void)realized_tte(one, Matrix(2, 2)), Error);
}

TEST(RealizedTte, MatchesTwoLoopSummation) {
    auto rng = make_rng(24, {});
    const auto inst = fixtures::random_instance(rng, 5, 3);
    Matrix u(5, 3);
    for (auto& v : u.data()) v = fixtures::uniform(rng, -1, 3);
    double direct = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j) direct += u(i, j) * (int{inst.w1(i, j)} - int{inst.w0(i, j)});
    }
    EXPECT_NEAR(realized_tte(inst, u), direct, 1e-12);
}

TEST(ExpectedTte, MeanOfResampledRealizedTte) {
    auto rng = make_rng(25, {});
    auto inst = fixtures::random_instance(rng, 6, 3);
    Matrix loc(6, 3), scale(6, 3, 0.25);
    for (auto& v : loc.data()) v = fixtures::uniform(rng, -0.5, 0.5);
    inst.utility = UtilityModel::lognormal(loc, scale);
    constexpr int draws = 20000;
    double sum = 0.0, sq = 0.0;
    for (int t = 0; t < draws; ++t) {
        Matrix u(6, 3);
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 3; ++j) u(i, j) = draw_utility(inst.utility, i, j, rng);
        }
        const double tau = realized_tte(inst, u);
        sum += tau;
        sq += tau * tau;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sq / draws - mean * mean) / draws);
    EXPECT_LE(std::abs(mean - expected_tte(inst)), 3 * se);
}

TEST(UtilityModel, LognormalMoments) {
    const auto u = UtilityModel::lognormal(Matrix{{0.0}}, Matrix{{0.25}});
    EXPECT_NEAR(u.mu(0, 0), std::exp(1.0 / 32.0), 1e-15);
    EXPECT_NEAR(u.sigma2(0, 0), std::expm1(1.0 / 16.0) * std::exp(1.0 / 16.0), 1e-15);
}

TEST(AllocationMatrix, AssignmentRoundTrip) {
    const std::vector<int> a{1, -1, 0, 2};
    const auto w = AllocationMatrix::from_assignment(3, a);
    EXPECT_EQ(w.assignment(), a);
    EXPECT_EQ(w.row_sum(1), 0u);
    EXPECT_THROW((void)AllocationMatrix::from_assignment(2, a), Error);
}
