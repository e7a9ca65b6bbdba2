#include "budgetab/throttle.hpp"

#include <cmath>
#include <numeric>

#include "budgetab/error.hpp"

namespace budgetab {

namespace detail {

void shuffle_order(std::vector<std::size_t>& order, Rng& rng) {
    for (std::size_t k = order.size(); k > 1; --k) {
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        std::swap(order[k - 1], order[pick(rng)]);
    }
}

void throttle_assignment(std::span<int> assignment, const Matrix& costs,
                         std::span<const double> budgets, std::span<const std::size_t> order,
                         ThrottleRule rule, std::vector<double>& spend, std::vector<char>& closed) {
    spend.assign(costs.cols(), 0.0);
    closed.assign(costs.cols(), 0);
    for (const auto i : order) {
        const int j = assignment[i];
        if (j < 0) continue;
        const auto b = static_cast<std::size_t>(j);
        if (closed[b]) {
            assignment[i] = -1;
            continue;
        }
        const double next = spend[b] + costs(i, b);
        if (next <= budgets[b] + kFeasibilityTolerance) {
            spend[b] = next;
        } else {
            assignment[i] = -1;
            if (rule == ThrottleRule::prefix) closed[b] = 1;
        }
    }
}

}  // namespace detail

namespace {

void check_dims(const AllocationMatrix& w, const Matrix& costs, std::span<const double> budgets) {
    if (w.rows() != costs.rows() || w.cols() != costs.cols() || budgets.size() != costs.cols()) {
        fail(ErrorCode::dimension_mismatch, "throttle: allocation, costs and budgets disagree");
    }
    for (std::size_t i = 0; i < w.rows(); ++i) {
        if (w.row_sum(i) > 1) fail(ErrorCode::invalid_argument, "throttle: allocation row assigns an item twice");
    }
}

AllocationMatrix throttle_in_order(const AllocationMatrix& w, const Matrix& costs,
                                   std::span<const double> budgets,
                                   std::span<const std::size_t> order, ThrottleRule rule) {
    auto assignment = w.assignment();
    std::vector<double> spend;
    std::vector<char> closed;
    detail::throttle_assignment(assignment, costs, budgets, order, rule, spend, closed);
    return AllocationMatrix::from_assignment(w.cols(), assignment);
}

}  // namespace

AllocationMatrix sequential_throttle(const AllocationMatrix& w, const Matrix& costs,
                                     std::span<const double> budgets, ThrottleRule rule) {
    check_dims(w, costs, budgets);
    std::vector<std::size_t> order(w.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    return throttle_in_order(w, costs, budgets, order, rule);
}

AllocationMatrix random_throttle(const AllocationMatrix& w, const Matrix& costs,
                                 std::span<const double> budgets, Rng& rng, ThrottleRule rule) {
    check_dims(w, costs, budgets);
    std::vector<std::size_t> order(w.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    detail::shuffle_order(order, rng);
    return throttle_in_order(w, costs, budgets, order, rule);
}

double survival_lower_bound(double items, double low, double high, double min_prob) {
    if (!(items >= 1.0) || !(low > 0.0) || !(high >= low) || !(min_prob > 0.0 && min_prob <= 1.0)) {
        fail(ErrorCode::invalid_argument,
             "survival_lower_bound needs items >= 1, 0 < low <= high and min_prob in (0, 1]");
    }
    const double t = std::ceil(high / (low * min_prob));
    const double tail = std::exp(-2.0 * std::cbrt(items) * low * low * min_prob * min_prob / (high * high));
    const double bound = 1.0 - (t + std::pow(items, 2.0 / 3.0)) / items - tail;
    return std::max(0.0, bound);
}

}  // namespace budgetab
