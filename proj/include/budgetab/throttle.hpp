#pragma once

#include <span>
#include <vector>

#include "budgetab/model.hpp"
#include "budgetab/rng.hpp"

namespace budgetab {

/// How items past a buyer's budget are dropped when scanning in order.
enum class ThrottleRule {
    /// Keep the longest affordable prefix per buyer; everything after the
    /// first overspending item is dropped.
    prefix,
    /// Drop only the items that do not fit; later affordable items stay.
    greedy,
};

enum class ThrottleKind {
    sequential,  ///< prefix rule in item index order
    random,      ///< prefix rule in a uniformly random item order
    greedy,      ///< feasibility test in item index order (online allocation)
};

/// Scans items by index and keeps, per buyer, the allocations that the rule
/// admits. The result is budget-satisfying and only removes edges.
[[nodiscard]] AllocationMatrix sequential_throttle(const AllocationMatrix& w, const Matrix& costs,
                                                   std::span<const double> budgets,
                                                   ThrottleRule rule = ThrottleRule::prefix);

/// Same as sequential_throttle over a uniformly random item order drawn by
/// Fisher-Yates from `rng` (one permutation per call).
[[nodiscard]] AllocationMatrix random_throttle(const AllocationMatrix& w, const Matrix& costs,
                                               std::span<const double> budgets, Rng& rng,
                                               ThrottleRule rule = ThrottleRule::prefix);

/// Lower bound on Pr(item survives throttling | it was sampled) for a buyer
/// with `items` related items, costs in [low, high] and support
/// probabilities >= min_prob, under random throttling of an expected
/// budget-satisfying design:
///   1 - (T + m^(2/3)) / m - exp(-2 m^(1/3) low^2 p^2 / high^2),
/// T = ceil(high / (low p)), clamped below at 0.
[[nodiscard]] double survival_lower_bound(double items, double low, double high, double min_prob);

namespace detail {

/// Uniform random permutation of 0..m-1 (Fisher-Yates).
void shuffle_order(std::vector<std::size_t>& order, Rng& rng);

/// In-place throttling of a per-item buyer assignment (-1 = aborted),
/// visiting items in `order`. `spend` and `closed` are scratch buffers.
void throttle_assignment(std::span<int> assignment, const Matrix& costs,
                         std::span<const double> budgets, std::span<const std::size_t> order,
                         ThrottleRule rule, std::vector<double>& spend,
                         std::vector<char>& closed);

}  // namespace detail

}  // namespace budgetab
