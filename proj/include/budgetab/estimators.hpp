#pragma once

#include "budgetab/model.hpp"

namespace budgetab {

// All estimators take the observed utilities o_ij (zero where nothing was
// realized) and apply the 0/0 = 0 convention: terms with o_ij = 0 are
// skipped, while o_ij != 0 against a zero probability throws
// ErrorCode::inconsistent_input.

/// Horvitz-Thompson: sum o w1 / p - sum o w0 / p with true inclusion
/// probabilities p.
[[nodiscard]] double ht_estimator(const Matrix& observed, const AllocationMatrix& w1,
                                  const AllocationMatrix& w0, const Matrix& inclusion);

/// Plug-in estimator: design probabilities x in place of p.
[[nodiscard]] double plugin_estimator(const Matrix& observed, const AllocationMatrix& w1,
                                      const AllocationMatrix& w0, const Matrix& x);

struct HajekEstimate {
    double value = 0.0;
    bool defined = false;  ///< false when an arm's normalizer is zero
};

/// Self-normalized variant: for each arm k,
///   m * (sum o w^k / (p u))^-1 * sum o w^k / p,
/// treatment arm minus control arm. `normalizing_utilities` supplies the u
/// in the normalizer (realized values or means).
[[nodiscard]] HajekEstimate hajek_estimator(const Matrix& observed, const AllocationMatrix& w1,
                                            const AllocationMatrix& w0, const Matrix& inclusion,
                                            const Matrix& normalizing_utilities);

/// Closed-form variance of the plug-in estimator when no item can be
/// throttled:
///   sum (mu^2 + s^2)(w1 + w0) / x - sum mu^2 (w1 + w0)
///     + 2 sum_{i, j, j'} mu_ij w1_ij mu_ij' w0_ij'.
/// Evaluated regardless of the budget regime.
[[nodiscard]] double variance_closed_form(const ProblemInstance& inst, const Matrix& x);

/// Upper bound on the plug-in estimator's MSE under any budget:
///   sum (mu^2 + s^2)(w1 + w0) / x + (sum mu w1)^2 + (sum mu w0)^2.
[[nodiscard]] double mse_upper_bound(const ProblemInstance& inst, const Matrix& x);

}  // namespace budgetab
