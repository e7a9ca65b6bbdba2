#pragma once

#include <span>
#include <string>
#include <vector>

#include "budgetab/matrix.hpp"

namespace budgetab {

/// Settings for the separable design solver.
struct SolverConfig {
    double kkt_tolerance = 1e-7;
    int max_iterations = 20000;  ///< Gauss-Seidel sweeps over the budget multipliers.
    double floor = 1e-6;         ///< Lower bound on support entries.
    /// Initial budget multipliers (warm start); empty means all zero.
    std::vector<double> initial_budget_duals;

    void validate() const;
};

/// Lagrange multipliers of the row (simplex) and budget constraints.
struct Duals {
    std::vector<double> row;     ///< one per item, >= 0
    std::vector<double> budget;  ///< one per buyer, >= 0
};

struct SolverCertificate {
    double objective = 0.0;   ///< sum of a_ij / x_ij over the support
    double dual_value = 0.0;  ///< Lagrangian dual at the returned multipliers
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    Duals duals;
    /// Dual value after each sweep; non-decreasing.
    std::vector<double> dual_trace;
    /// Best budget-feasible objective seen after each sweep; non-increasing.
    std::vector<double> objective_trace;

    [[nodiscard]] std::string to_json() const;
};

struct SolverResult {
    Matrix x;
    SolverCertificate certificate;
};

/// Minimizes sum_{a_ij > 0} a_ij / x_ij subject to floor <= x_ij <= 1 on the
/// support, x_ij = 0 off it, row sums <= 1 and sum_i c_ij x_ij <= b_j.
///
/// Dual coordinate ascent: for fixed budget multipliers every row is solved
/// exactly through x_ij = clamp(sqrt(a_ij / (mu_i + lambda_j c_ij)), floor, 1)
/// with mu_i found by bracketing root search, and each lambda_j is then set
/// so that buyer j's complementary slackness holds. Deterministic.
[[nodiscard]] SolverResult solve_separable(const Matrix& weights, const Matrix& costs,
                                           std::span<const double> budgets,
                                           const SolverConfig& cfg = {});

/// Largest violation among stationarity (measured as distance from the
/// clamped stationary point), primal feasibility, dual feasibility and
/// complementary slackness (min-form). Budget terms are scaled by max(1, b_j).
[[nodiscard]] double kkt_residual(const Matrix& x, const Matrix& weights, const Matrix& costs,
                                  std::span<const double> budgets, const Duals& duals,
                                  double floor = 1e-6);

/// sum over the support of a_ij / x_ij; +inf when a support entry is zero.
[[nodiscard]] double design_objective(const Matrix& weights, const Matrix& x);

/// Lagrangian dual function evaluated at the given budget multipliers (row
/// multipliers are minimized out exactly).
[[nodiscard]] double lagrangian_dual_value(const Matrix& weights, const Matrix& costs,
                                           std::span<const double> budgets,
                                           std::span<const double> budget_duals,
                                           double floor = 1e-6);

struct GridOracleResult {
    Matrix x;
    double objective = 0.0;
};

/// Brute-force reference for tiny problems (m * n <= 8): exhaustive search
/// over a coarse grid followed by grid pattern search with halving steps
/// down to `resolution`. Entries with a_ij = 0 are fixed at zero.
[[nodiscard]] GridOracleResult grid_oracle(const Matrix& weights, const Matrix& costs,
                                           std::span<const double> budgets,
                                           double resolution = 1e-3, double floor = 1e-6);

}  // namespace budgetab
