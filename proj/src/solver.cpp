#include "budgetab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "budgetab/error.hpp"

namespace budgetab {

void SolverConfig::validate() const {
    if (!(kkt_tolerance > 0.0)) fail(ErrorCode::config, "solver kkt_tolerance must be positive");
    if (!(floor > 0.0 && floor < 1.0)) fail(ErrorCode::config, "solver floor must lie in (0, 1)");
    if (max_iterations < 1) fail(ErrorCode::config, "solver max_iterations must be at least 1");
}

std::string SolverCertificate::to_json() const {
    nlohmann::json j;
    j["objective"] = objective;
    j["dual_value"] = dual_value;
    j["kkt_residual"] = kkt_residual;
    j["iterations"] = iterations;
    j["converged"] = converged;
    j["row_duals"] = duals.row;
    j["budget_duals"] = duals.budget;
    return j.dump(2);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Cell {
    std::size_t col;
    double a;
    double c;
    double x = 0.0;
};

double stationary_value(double a, double denom, double floor) {
    if (!(denom > 0.0)) return 1.0;
    return std::clamp(std::sqrt(a / denom), floor, 1.0);
}

/// Support-only view of the problem with the current dual state.
class SeparableProblem {
public:
    SeparableProblem(const Matrix& weights, const Matrix& costs, std::span<const double> budgets,
                     double floor)
        : m_(weights.rows()), n_(weights.cols()), budgets_(budgets), floor_(floor),
          rows_(m_), cols_(n_), mu_(m_, 0.0), lambda_(n_, 0.0) {
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                const double a = weights(i, j);
                if (a > 0.0) {
                    if (costs(i, j) > 0.0) cols_[j].push_back({i, rows_[i].size()});
                    rows_[i].push_back({j, a, costs(i, j)});
                }
            }
        }
    }

    void set_budget_duals(std::span<const double> lambda) {
        std::copy(lambda.begin(), lambda.end(), lambda_.begin());
        for (std::size_t i = 0; i < m_; ++i) solve_row(i);
    }

    /// Exact minimizer of the row subproblem for the current budget duals.
    void solve_row(std::size_t i) {
        auto& cells = rows_[i];
        if (cells.empty()) {
            mu_[i] = 0.0;
            return;
        }
        auto row_excess = [&](double mu) {
            double s = -1.0;
            for (const auto& cell : cells) s += stationary_value(cell.a, mu + lambda_[cell.col] * cell.c, floor_);
            return s;
        };
        double mu = 0.0;
        if (row_excess(0.0) > 0.0) {
            double a_max = 0.0;
            for (const auto& cell : cells) a_max = std::max(a_max, cell.a);
            const double k = static_cast<double>(cells.size());
            double hi = a_max * k * k;
            if (row_excess(hi) > 0.0) hi *= 4.0;  // guards rounding in the bracket bound
            std::uintmax_t iters = 200;
            const auto bracket = boost::math::tools::toms748_solve(
                row_excess, 0.0, hi, boost::math::tools::eps_tolerance<double>(), iters);
            mu = bracket.second;
            if (row_excess(mu) > 0.0) mu = std::nextafter(mu, kInf);
        }
        mu_[i] = mu;
        for (auto& cell : cells) cell.x = stationary_value(cell.a, mu + lambda_[cell.col] * cell.c, floor_);
    }

    double column_spend(std::size_t j) const {
        double s = 0.0;
        for (const auto& ref : cols_[j]) {
            const auto& cell = rows_[ref.row][ref.cell];
            s += cell.c * cell.x;
        }
        return s;
    }

    /// Sets lambda_j so that buyer j's budget holds with complementary
    /// slackness, re-solving the rows it touches. Returns false when the
    /// budget cannot be met even at the support floor.
    bool solve_column(std::size_t j) {
        if (cols_[j].empty()) {
            lambda_[j] = 0.0;
            return true;
        }
        auto excess_at = [&](double lambda) {
            lambda_[j] = lambda;
            for (const auto& ref : cols_[j]) solve_row(ref.row);
            return column_spend(j) - budgets_[j];
        };
        if (excess_at(0.0) <= 0.0) return true;

        double hi = lambda_hint(j);
        double value = excess_at(hi);
        int grow = 0;
        while (value > 0.0) {
            if (++grow > 400) {
                excess_at(hi);
                return false;
            }
            hi *= 4.0;
            value = excess_at(hi);
        }
        std::uintmax_t iters = 200;
        const auto bracket = boost::math::tools::toms748_solve(
            excess_at, 0.0, hi, boost::math::tools::eps_tolerance<double>(), iters);
        double lambda = bracket.second;
        if (excess_at(lambda) > 0.0) excess_at(lambda = hi);
        return true;
    }

    [[nodiscard]] Matrix primal() const {
        Matrix x(m_, n_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            for (const auto& cell : rows_[i]) x(i, cell.col) = cell.x;
        }
        return x;
    }

    [[nodiscard]] double dual_value() const {
        double g = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            for (const auto& cell : rows_[i]) {
                g += cell.a / cell.x + (mu_[i] + lambda_[cell.col] * cell.c) * cell.x;
            }
            g -= mu_[i];
        }
        for (std::size_t j = 0; j < n_; ++j) g -= lambda_[j] * budgets_[j];
        return g;
    }

    [[nodiscard]] const std::vector<double>& mu() const { return mu_; }
    [[nodiscard]] const std::vector<double>& lambda() const { return lambda_; }
    [[nodiscard]] std::size_t buyers() const { return n_; }

private:
    struct CellRef {
        std::size_t row;
        std::size_t cell;
    };

    double lambda_hint(std::size_t j) const {
        // lambda large enough that every entry of the column sits near
        // sqrt(a / (lambda c)); start from the current value when warm.
        if (lambda_[j] > 0.0) return 2.0 * lambda_[j];
        double ratio = 0.0;
        for (const auto& ref : cols_[j]) {
            const auto& cell = rows_[ref.row][ref.cell];
            ratio = std::max(ratio, cell.a / cell.c);
        }
        return std::max(ratio, 1e-12);
    }

    std::size_t m_;
    std::size_t n_;
    std::span<const double> budgets_;
    double floor_;
    std::vector<std::vector<Cell>> rows_;
    std::vector<std::vector<CellRef>> cols_;
    std::vector<double> mu_;
    std::vector<double> lambda_;
};

bool is_within_budgets(const Matrix& x, const Matrix& costs, std::span<const double> budgets) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) s += costs(i, j) * x(i, j);
        if (s > budgets[j]) return false;
    }
    return true;
}

/// Shrinks the above-floor entries of any over-budget column so that the
/// budget holds exactly; entries stay within [floor, 1] and rows only shrink.
void restore_budgets(Matrix& x, const Matrix& weights, const Matrix& costs,
                     std::span<const double> budgets, double floor) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double spend = 0.0;
        double movable = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            spend += costs(i, j) * x(i, j);
            if (weights(i, j) > 0.0) movable += costs(i, j) * (x(i, j) - floor);
        }
        const double over = spend - budgets[j];
        if (!(over > 0.0) || !(movable > 0.0)) continue;
        const double keep = std::max(0.0, 1.0 - over / movable);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (weights(i, j) > 0.0 && costs(i, j) > 0.0) {
                x(i, j) = floor + (x(i, j) - floor) * keep;
            }
        }
        // Rounding can leave a last ulp of overspend.
        while (true) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.rows(); ++i) s += costs(i, j) * x(i, j);
            if (s <= budgets[j]) break;
            bool moved = false;
            for (std::size_t i = 0; i < x.rows(); ++i) {
                if (weights(i, j) > 0.0 && costs(i, j) > 0.0 && x(i, j) > floor) {
                    x(i, j) = std::max(floor, std::nextafter(x(i, j), 0.0) - 1e-15);
                    moved = true;
                }
            }
            if (!moved) break;
        }
    }
}

}  // namespace

double design_objective(const Matrix& weights, const Matrix& x) {
    if (!weights.same_shape(x)) fail(ErrorCode::dimension_mismatch, "weights and design differ in shape");
    double total = 0.0;
    for (std::size_t k = 0; k < weights.data().size(); ++k) {
        const double a = weights.data()[k];
        if (a <= 0.0) continue;
        const double v = x.data()[k];
        if (!(v > 0.0)) return kInf;
        total += a / v;
    }
    return total;
}

double kkt_residual(const Matrix& x, const Matrix& weights, const Matrix& costs,
                    std::span<const double> budgets, const Duals& duals, double floor) {
    const auto m = weights.rows();
    const auto n = weights.cols();
    if (!x.same_shape(weights) || !costs.same_shape(weights) || budgets.size() != n ||
        duals.row.size() != m || duals.budget.size() != n) {
        fail(ErrorCode::dimension_mismatch, "kkt_residual: inconsistent dimensions");
    }
    double r = 0.0;
    std::vector<double> spend(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double mu = duals.row[i];
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = x(i, j);
            row += v;
            spend[j] += costs(i, j) * v;
            if (weights(i, j) > 0.0) {
                const double target =
                    stationary_value(weights(i, j), mu + duals.budget[j] * costs(i, j), floor);
                r = std::max(r, std::abs(v - target));
            } else {
                r = std::max(r, std::abs(v));
            }
        }
        r = std::max(r, row - 1.0);
        r = std::max(r, -mu);
        if (row < 1.0) r = std::max(r, std::min(mu, 1.0 - row));
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double lambda = duals.budget[j];
        const double violation = (spend[j] - budgets[j]) / std::max(1.0, budgets[j]);
        r = std::max(r, violation);
        r = std::max(r, -lambda);
        if (violation < 0.0) r = std::max(r, std::min(lambda, -violation));
    }
    return r;
}

double lagrangian_dual_value(const Matrix& weights, const Matrix& costs,
                             std::span<const double> budgets, std::span<const double> budget_duals,
                             double floor) {
    if (budget_duals.size() != weights.cols() || budgets.size() != weights.cols()) {
        fail(ErrorCode::dimension_mismatch, "lagrangian_dual_value: inconsistent dimensions");
    }
    SeparableProblem problem(weights, costs, budgets, floor);
    problem.set_budget_duals(budget_duals);
    return problem.dual_value();
}

SolverResult solve_separable(const Matrix& weights, const Matrix& costs,
                             std::span<const double> budgets, const SolverConfig& cfg) {
    cfg.validate();
    const auto n = weights.cols();
    if (!costs.same_shape(weights) || budgets.size() != n) {
        fail(ErrorCode::dimension_mismatch, "solve_separable: weights, costs and budgets disagree");
    }
    bool any_support = false;
    for (auto a : weights.data()) {
        if (a < 0.0 || !std::isfinite(a)) fail(ErrorCode::invalid_argument, "design weights must be finite and nonnegative");
        any_support = any_support || a > 0.0;
    }
    if (!any_support) fail(ErrorCode::invalid_argument, "design weights are all zero");
    if (cfg.floor * static_cast<double>(n) > 1.0) {
        fail(ErrorCode::config, "solver floor too large for the row simplex");
    }

    SeparableProblem problem(weights, costs, budgets, cfg.floor);
    std::vector<double> start(n, 0.0);
    if (!cfg.initial_budget_duals.empty()) {
        if (cfg.initial_budget_duals.size() != n) {
            fail(ErrorCode::dimension_mismatch, "warm-start duals have the wrong length");
        }
        for (std::size_t j = 0; j < n; ++j) start[j] = std::max(0.0, cfg.initial_budget_duals[j]);
    }
    problem.set_budget_duals(start);

    SolverResult result;
    auto& cert = result.certificate;
    double incumbent = kInf;
    bool feasible = true;
    auto current_duals = [&] { return Duals{problem.mu(), problem.lambda()}; };

    for (int sweep = 1; sweep <= cfg.max_iterations; ++sweep) {
        feasible = true;
        for (std::size_t j = 0; j < n; ++j) feasible = problem.solve_column(j) && feasible;
        cert.iterations = sweep;

        const double dual = problem.dual_value();
        cert.dual_trace.push_back(dual);

        Matrix candidate = problem.primal();
        restore_budgets(candidate, weights, costs, budgets, cfg.floor);
        const double residual = kkt_residual(candidate, weights, costs, budgets, current_duals(), cfg.floor);
        if (is_within_budgets(candidate, costs, budgets)) {
            incumbent = std::min(incumbent, design_objective(weights, candidate));
        }
        cert.objective_trace.push_back(incumbent);

        if (!feasible) break;
        if (residual <= cfg.kkt_tolerance) {
            cert.converged = true;
            break;
        }
    }

    result.x = problem.primal();
    restore_budgets(result.x, weights, costs, budgets, cfg.floor);
    cert.duals = current_duals();
    cert.objective = design_objective(weights, result.x);
    cert.dual_value = problem.dual_value();
    cert.kkt_residual = kkt_residual(result.x, weights, costs, budgets, cert.duals, cfg.floor);
    cert.converged = cert.converged && feasible && cert.kkt_residual <= cfg.kkt_tolerance;
    return result;
}

namespace {

struct GridSearch {
    const Matrix& weights;
    const Matrix& costs;
    std::span<const double> budgets;
    double floor;
    std::vector<std::pair<std::size_t, std::size_t>> vars;

    [[nodiscard]] bool feasible(const std::vector<double>& v) const {
        std::vector<double> row(weights.rows(), 0.0);
        std::vector<double> spend(weights.cols(), 0.0);
        for (std::size_t k = 0; k < vars.size(); ++k) {
            const auto [i, j] = vars[k];
            row[i] += v[k];
            spend[j] += costs(i, j) * v[k];
        }
        for (double s : row) {
            if (s > 1.0 + 1e-12) return false;
        }
        for (std::size_t j = 0; j < spend.size(); ++j) {
            if (spend[j] > budgets[j] + 1e-12) return false;
        }
        return true;
    }

    /// Scales overfull rows and overspent columns back onto their boundary,
    /// never below the floor.
    void repair(std::vector<double>& v) const {
        for (int pass = 0; pass < 4; ++pass) {
            std::vector<double> row(weights.rows(), 0.0);
            std::vector<double> spend(weights.cols(), 0.0);
            for (std::size_t k = 0; k < vars.size(); ++k) {
                const auto [i, j] = vars[k];
                row[i] += v[k];
                spend[j] += costs(i, j) * v[k];
            }
            bool changed = false;
            for (std::size_t k = 0; k < vars.size(); ++k) {
                const auto [i, j] = vars[k];
                double scale = 1.0;
                if (row[i] > 1.0) scale = std::min(scale, 1.0 / row[i]);
                if (spend[j] > budgets[j]) scale = std::min(scale, budgets[j] / spend[j]);
                if (scale < 1.0) {
                    v[k] = std::max(floor, v[k] * scale);
                    changed = true;
                }
            }
            if (!changed) break;
        }
    }

    [[nodiscard]] double objective(const std::vector<double>& v) const {
        double f = 0.0;
        for (std::size_t k = 0; k < vars.size(); ++k) {
            const auto [i, j] = vars[k];
            f += weights(i, j) / v[k];
        }
        return f;
    }

    /// Enumerates the Cartesian product of per-variable candidate lists.
    void enumerate(const std::vector<std::vector<double>>& candidates, std::vector<double>& best,
                   double& best_f) const {
        std::vector<double> v(vars.size());
        std::vector<std::size_t> idx(vars.size(), 0);
        while (true) {
            for (std::size_t k = 0; k < vars.size(); ++k) v[k] = candidates[k][idx[k]];
            repair(v);
            if (feasible(v)) {
                const double f = objective(v);
                if (f < best_f) {
                    best_f = f;
                    best = v;
                }
            }
            std::size_t k = 0;
            while (k < vars.size() && ++idx[k] == candidates[k].size()) idx[k++] = 0;
            if (k == vars.size()) break;
        }
    }
};

}  // namespace

GridOracleResult grid_oracle(const Matrix& weights, const Matrix& costs,
                             std::span<const double> budgets, double resolution, double floor) {
    if (weights.rows() * weights.cols() > 8) {
        fail(ErrorCode::invalid_argument, "grid_oracle is limited to m * n <= 8");
    }
    if (!costs.same_shape(weights) || budgets.size() != weights.cols()) {
        fail(ErrorCode::dimension_mismatch, "grid_oracle: inconsistent dimensions");
    }
    if (!(resolution > 0.0)) fail(ErrorCode::invalid_argument, "grid_oracle resolution must be positive");

    GridSearch search{weights, costs, budgets, floor, {}};
    for (std::size_t i = 0; i < weights.rows(); ++i) {
        for (std::size_t j = 0; j < weights.cols(); ++j) {
            if (weights(i, j) > 0.0) search.vars.emplace_back(i, j);
        }
    }
    GridOracleResult out{Matrix(weights.rows(), weights.cols(), 0.0), 0.0};
    if (search.vars.empty()) return out;

    constexpr int kCoarse = 10;
    std::vector<double> coarse{floor};
    for (int s = 1; s <= kCoarse; ++s) coarse.push_back(static_cast<double>(s) / kCoarse);
    std::vector<double> best(search.vars.size(), floor);
    double best_f = search.feasible(best) ? search.objective(best) : kInf;
    search.enumerate(std::vector<std::vector<double>>(search.vars.size(), coarse), best, best_f);
    if (!std::isfinite(best_f)) fail(ErrorCode::invalid_argument, "grid_oracle: floor point is infeasible");

    double step = 1.0 / kCoarse;
    while (true) {
        step *= 0.5;
        bool moved = true;
        while (moved) {
            std::vector<std::vector<double>> candidates(search.vars.size());
            for (std::size_t k = 0; k < best.size(); ++k) {
                auto& c = candidates[k];
                c.push_back(best[k]);
                c.push_back(std::min(1.0, best[k] + step));
                c.push_back(std::max(floor, best[k] - step));
            }
            const double before = best_f;
            search.enumerate(candidates, best, best_f);
            moved = best_f < before;
        }
        if (step <= resolution) break;
    }

    for (std::size_t k = 0; k < search.vars.size(); ++k) {
        out.x(search.vars[k].first, search.vars[k].second) = best[k];
    }
    out.objective = best_f;
    return out;
}

}  // namespace budgetab
