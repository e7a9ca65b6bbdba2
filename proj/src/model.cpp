#include "budgetab/model.hpp"

#include <cmath>
#include <fmt/format.h>

#include "budgetab/error.hpp"

namespace budgetab {

AllocationMatrix::AllocationMatrix(std::initializer_list<std::initializer_list<std::uint8_t>> init)
    : entries_(init) {
    for (auto v : entries_.data()) {
        if (v > 1) {
            fail(ErrorCode::invalid_argument, "allocation entries must be 0 or 1");
        }
    }
}

AllocationMatrix AllocationMatrix::from_assignment(std::size_t buyers,
                                                   std::span<const int> assignment) {
    AllocationMatrix w(assignment.size(), buyers);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const int j = assignment[i];
        if (j < 0) continue;
        if (static_cast<std::size_t>(j) >= buyers) {
            fail(ErrorCode::invalid_argument, fmt::format("item {} assigned to unknown buyer {}", i, j));
        }
        w.set(i, static_cast<std::size_t>(j), true);
    }
    return w;
}

std::size_t AllocationMatrix::row_sum(std::size_t i) const noexcept {
    std::size_t s = 0;
    for (auto v : entries_.row(i)) s += v;
    return s;
}

int AllocationMatrix::buyer(std::size_t i) const noexcept {
    const auto r = entries_.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
        if (r[j] != 0) return static_cast<int>(j);
    }
    return -1;
}

std::vector<int> AllocationMatrix::assignment() const {
    std::vector<int> out(rows());
    for (std::size_t i = 0; i < rows(); ++i) out[i] = buyer(i);
    return out;
}

UtilityModel UtilityModel::fixed(Matrix values) {
    UtilityModel u;
    u.mu = values;
    u.sigma2 = Matrix(values.rows(), values.cols(), 0.0);
    u.generator = FixedUtilities{std::move(values)};
    u.mode = UtilityMode::fixed;
    return u;
}

UtilityModel UtilityModel::lognormal(Matrix location, Matrix scale) {
    if (!location.same_shape(scale)) {
        fail(ErrorCode::dimension_mismatch, "lognormal location/scale shapes differ");
    }
    UtilityModel u;
    u.mu = Matrix(location.rows(), location.cols());
    u.sigma2 = Matrix(location.rows(), location.cols());
    for (std::size_t i = 0; i < location.rows(); ++i) {
        for (std::size_t j = 0; j < location.cols(); ++j) {
            const double s2 = scale(i, j) * scale(i, j);
            u.mu(i, j) = std::exp(location(i, j) + 0.5 * s2);
            u.sigma2(i, j) = std::expm1(s2) * std::exp(2.0 * location(i, j) + s2);
        }
    }
    u.generator = LognormalUtilities{std::move(location), std::move(scale)};
    u.mode = UtilityMode::resample;
    return u;
}

UtilityModel UtilityModel::two_point(Matrix low, Matrix high, Matrix p_high) {
    if (!low.same_shape(high) || !low.same_shape(p_high)) {
        fail(ErrorCode::dimension_mismatch, "two-point utility matrices differ in shape");
    }
    UtilityModel u;
    u.mu = Matrix(low.rows(), low.cols());
    u.sigma2 = Matrix(low.rows(), low.cols());
    for (std::size_t i = 0; i < low.rows(); ++i) {
        for (std::size_t j = 0; j < low.cols(); ++j) {
            const double p = p_high(i, j);
            const double d = high(i, j) - low(i, j);
            u.mu(i, j) = low(i, j) + p * d;
            u.sigma2(i, j) = p * (1.0 - p) * d * d;
        }
    }
    u.generator = TwoPointUtilities{std::move(low), std::move(high), std::move(p_high)};
    u.mode = UtilityMode::resample;
    return u;
}

namespace {

void check_allocation(const AllocationMatrix& w, const char* name, const ProblemInstance& inst,
                      ValidationReport& report) {
    if (!(w.rows() == inst.items() && w.cols() == inst.buyers())) {
        report.push_back(fmt::format("{} has shape {}x{}, expected {}x{}", name, w.rows(), w.cols(),
                                     inst.items(), inst.buyers()));
        return;
    }
    for (std::size_t i = 0; i < w.rows(); ++i) {
        if (const auto s = w.row_sum(i); s > 1) {
            report.push_back(fmt::format(
                "{} row {} violates row-stochasticity: sums to {} (at most 1 allowed)", name, i, s));
        }
    }
    if (inst.budgets.size() != inst.buyers()) return;
    const auto spend = buyer_spend(w, inst.costs);
    for (std::size_t j = 0; j < spend.size(); ++j) {
        if (spend[j] > inst.budgets[j] + kFeasibilityTolerance) {
            report.push_back(fmt::format("{} is not budget-satisfying: buyer {} spends {} > budget {}",
                                         name, j, spend[j], inst.budgets[j]));
        }
    }
}

void check_shape(const Matrix& m, const char* name, const ProblemInstance& inst,
                 ValidationReport& report) {
    if (!m.same_shape(inst.items(), inst.buyers())) {
        report.push_back(fmt::format("{} has shape {}x{}, expected {}x{}", name, m.rows(), m.cols(),
                                     inst.items(), inst.buyers()));
    }
}

}  // namespace

ValidationReport validate_instance(const ProblemInstance& inst) {
    ValidationReport report;
    const auto m = inst.items();
    const auto n = inst.buyers();
    if (m == 0 || n == 0) report.push_back("instance needs at least one item and one buyer");
    if (inst.budgets.size() != n) {
        report.push_back(fmt::format("budgets has length {}, expected {}", inst.budgets.size(), n));
    }
    for (std::size_t j = 0; j < inst.budgets.size(); ++j) {
        if (!(inst.budgets[j] > 0.0) || !std::isfinite(inst.budgets[j])) {
            report.push_back(fmt::format("budget must be positive (buyer {} has {})", j, inst.budgets[j]));
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = inst.costs(i, j);
            if (!(c >= 0.0) || !std::isfinite(c)) {
                report.push_back(fmt::format("negative or non-finite cost {} at ({}, {})", c, i, j));
            }
        }
    }
    check_allocation(inst.w0, "w0", inst, report);
    check_allocation(inst.w1, "w1", inst, report);

    const auto& u = inst.utility;
    check_shape(u.mu, "utility mu", inst, report);
    check_shape(u.sigma2, "utility sigma2", inst, report);
    if (u.sigma2.same_shape(inst.items(), inst.buyers())) {
        for (auto v : u.sigma2.data()) {
            if (!(v >= 0.0)) {
                report.push_back("utility sigma2 must be nonnegative");
                break;
            }
        }
    }
    if (u.mode == UtilityMode::fixed) {
        const auto* fixed = std::get_if<FixedUtilities>(&u.generator);
        if (fixed == nullptr) {
            report.push_back("fixed-realization mode requires a fixed utility matrix");
        } else if (fixed->values != u.mu) {
            report.push_back("fixed-realization utilities must equal mu entrywise");
        }
        for (auto v : u.sigma2.data()) {
            if (v != 0.0) {
                report.push_back("fixed-realization mode requires sigma2 = 0");
                break;
            }
        }
    } else if (std::holds_alternative<FixedUtilities>(u.generator)) {
        report.push_back("resample mode requires a random utility generator");
    }
    return report;
}

std::vector<double> buyer_spend(const AllocationMatrix& w, const Matrix& costs) {
    if (!(w.rows() == costs.rows() && w.cols() == costs.cols())) {
        fail(ErrorCode::dimension_mismatch, "allocation and cost matrices differ in shape");
    }
    std::vector<double> spend(costs.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            if (w(i, j)) spend[j] += costs(i, j);
        }
    }
    return spend;
}

bool is_budget_satisfying(const AllocationMatrix& w, const Matrix& costs,
                          std::span<const double> budgets) {
    if (budgets.size() != costs.cols()) {
        fail(ErrorCode::dimension_mismatch, "budget vector length differs from buyer count");
    }
    const auto spend = buyer_spend(w, costs);
    for (std::size_t j = 0; j < spend.size(); ++j) {
        if (spend[j] > budgets[j] + kFeasibilityTolerance) return false;
    }
    return true;
}

bool is_expected_budget_satisfying(const Matrix& x, const Matrix& costs,
                                   std::span<const double> budgets) {
    if (!x.same_shape(costs) || budgets.size() != costs.cols()) {
        fail(ErrorCode::dimension_mismatch, "experiment, cost and budget dimensions disagree");
    }
    std::vector<double> spend(costs.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) spend[j] += x(i, j) * costs(i, j);
    }
    for (std::size_t j = 0; j < spend.size(); ++j) {
        if (spend[j] > budgets[j] + kFeasibilityTolerance) return false;
    }
    return true;
}

namespace {

double treatment_difference(const ProblemInstance& inst, const Matrix& u) {
    double total = 0.0;
    for (std::size_t i = 0; i < inst.items(); ++i) {
        for (std::size_t j = 0; j < inst.buyers(); ++j) {
            const int d = int{inst.w1(i, j)} - int{inst.w0(i, j)};
            if (d != 0) total += d * u(i, j);
        }
    }
    return total;
}

}  // namespace

double expected_tte(const ProblemInstance& inst) { return treatment_difference(inst, inst.utility.mu); }

double realized_tte(const ProblemInstance& inst, const Matrix& utilities) {
    if (!utilities.same_shape(inst.items(), inst.buyers())) {
        fail(ErrorCode::dimension_mismatch, "utility matrix shape differs from instance");
    }
    return treatment_difference(inst, utilities);
}

}  // namespace budgetab
