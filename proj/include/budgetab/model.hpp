#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "budgetab/matrix.hpp"

namespace budgetab {

/// Absolute slack allowed on every budget and row-sum comparison.
inline constexpr double kFeasibilityTolerance = 1e-9;

/// Binary item-by-buyer matrix; w(i, j) = 1 means item i goes to buyer j.
/// Rows are expected to hold at most one 1 (a zero row is an aborted item),
/// but the type can hold violating rows so validation can report them.
class AllocationMatrix {
public:
    AllocationMatrix() = default;
    AllocationMatrix(std::size_t items, std::size_t buyers) : entries_(items, buyers, 0) {}
    AllocationMatrix(std::initializer_list<std::initializer_list<std::uint8_t>> init);

    /// Builds a matrix from a per-item buyer index; -1 marks an aborted item.
    static AllocationMatrix from_assignment(std::size_t buyers, std::span<const int> assignment);

    [[nodiscard]] std::size_t rows() const noexcept { return entries_.rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return entries_.cols(); }

    [[nodiscard]] bool operator()(std::size_t i, std::size_t j) const noexcept {
        return entries_(i, j) != 0;
    }
    void set(std::size_t i, std::size_t j, bool value) noexcept { entries_(i, j) = value ? 1 : 0; }

    [[nodiscard]] std::size_t row_sum(std::size_t i) const noexcept;
    /// Index of the first buyer in row i, or -1 for an empty row.
    [[nodiscard]] int buyer(std::size_t i) const noexcept;
    [[nodiscard]] std::vector<int> assignment() const;

    [[nodiscard]] const DenseMatrix<std::uint8_t>& entries() const noexcept { return entries_; }

    friend bool operator==(const AllocationMatrix&, const AllocationMatrix&) = default;

private:
    DenseMatrix<std::uint8_t> entries_;
};

/// Per-item independent allocation probabilities x_ij.
class ExperimentMatrix : public Matrix {
public:
    using Matrix::Matrix;
    ExperimentMatrix() = default;
    explicit ExperimentMatrix(Matrix m) : Matrix(std::move(m)) {}
};

struct ObservationMatrix {
    Matrix values;
    AllocationMatrix realized;
};

enum class UtilityMode { resample, fixed };

struct FixedUtilities {
    Matrix values;
};

/// Each u_ij = exp(location_ij + scale_ij * N(0, 1)).
struct LognormalUtilities {
    Matrix location;
    Matrix scale;
};

/// Each u_ij is high_ij with probability p_high_ij, else low_ij.
struct TwoPointUtilities {
    Matrix low;
    Matrix high;
    Matrix p_high;
};

using UtilityGenerator = std::variant<FixedUtilities, LognormalUtilities, TwoPointUtilities>;

struct UtilityModel {
    Matrix mu;
    Matrix sigma2;
    UtilityGenerator generator;
    UtilityMode mode = UtilityMode::fixed;

    static UtilityModel fixed(Matrix values);
    static UtilityModel lognormal(Matrix location, Matrix scale);
    static UtilityModel two_point(Matrix low, Matrix high, Matrix p_high);
};

struct ProblemInstance {
    Matrix costs;
    std::vector<double> budgets;
    AllocationMatrix w0;
    AllocationMatrix w1;
    UtilityModel utility;

    [[nodiscard]] std::size_t items() const noexcept { return costs.rows(); }
    [[nodiscard]] std::size_t buyers() const noexcept { return costs.cols(); }
};

/// One message per violated invariant; empty when the instance is valid.
using ValidationReport = std::vector<std::string>;

[[nodiscard]] ValidationReport validate_instance(const ProblemInstance& inst);

[[nodiscard]] bool is_budget_satisfying(const AllocationMatrix& w, const Matrix& costs,
                                        std::span<const double> budgets);

[[nodiscard]] bool is_expected_budget_satisfying(const Matrix& x, const Matrix& costs,
                                                 std::span<const double> budgets);

/// Per-buyer spend sum_i c_ij w_ij.
[[nodiscard]] std::vector<double> buyer_spend(const AllocationMatrix& w, const Matrix& costs);

[[nodiscard]] double expected_tte(const ProblemInstance& inst);
[[nodiscard]] double realized_tte(const ProblemInstance& inst, const Matrix& utilities);

}  // namespace budgetab
