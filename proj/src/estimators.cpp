#include "budgetab/estimators.hpp"

#include <fmt/format.h>

#include "budgetab/error.hpp"

namespace budgetab {

namespace {

void check_shapes(const Matrix& observed, const AllocationMatrix& w1, const AllocationMatrix& w0,
                  const Matrix& probs) {
    const auto m = observed.rows();
    const auto n = observed.cols();
    if (w1.rows() != m || w1.cols() != n || w0.rows() != m || w0.cols() != n ||
        !probs.same_shape(m, n)) {
        fail(ErrorCode::dimension_mismatch, "estimator inputs differ in shape");
    }
}

/// sum over nonzero observations of o (w1 - w0) / p.
double weighted_difference(const Matrix& observed, const AllocationMatrix& w1,
                           const AllocationMatrix& w0, const Matrix& probs) {
    check_shapes(observed, w1, w0, probs);
    double total = 0.0;
    for (std::size_t i = 0; i < observed.rows(); ++i) {
        for (std::size_t j = 0; j < observed.cols(); ++j) {
            const double o = observed(i, j);
            if (o == 0.0) continue;
            const int d = int{w1(i, j)} - int{w0(i, j)};
            if (d == 0) continue;
            const double p = probs(i, j);
            if (!(p > 0.0)) {
                fail(ErrorCode::inconsistent_input,
                     fmt::format("observation at ({}, {}) has zero probability", i, j));
            }
            total += d * o / p;
        }
    }
    return total;
}

void check_support(const ProblemInstance& inst, const Matrix& x) {
    if (!x.same_shape(inst.items(), inst.buyers())) {
        fail(ErrorCode::dimension_mismatch, "design shape differs from instance");
    }
    for (std::size_t i = 0; i < inst.items(); ++i) {
        for (std::size_t j = 0; j < inst.buyers(); ++j) {
            if ((inst.w1(i, j) || inst.w0(i, j)) && !(x(i, j) > 0.0)) {
                fail(ErrorCode::inconsistent_input,
                     fmt::format("design has x = 0 on support entry ({}, {})", i, j));
            }
        }
    }
}

}  // namespace

double ht_estimator(const Matrix& observed, const AllocationMatrix& w1, const AllocationMatrix& w0,
                    const Matrix& inclusion) {
    return weighted_difference(observed, w1, w0, inclusion);
}

double plugin_estimator(const Matrix& observed, const AllocationMatrix& w1, const AllocationMatrix& w0,
                        const Matrix& x) {
    return weighted_difference(observed, w1, w0, x);
}

HajekEstimate hajek_estimator(const Matrix& observed, const AllocationMatrix& w1,
                              const AllocationMatrix& w0, const Matrix& inclusion,
                              const Matrix& normalizing_utilities) {
    check_shapes(observed, w1, w0, inclusion);
    if (!normalizing_utilities.same_shape(observed)) {
        fail(ErrorCode::dimension_mismatch, "normalizing utilities differ in shape");
    }
    double weighted[2] = {0.0, 0.0};
    double normalizer[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < observed.rows(); ++i) {
        for (std::size_t j = 0; j < observed.cols(); ++j) {
            const double o = observed(i, j);
            if (o == 0.0) continue;
            const bool arm[2] = {w0(i, j), w1(i, j)};
            if (!arm[0] && !arm[1]) continue;
            const double p = inclusion(i, j);
            const double u = normalizing_utilities(i, j);
            if (!(p > 0.0) || u == 0.0) {
                fail(ErrorCode::inconsistent_input,
                     fmt::format("observation at ({}, {}) has zero probability or utility", i, j));
            }
            for (int k = 0; k < 2; ++k) {
                if (!arm[k]) continue;
                weighted[k] += o / p;
                normalizer[k] += o / (p * u);
            }
        }
    }
    if (normalizer[0] == 0.0 || normalizer[1] == 0.0) return {};
    const double m = static_cast<double>(observed.rows());
    return {m * weighted[1] / normalizer[1] - m * weighted[0] / normalizer[0], true};
}

double variance_closed_form(const ProblemInstance& inst, const Matrix& x) {
    check_support(inst, x);
    const auto& mu = inst.utility.mu;
    const auto& s2 = inst.utility.sigma2;
    double inverse_term = 0.0;
    double mean_term = 0.0;
    double cross = 0.0;
    for (std::size_t i = 0; i < inst.items(); ++i) {
        double treated = 0.0;
        double control = 0.0;
        for (std::size_t j = 0; j < inst.buyers(); ++j) {
            const int support = int{inst.w1(i, j)} + int{inst.w0(i, j)};
            if (support == 0) continue;
            const double m2 = mu(i, j) * mu(i, j);
            inverse_term += (m2 + s2(i, j)) * support / x(i, j);
            mean_term += m2 * support;
            if (inst.w1(i, j)) treated += mu(i, j);
            if (inst.w0(i, j)) control += mu(i, j);
        }
        cross += treated * control;
    }
    return inverse_term - mean_term + 2.0 * cross;
}

double mse_upper_bound(const ProblemInstance& inst, const Matrix& x) {
    check_support(inst, x);
    const auto& mu = inst.utility.mu;
    double inverse_term = 0.0;
    double treated = 0.0;
    double control = 0.0;
    for (std::size_t i = 0; i < inst.items(); ++i) {
        for (std::size_t j = 0; j < inst.buyers(); ++j) {
            const int support = int{inst.w1(i, j)} + int{inst.w0(i, j)};
            if (support == 0) continue;
            inverse_term += (mu(i, j) * mu(i, j) + inst.utility.sigma2(i, j)) * support / x(i, j);
            if (inst.w1(i, j)) treated += mu(i, j);
            if (inst.w0(i, j)) control += mu(i, j);
        }
    }
    return inverse_term + treated * treated + control * control;
}

}  // namespace budgetab
