#include "budgetab/design.hpp"

#include <cmath>

#include "budgetab/error.hpp"

namespace budgetab {

DesignWeights design_weights(const ProblemInstance& inst) {
    const auto m = inst.items();
    const auto n = inst.buyers();
    DesignWeights a(m, n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const int support = int{inst.w1(i, j)} + int{inst.w0(i, j)};
            if (support == 0) continue;
            const double mu = inst.utility.mu(i, j);
            a(i, j) = (mu * mu + inst.utility.sigma2(i, j)) * support;
        }
    }
    return a;
}

ExperimentMatrix bernoulli_design(const AllocationMatrix& w0, const AllocationMatrix& w1, double p) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::invalid_argument, "bernoulli probability must lie in [0, 1]");
    if (w0.rows() != w1.rows() || w0.cols() != w1.cols()) {
        fail(ErrorCode::dimension_mismatch, "w0 and w1 differ in shape");
    }
    ExperimentMatrix x(w1.rows(), w1.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            x(i, j) = p * w1(i, j) + (1.0 - p) * w0(i, j);
        }
    }
    return x;
}

ExperimentMatrix unconstrained_optimal_design(const ProblemInstance& inst) {
    const auto m = inst.items();
    const auto n = inst.buyers();
    ExperimentMatrix x(m, n, 0.0);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < m; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const int support = int{inst.w1(i, j)} + int{inst.w0(i, j)};
            const double mu = inst.utility.mu(i, j);
            score[j] = support * std::sqrt(mu * mu + inst.utility.sigma2(i, j));
            total += score[j];
        }
        if (!(total > 0.0)) continue;
        for (std::size_t j = 0; j < n; ++j) x(i, j) = score[j] / total;
    }
    return x;
}

ConstrainedDesign constrained_optimal_design(const ProblemInstance& inst, const SolverConfig& cfg) {
    auto solved = solve_separable(design_weights(inst), inst.costs, inst.budgets, cfg);
    return {ExperimentMatrix(std::move(solved.x)), std::move(solved.certificate)};
}

}  // namespace budgetab
