#pragma once

#include "budgetab/model.hpp"
#include "budgetab/solver.hpp"

namespace budgetab {

/// a_ij = (mu_ij^2 + sigma_ij^2)(w1_ij + w0_ij), the numerators of the
/// variance objective.
class DesignWeights : public Matrix {
public:
    using Matrix::Matrix;
    DesignWeights() = default;
    explicit DesignWeights(Matrix m) : Matrix(std::move(m)) {}
};

[[nodiscard]] DesignWeights design_weights(const ProblemInstance& inst);

/// X = p W1 + (1 - p) W0.
[[nodiscard]] ExperimentMatrix bernoulli_design(const AllocationMatrix& w0,
                                                const AllocationMatrix& w1, double p = 0.5);

/// Row-normalized closed form of the budget-free problem:
/// x_ij proportional to (w1_ij + w0_ij) sqrt(mu_ij^2 + sigma_ij^2).
[[nodiscard]] ExperimentMatrix unconstrained_optimal_design(const ProblemInstance& inst);

struct ConstrainedDesign {
    ExperimentMatrix x;
    SolverCertificate certificate;
};

/// Budget-constrained variance-minimizing design. Check
/// `certificate.converged`; a non-converged result carries the best iterate.
[[nodiscard]] ConstrainedDesign constrained_optimal_design(const ProblemInstance& inst,
                                                           const SolverConfig& cfg = {});

}  // namespace budgetab
