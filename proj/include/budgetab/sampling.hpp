#pragma once

#include <cstdint>
#include <vector>

#include "budgetab/model.hpp"
#include "budgetab/rng.hpp"
#include "budgetab/throttle.hpp"

namespace budgetab {

/// Each row independently picks buyer j with probability x_ij, or no buyer
/// with probability 1 - sum_j x_ij.
[[nodiscard]] AllocationMatrix sample_allocation(const Matrix& x, Rng& rng);

/// Draws u_ij for every realized edge (or reads the fixed realization) and
/// masks everything else to zero.
[[nodiscard]] ObservationMatrix observe(const AllocationMatrix& realized, const UtilityModel& utility,
                                        Rng& rng);

/// One draw of u_ij under the model.
[[nodiscard]] double draw_utility(const UtilityModel& utility, std::size_t i, std::size_t j, Rng& rng);

struct InclusionEstimate {
    Matrix p;   ///< fraction of replications where (i, j) survived throttling
    Matrix se;  ///< binomial standard error of each entry
    std::size_t replications = 0;
};

/// Monte-Carlo estimate of p_ij = Pr(M(W)_ij = 1) for W ~ X. Replication r
/// draws from the stream (seed, r), so the result is reproducible.
[[nodiscard]] InclusionEstimate estimate_inclusion_probs(const ProblemInstance& inst, const Matrix& x,
                                                         ThrottleKind throttle,
                                                         std::size_t replications,
                                                         std::uint64_t seed);

/// Categorical sampler over the nonzero entries of each design row.
class RowSampler {
public:
    explicit RowSampler(const Matrix& x);

    /// Buyer for item i given a uniform draw in [0, 1), or -1 to abort.
    [[nodiscard]] int pick(std::size_t i, double u) const noexcept;
    [[nodiscard]] int sample(std::size_t i, Rng& rng) const { return pick(i, uniform01(rng)); }
    void sample_all(std::span<int> out, Rng& rng) const;

    [[nodiscard]] std::size_t items() const noexcept { return offsets_.size() - 1; }

private:
    std::vector<std::size_t> offsets_;
    std::vector<int> buyers_;
    std::vector<double> cumulative_;
};

}  // namespace budgetab
