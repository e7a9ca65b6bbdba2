#include "budgetab/sampling.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "budgetab/error.hpp"

namespace budgetab {

RowSampler::RowSampler(const Matrix& x) {
    offsets_.reserve(x.rows() + 1);
    offsets_.push_back(0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double cum = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double p = x(i, j);
            if (p < 0.0 || p > 1.0 + kFeasibilityTolerance) {
                fail(ErrorCode::invalid_argument, fmt::format("design entry ({}, {}) = {} outside [0, 1]", i, j, p));
            }
            if (p == 0.0) continue;
            cum += p;
            buyers_.push_back(static_cast<int>(j));
            cumulative_.push_back(cum);
        }
        if (cum > 1.0 + kFeasibilityTolerance) {
            fail(ErrorCode::invalid_argument, fmt::format("design row {} sums to {} > 1", i, cum));
        }
        offsets_.push_back(buyers_.size());
    }
}

int RowSampler::pick(std::size_t i, double u) const noexcept {
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        if (u < cumulative_[k]) return buyers_[k];
    }
    return -1;
}

void RowSampler::sample_all(std::span<int> out, Rng& rng) const {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sample(i, rng);
}

AllocationMatrix sample_allocation(const Matrix& x, Rng& rng) {
    const RowSampler sampler(x);
    std::vector<int> assignment(x.rows());
    sampler.sample_all(assignment, rng);
    return AllocationMatrix::from_assignment(x.cols(), assignment);
}

double draw_utility(const UtilityModel& utility, std::size_t i, std::size_t j, Rng& rng) {
    if (utility.mode == UtilityMode::fixed) return utility.mu(i, j);
    struct Visitor {
        std::size_t i, j;
        Rng& rng;
        double operator()(const FixedUtilities& f) const { return f.values(i, j); }
        double operator()(const LognormalUtilities& g) const {
            std::normal_distribution<double> z(0.0, 1.0);
            return std::exp(g.location(i, j) + g.scale(i, j) * z(rng));
        }
        double operator()(const TwoPointUtilities& g) const {
            return uniform01(rng) < g.p_high(i, j) ? g.high(i, j) : g.low(i, j);
        }
    };
    return std::visit(Visitor{i, j, rng}, utility.generator);
}

ObservationMatrix observe(const AllocationMatrix& realized, const UtilityModel& utility, Rng& rng) {
    if (!utility.mu.same_shape(realized.rows(), realized.cols())) {
        fail(ErrorCode::dimension_mismatch, "observe: allocation and utility shapes differ");
    }
    ObservationMatrix obs{Matrix(realized.rows(), realized.cols(), 0.0), realized};
    for (std::size_t i = 0; i < realized.rows(); ++i) {
        for (std::size_t j = 0; j < realized.cols(); ++j) {
            if (realized(i, j)) obs.values(i, j) = draw_utility(utility, i, j, rng);
        }
    }
    return obs;
}

InclusionEstimate estimate_inclusion_probs(const ProblemInstance& inst, const Matrix& x,
                                           ThrottleKind throttle, std::size_t replications,
                                           std::uint64_t seed) {
    if (replications < 1) fail(ErrorCode::invalid_argument, "replications must be at least 1");
    if (!x.same_shape(inst.costs)) fail(ErrorCode::dimension_mismatch, "design shape differs from instance");
    const auto m = inst.items();
    const auto n = inst.buyers();
    const RowSampler sampler(x);
    std::vector<std::size_t> hits(m * n, 0);
    std::vector<int> assignment(m);
    std::vector<std::size_t> order(m);
    std::vector<double> spend;
    std::vector<char> closed;
    for (std::size_t r = 0; r < replications; ++r) {
        auto rng = make_rng(seed, {r});
        sampler.sample_all(assignment, rng);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (throttle == ThrottleKind::random) detail::shuffle_order(order, rng);
        const auto rule = throttle == ThrottleKind::greedy ? ThrottleRule::greedy : ThrottleRule::prefix;
        detail::throttle_assignment(assignment, inst.costs, inst.budgets, order, rule, spend, closed);
        for (std::size_t i = 0; i < m; ++i) {
            if (assignment[i] >= 0) ++hits[i * n + static_cast<std::size_t>(assignment[i])];
        }
    }
    InclusionEstimate est{Matrix(m, n, 0.0), Matrix(m, n, 0.0), replications};
    const double reps = static_cast<double>(replications);
    for (std::size_t k = 0; k < m * n; ++k) {
        const double p = static_cast<double>(hits[k]) / reps;
        est.p.data()[k] = p;
        est.se.data()[k] = std::sqrt(p * (1.0 - p) / reps);
    }
    return est;
}

}  // namespace budgetab
