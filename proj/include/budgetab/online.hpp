#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "budgetab/model.hpp"
#include "budgetab/rng.hpp"
#include "budgetab/solver.hpp"

namespace budgetab {

/// One revealed item of a replayed stream.
struct StreamItem {
    std::size_t step = 0;   ///< arrival position
    std::size_t index = 0;  ///< row in the source instance
    std::span<const double> costs;
    int w0 = -1;  ///< control buyer, -1 if none
    int w1 = -1;  ///< treatment buyer, -1 if none
};

/// Iterates the items of an instance in the order given by a permutation
/// of [0, m). The instance must outlive the replay.
class StreamReplay {
public:
    StreamReplay(const ProblemInstance& inst, std::vector<std::size_t> order);

    [[nodiscard]] bool next(StreamItem& item);
    [[nodiscard]] std::size_t size() const noexcept { return order_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& order() const noexcept { return order_; }

private:
    const ProblemInstance* inst_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

/// Throws ErrorCode::invalid_argument unless `order` is a permutation of [0, m).
[[nodiscard]] StreamReplay replay_stream(const ProblemInstance& inst, std::vector<std::size_t> order);

/// Copy of the instance with rows in arrival order.
[[nodiscard]] ProblemInstance permute_items(const ProblemInstance& inst, std::span<const std::size_t> order);

/// Everything the stream has revealed and spent after `step` steps. Matrices
/// are sized for the whole stream (m is known up front); rows at or past
/// `step` are still zero.
struct StreamState {
    std::size_t step = 0;
    Matrix costs;
    AllocationMatrix w0;
    AllocationMatrix w1;
    std::vector<double> spent;    ///< b'_j
    ExperimentMatrix x;           ///< rows fixed once their step completes
    ObservationMatrix observed;
};

struct OnlineStep {
    std::size_t step = 0;
    int sampled = -1;       ///< buyer drawn from the step's design row, -1 on abort
    bool feasible = false;  ///< passed the budget test and was allocated
    double spend = 0.0;     ///< sampled buyer's spend after the step (0 on abort)
};

struct OnlineResult {
    ExperimentMatrix x;
    ObservationMatrix observed;
    double estimate = 0.0;  ///< plug-in estimate against the rows of x
    std::vector<OnlineStep> trace;
    std::size_t solver_calls = 0;
};

using OnlineObserver = std::function<void(const OnlineStep&)>;

/// Streaming design: at step i the variance problem over rows 1..i is solved
/// under budgets i b / m, row i of the solution is sampled, and the item is
/// allocated only if the sampled buyer can still afford it. Items arrive in
/// row order. A solver failure throws ErrorCode::solver naming the step;
/// steps already completed have been passed to `observer`.
[[nodiscard]] OnlineResult online_run(const ProblemInstance& inst, const SolverConfig& cfg, Rng& rng,
                                      const OnlineObserver& observer = {});

/// The design rows online_run uses. They depend only on the revealed rows and
/// the budgets, never on draws, so they can be computed once and reused.
struct OnlinePlan {
    ExperimentMatrix x;
    std::size_t solver_calls = 0;
};

[[nodiscard]] OnlinePlan plan_online(const ProblemInstance& inst, const SolverConfig& cfg);

/// Runs the sampling half of online_run against a precomputed plan; draws
/// are consumed in the same order, so online_run(inst, cfg, rng) and
/// execute_online(inst, plan_online(inst, cfg), rng) agree exactly.
[[nodiscard]] OnlineResult execute_online(const ProblemInstance& inst, const OnlinePlan& plan, Rng& rng,
                                          const OnlineObserver& observer = {});

}  // namespace budgetab
