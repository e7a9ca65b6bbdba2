#include "budgetab/online.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "budgetab/design.hpp"
#include "budgetab/error.hpp"
#include "budgetab/estimators.hpp"
#include "budgetab/sampling.hpp"

namespace budgetab {

StreamReplay::StreamReplay(const ProblemInstance& inst, std::vector<std::size_t> order)
    : inst_(&inst), order_(std::move(order)) {
    const auto m = inst.items();
    if (order_.size() != m) {
        fail(ErrorCode::invalid_argument, fmt::format("permutation has {} entries, instance has {} items", order_.size(), m));
    }
    std::vector<char> seen(m, 0);
    for (const auto i : order_) {
        if (i >= m || seen[i]) fail(ErrorCode::invalid_argument, fmt::format("invalid permutation entry {}", i));
        seen[i] = 1;
    }
}

bool StreamReplay::next(StreamItem& item) {
    if (pos_ == order_.size()) return false;
    const auto i = order_[pos_];
    item.step = pos_;
    item.index = i;
    item.costs = inst_->costs.row(i);
    item.w0 = inst_->w0.buyer(i);
    item.w1 = inst_->w1.buyer(i);
    ++pos_;
    return true;
}

StreamReplay replay_stream(const ProblemInstance& inst, std::vector<std::size_t> order) {
    return StreamReplay(inst, std::move(order));
}

ProblemInstance permute_items(const ProblemInstance& inst, std::span<const std::size_t> order) {
    const StreamReplay check(inst, {order.begin(), order.end()});
    const auto m = inst.items();
    const auto n = inst.buyers();
    ProblemInstance out;
    out.costs = Matrix(m, n);
    out.budgets = inst.budgets;
    out.w0 = AllocationMatrix(m, n);
    out.w1 = AllocationMatrix(m, n);
    out.utility.mode = inst.utility.mode;
    out.utility.mu = Matrix(m, n);
    out.utility.sigma2 = Matrix(m, n);
    auto permute = [&](const Matrix& src) {
        Matrix dst(m, n);
        for (std::size_t k = 0; k < m; ++k) std::ranges::copy(src.row(order[k]), dst.row(k).begin());
        return dst;
    };
    for (std::size_t k = 0; k < m; ++k) {
        const auto i = order[k];
        for (std::size_t j = 0; j < n; ++j) {
            out.costs(k, j) = inst.costs(i, j);
            out.w0.set(k, j, inst.w0(i, j));
            out.w1.set(k, j, inst.w1(i, j));
        }
    }
    out.utility.mu = permute(inst.utility.mu);
    out.utility.sigma2 = permute(inst.utility.sigma2);
    struct Visitor {
        decltype(permute)& p;
        UtilityGenerator operator()(const FixedUtilities& f) const { return FixedUtilities{p(f.values)}; }
        UtilityGenerator operator()(const LognormalUtilities& l) const {
            return LognormalUtilities{p(l.location), p(l.scale)};
        }
        UtilityGenerator operator()(const TwoPointUtilities& t) const {
            return TwoPointUtilities{p(t.low), p(t.high), p(t.p_high)};
        }
    };
    out.utility.generator = std::visit(Visitor{permute}, inst.utility.generator);
    return out;
}

namespace {

StreamState start_stream(const ProblemInstance& inst) {
    const auto m = inst.items();
    const auto n = inst.buyers();
    return {0,
            Matrix(m, n, 0.0),
            AllocationMatrix(m, n),
            AllocationMatrix(m, n),
            std::vector<double>(n, 0.0),
            ExperimentMatrix(m, n, 0.0),
            {Matrix(m, n, 0.0), AllocationMatrix(m, n)}};
}

void reveal(StreamState& state, const ProblemInstance& inst) {
    const auto i = state.step;
    for (std::size_t j = 0; j < inst.buyers(); ++j) {
        state.costs(i, j) = inst.costs(i, j);
        state.w0.set(i, j, inst.w0(i, j));
        state.w1.set(i, j, inst.w1(i, j));
    }
}

/// Samples the current row, applies the budget test, observes, and closes
/// the step.
OnlineStep allocate(StreamState& state, const ProblemInstance& inst, Rng& rng) {
    const auto i = state.step;
    OnlineStep step{i, -1, false, 0.0};
    const double u = uniform01(rng);
    double cum = 0.0;
    for (std::size_t j = 0; j < inst.buyers(); ++j) {
        const double p = state.x(i, j);
        if (p == 0.0) continue;
        cum += p;
        if (u < cum) {
            step.sampled = static_cast<int>(j);
            break;
        }
    }
    if (step.sampled >= 0) {
        const auto j = static_cast<std::size_t>(step.sampled);
        const double next = state.spent[j] + state.costs(i, j);
        step.feasible = next <= inst.budgets[j] + kFeasibilityTolerance;
        if (step.feasible) {
            state.spent[j] = next;
            state.observed.realized.set(i, j, true);
            state.observed.values(i, j) = draw_utility(inst.utility, i, j, rng);
        }
        step.spend = state.spent[j];
    }
    ++state.step;
    return step;
}

OnlineResult finish(StreamState&& state, std::vector<OnlineStep> trace, std::size_t calls) {
    OnlineResult out;
    out.estimate = plugin_estimator(state.observed.values, state.w1, state.w0, state.x);
    out.x = std::move(state.x);
    out.observed = std::move(state.observed);
    out.trace = std::move(trace);
    out.solver_calls = calls;
    return out;
}

/// Solves the revealed prefix under scaled budgets and fixes row `step`.
class PrefixSolver {
public:
    PrefixSolver(const ProblemInstance& inst, const SolverConfig& cfg)
        : inst_(inst), cfg_(cfg), weights_(design_weights(inst)) {}

    void solve_row(StreamState& state) {
        const auto i = state.step;
        const auto rows = i + 1;
        const auto n = inst_.buyers();
        Matrix a(rows, n);
        Matrix c(rows, n);
        for (std::size_t k = 0; k < rows; ++k) {
            std::ranges::copy(weights_.row(k), a.row(k).begin());
            std::ranges::copy(state.costs.row(k), c.row(k).begin());
        }
        std::vector<double> budgets(n);
        const double scale = static_cast<double>(rows) / static_cast<double>(inst_.items());
        for (std::size_t j = 0; j < n; ++j) budgets[j] = inst_.budgets[j] * scale;
        bool any = false;
        for (double v : a.row(i)) any = any || v > 0.0;
        ++calls_;
        if (!any) return;  // nothing to allocate; row stays zero
        auto res = solve_separable(a, c, budgets, cfg_);
        if (!res.certificate.converged) {
            fail(ErrorCode::solver, fmt::format("online step {}: solver did not converge (kkt residual {:.3g})", i,
                                                res.certificate.kkt_residual));
        }
        cfg_.initial_budget_duals = res.certificate.duals.budget;
        std::ranges::copy(res.x.row(i), state.x.row(i).begin());
    }

    [[nodiscard]] std::size_t calls() const noexcept { return calls_; }

private:
    const ProblemInstance& inst_;
    SolverConfig cfg_;
    DesignWeights weights_;
    std::size_t calls_ = 0;
};

}  // namespace

OnlineResult online_run(const ProblemInstance& inst, const SolverConfig& cfg, Rng& rng,
                        const OnlineObserver& observer) {
    cfg.validate();
    auto state = start_stream(inst);
    PrefixSolver solver(inst, cfg);
    std::vector<OnlineStep> trace;
    trace.reserve(inst.items());
    while (state.step < inst.items()) {
        reveal(state, inst);
        solver.solve_row(state);
        trace.push_back(allocate(state, inst, rng));
        if (observer) observer(trace.back());
    }
    return finish(std::move(state), std::move(trace), solver.calls());
}

OnlinePlan plan_online(const ProblemInstance& inst, const SolverConfig& cfg) {
    cfg.validate();
    auto state = start_stream(inst);
    PrefixSolver solver(inst, cfg);
    while (state.step < inst.items()) {
        reveal(state, inst);
        solver.solve_row(state);
        ++state.step;
    }
    return {std::move(state.x), solver.calls()};
}

OnlineResult execute_online(const ProblemInstance& inst, const OnlinePlan& plan, Rng& rng,
                            const OnlineObserver& observer) {
    if (!plan.x.same_shape(inst.costs)) fail(ErrorCode::dimension_mismatch, "online plan shape differs from instance");
    auto state = start_stream(inst);
    state.x = plan.x;
    std::vector<OnlineStep> trace;
    trace.reserve(inst.items());
    while (state.step < inst.items()) {
        reveal(state, inst);
        trace.push_back(allocate(state, inst, rng));
        if (observer) observer(trace.back());
    }
    return finish(std::move(state), std::move(trace), plan.solver_calls);
}

}  // namespace budgetab
