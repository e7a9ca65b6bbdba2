#include "budgetab/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "budgetab/design.hpp"
#include "budgetab/error.hpp"
#include "budgetab/online.hpp"
#include "budgetab/rng.hpp"
#include "budgetab/sampling.hpp"

namespace budgetab {

namespace {

/// Runs body(k) for k in [0, count) on up to `jobs` threads. The first
/// exception (lowest k is not guaranteed) is rethrown after all workers stop.
template <typename Body>
void parallel_for(std::size_t count, std::size_t jobs, Body&& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (!stop) {
            const auto k = next++;
            if (k >= count) break;
            try {
                body(k);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                stop = true;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

constexpr double kLogScale = 0.25;

double lognormal_draw(Rng& rng) {
    return std::exp(kLogScale * std::normal_distribution<double>(0.0, 1.0)(rng));
}

}  // namespace

std::string_view to_string(DesignKind kind) noexcept {
    switch (kind) {
        case DesignKind::bernoulli: return "bernoulli";
        case DesignKind::unconstrained: return "unconstrained";
        case DesignKind::constrained: return "constrained";
        case DesignKind::online: return "online";
    }
    return "?";
}

std::string_view to_string(ThrottleKind kind) noexcept {
    switch (kind) {
        case ThrottleKind::sequential: return "sequential";
        case ThrottleKind::random: return "random";
        case ThrottleKind::greedy: return "greedy";
    }
    return "?";
}

std::string_view to_string(EstimatorKind kind) noexcept {
    switch (kind) {
        case EstimatorKind::plugin: return "plugin";
        case EstimatorKind::horvitz_thompson: return "ht";
        case EstimatorKind::hajek: return "hajek";
    }
    return "?";
}

DesignKind parse_design_kind(std::string_view name) {
    for (auto k : {DesignKind::bernoulli, DesignKind::unconstrained, DesignKind::constrained, DesignKind::online}) {
        if (name == to_string(k)) return k;
    }
    fail(ErrorCode::config, fmt::format("design: unknown kind '{}'", name));
}

ThrottleKind parse_throttle_kind(std::string_view name) {
    for (auto k : {ThrottleKind::sequential, ThrottleKind::random, ThrottleKind::greedy}) {
        if (name == to_string(k)) return k;
    }
    fail(ErrorCode::config, fmt::format("throttle: unknown kind '{}'", name));
}

EstimatorKind parse_estimator_kind(std::string_view name) {
    for (auto k : {EstimatorKind::plugin, EstimatorKind::horvitz_thompson, EstimatorKind::hajek}) {
        if (name == to_string(k)) return k;
    }
    fail(ErrorCode::config, fmt::format("estimator: unknown kind '{}'", name));
}

void SimConfig::validate() const {
    if (n < 1) fail(ErrorCode::config, "n must be at least 1");
    if (!(r1 > 0.0) || !std::isfinite(r1)) fail(ErrorCode::config, fmt::format("r1 must be positive (got {})", r1));
    if (!(r2 > 0.0) || !std::isfinite(r2)) fail(ErrorCode::config, fmt::format("r2 must be positive (got {})", r2));
    if (!(r3 >= 0.0 && r3 <= 1.0)) fail(ErrorCode::config, fmt::format("r3 must lie in [0, 1] (got {})", r3));
    if (trials < 1) fail(ErrorCode::config, "trials must be at least 1");
    if (instances < 1) fail(ErrorCode::config, "instances must be at least 1");
    if (!(bernoulli_p >= 0.0 && bernoulli_p <= 1.0)) {
        fail(ErrorCode::config, fmt::format("p must lie in [0, 1] (got {})", bernoulli_p));
    }
    if (inclusion_reps < 1) fail(ErrorCode::config, "inclusion_reps must be at least 1");
    if (jobs < 1) fail(ErrorCode::config, "jobs must be at least 1");
    solver.validate();
}

std::size_t SimConfig::items() const {
    return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * r1 - 1e-9));
}

ThrottleKind SimConfig::effective_throttle() const noexcept {
    return design == DesignKind::online ? ThrottleKind::greedy : throttle;
}

ProblemInstance generate_instance(const SimConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto n = cfg.n;
    const auto m = cfg.items();
    const auto consistent = static_cast<std::size_t>(std::ceil(static_cast<double>(m) * cfg.r3 - 1e-9));
    ProblemInstance inst;
    inst.costs = Matrix(m, n);
    Matrix u(m, n);
    std::vector<int> a1(m), a0(m);
    std::uniform_int_distribution<int> buyer(0, static_cast<int>(n) - 1);
    for (std::size_t i = 0; i < m; ++i) {
        auto rng = make_rng(seed, {i});
        a1[i] = buyer(rng);
        a0[i] = buyer(rng);
        if (i < consistent) a0[i] = a1[i];
        for (std::size_t j = 0; j < n; ++j) inst.costs(i, j) = lognormal_draw(rng);
        for (std::size_t j = 0; j < n; ++j) u(i, j) = lognormal_draw(rng);
        u(i, static_cast<std::size_t>(a1[i])) *= 2.0;
    }
    inst.w1 = AllocationMatrix::from_assignment(n, a1);
    inst.w0 = AllocationMatrix::from_assignment(n, a0);
    const auto s1 = buyer_spend(inst.w1, inst.costs);
    const auto s0 = buyer_spend(inst.w0, inst.costs);
    inst.budgets.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double b = std::max(s1[j], s0[j]);
        if (b == 0.0) {
            // Buyer unused by both allocations; any positive budget is inert.
            b = inst.costs(0, j);
            for (std::size_t i = 1; i < m; ++i) b = std::min(b, inst.costs(i, j));
        }
        inst.budgets[j] = cfg.r2 * b;
    }
    if (cfg.mode == UtilityMode::fixed) {
        inst.utility = UtilityModel::fixed(std::move(u));
    } else {
        Matrix location(m, n, 0.0);
        for (std::size_t i = 0; i < m; ++i) location(i, static_cast<std::size_t>(a1[i])) = std::log(2.0);
        inst.utility = UtilityModel::lognormal(std::move(location), Matrix(m, n, kLogScale));
    }
    return inst;
}

ExperimentMatrix build_design(const ProblemInstance& inst, const SimConfig& cfg) {
    switch (cfg.design) {
        case DesignKind::bernoulli: return bernoulli_design(inst.w0, inst.w1, cfg.bernoulli_p);
        case DesignKind::unconstrained: return unconstrained_optimal_design(inst);
        case DesignKind::constrained: {
            auto d = constrained_optimal_design(inst, cfg.solver);
            if (!d.certificate.converged) {
                fail(ErrorCode::solver, fmt::format("constrained design did not converge (kkt residual {:.3g})",
                                                    d.certificate.kkt_residual));
            }
            return std::move(d.x);
        }
        case DesignKind::online: return plan_online(inst, cfg.solver).x;
    }
    fail(ErrorCode::invalid_argument, "unknown design kind");
}

double target_tte(const ProblemInstance& inst) { return expected_tte(inst); }

namespace {

/// Per-trial kernel on assignment vectors; equivalent to sample_allocation,
/// the configured throttle, observe and the estimator, with one generator
/// per trial.
class TrialKernel {
public:
    TrialKernel(const ProblemInstance& inst, const Matrix& x, const SimConfig& cfg)
        : inst_(inst), cfg_(cfg), sampler_(x), w1_(inst.w1.assignment()), w0_(inst.w0.assignment()) {
        const auto m = inst.items();
        const auto n = inst.buyers();
        if (!x.same_shape(m, n)) fail(ErrorCode::dimension_mismatch, "design shape differs from instance");
        if (cfg.estimator == EstimatorKind::plugin) {
            weight_ = x;
        } else {
            weight_ = estimate_inclusion_probs(inst, x, cfg.effective_throttle(), cfg.inclusion_reps,
                                               derive_seed(cfg.seed, {~std::uint64_t{0}}))
                          .p;
        }
    }

    double operator()(std::size_t trial, std::vector<int>& assignment, std::vector<std::size_t>& order,
                      std::vector<double>& spend, std::vector<char>& closed) const {
        const auto m = inst_.items();
        auto rng = make_rng(cfg_.seed, {trial});
        if (cfg_.design == DesignKind::online) {
            return online_trial(rng, assignment, spend);
        }
        sampler_.sample_all(assignment, rng);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto kind = cfg_.effective_throttle();
        if (kind == ThrottleKind::random) detail::shuffle_order(order, rng);
        const auto rule = kind == ThrottleKind::greedy ? ThrottleRule::greedy : ThrottleRule::prefix;
        detail::throttle_assignment(assignment, inst_.costs, inst_.budgets, order, rule, spend, closed);
        Accumulator acc;
        for (std::size_t i = 0; i < m; ++i) {
            if (assignment[i] >= 0) add(acc, trial, i, static_cast<std::size_t>(assignment[i]), rng);
        }
        return acc.value(m, cfg_.estimator);
    }

private:
    struct Accumulator {
        double plain[2] = {0.0, 0.0};
        double normalizer[2] = {0.0, 0.0};

        [[nodiscard]] double value(std::size_t m, EstimatorKind kind) const {
            if (kind != EstimatorKind::hajek) return plain[1] - plain[0];
            // An empty arm has no normalizer; its term is taken as 0.
            const double md = static_cast<double>(m);
            const double t = normalizer[1] > 0.0 ? md * plain[1] / normalizer[1] : 0.0;
            const double c = normalizer[0] > 0.0 ? md * plain[0] / normalizer[0] : 0.0;
            return t - c;
        }
    };

    void add(Accumulator& acc, std::size_t trial, std::size_t i, std::size_t j, Rng& rng) const {
        const bool treated = w1_[i] == static_cast<int>(j);
        const bool control = w0_[i] == static_cast<int>(j);
        if (treated == control && cfg_.estimator != EstimatorKind::hajek) {
            // Consistent or off-support edge: contributes nothing, but the
            // utility draw is still consumed to keep streams aligned.
            if (inst_.utility.mode == UtilityMode::resample) (void)draw_utility(inst_.utility, i, j, rng);
            return;
        }
        const double o = draw_utility(inst_.utility, i, j, rng);
        if (o == 0.0 || (!treated && !control)) return;
        const double p = weight_(i, j);
        if (!(p > 0.0)) {
            fail(ErrorCode::inconsistent_input,
                 fmt::format("trial {}: observation at ({}, {}) has zero probability", trial, i, j));
        }
        if (treated) {
            acc.plain[1] += o / p;
            acc.normalizer[1] += o / (p * inst_.utility.mu(i, j));
        }
        if (control) {
            acc.plain[0] += o / p;
            acc.normalizer[0] += o / (p * inst_.utility.mu(i, j));
        }
    }

    double online_trial(Rng& rng, std::vector<int>& assignment, std::vector<double>& spend) const {
        const auto m = inst_.items();
        spend.assign(inst_.buyers(), 0.0);
        Accumulator acc;
        for (std::size_t i = 0; i < m; ++i) {
            const int j = sampler_.pick(i, uniform01(rng));
            assignment[i] = -1;
            if (j < 0) continue;
            const auto b = static_cast<std::size_t>(j);
            const double next = spend[b] + inst_.costs(i, b);
            if (next > inst_.budgets[b] + kFeasibilityTolerance) continue;
            spend[b] = next;
            assignment[i] = j;
            // Every allocated edge draws a utility, as the stream observes it.
            const bool treated = w1_[i] == j;
            const bool control = w0_[i] == j;
            const double o = draw_utility(inst_.utility, i, b, rng);
            if (o == 0.0 || (!treated && !control)) continue;
            if (treated == control && cfg_.estimator != EstimatorKind::hajek) continue;
            const double p = weight_(i, b);
            if (!(p > 0.0)) fail(ErrorCode::inconsistent_input, "online trial observed a zero-probability edge");
            if (treated) {
                acc.plain[1] += o / p;
                acc.normalizer[1] += o / (p * inst_.utility.mu(i, b));
            }
            if (control) {
                acc.plain[0] += o / p;
                acc.normalizer[0] += o / (p * inst_.utility.mu(i, b));
            }
        }
        return acc.value(m, cfg_.estimator);
    }

    const ProblemInstance& inst_;
    const SimConfig& cfg_;
    RowSampler sampler_;
    std::vector<int> w1_;
    std::vector<int> w0_;
    Matrix weight_;
};

}  // namespace

std::vector<double> trial_estimates(const ProblemInstance& inst, const Matrix& x, const SimConfig& cfg) {
    cfg.validate();
    const TrialKernel kernel(inst, x, cfg);
    std::vector<double> out(cfg.trials);
    const auto m = inst.items();
    const auto chunks = std::min(cfg.jobs, cfg.trials);
    parallel_for(chunks, chunks, [&](std::size_t c) {
        std::vector<int> assignment(m);
        std::vector<std::size_t> order(m);
        std::vector<double> spend;
        std::vector<char> closed;
        for (std::size_t t = c; t < cfg.trials; t += chunks) out[t] = kernel(t, assignment, order, spend, closed);
    });
    return out;
}

SummaryStats summarize(std::span<const double> estimates, double tte) {
    SummaryStats s;
    const auto t = static_cast<double>(estimates.size());
    if (estimates.empty()) fail(ErrorCode::invalid_argument, "summarize: no estimates");
    s.tte = tte;
    s.trials = estimates.size();
    s.instances = 1;
    s.mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / t;
    double m2 = 0.0;
    double m4 = 0.0;
    double sq = 0.0;
    for (double e : estimates) {
        const double d = e - s.mean;
        m2 += d * d;
        m4 += d * d * d * d;
        sq += (e - tte) * (e - tte);
    }
    s.variance = m2 / t;
    m4 /= t;
    s.stddev = std::sqrt(s.variance);
    s.bias = s.mean - tte;
    s.abs_bias = std::abs(s.bias);
    s.mse = sq / t;
    s.bias_se = std::sqrt(s.variance / t);
    s.stddev_se = s.stddev > 0.0 ? std::sqrt(std::max(0.0, m4 - s.variance * s.variance) / t) / (2.0 * s.stddev) : 0.0;
    s.rel_bias = tte != 0.0 ? s.bias / std::abs(tte) : 0.0;
    s.rel_stddev = tte != 0.0 ? s.stddev / std::abs(tte) : 0.0;
    return s;
}

SummaryStats average(std::span<const SummaryStats> per_instance) {
    if (per_instance.empty()) fail(ErrorCode::invalid_argument, "average: no statistics");
    SummaryStats a;
    double bias_var = 0.0;
    double std_var = 0.0;
    for (const auto& s : per_instance) {
        a.tte += s.tte;
        a.mean += s.mean;
        a.bias += s.bias;
        a.abs_bias += s.abs_bias;
        a.variance += s.variance;
        a.stddev += s.stddev;
        a.mse += s.mse;
        bias_var += s.bias_se * s.bias_se;
        std_var += s.stddev_se * s.stddev_se;
        a.trials = s.trials;
    }
    const auto k = static_cast<double>(per_instance.size());
    a.tte /= k;
    a.mean /= k;
    a.bias /= k;
    a.abs_bias /= k;
    a.variance /= k;
    a.stddev /= k;
    a.mse /= k;
    a.bias_se = std::sqrt(bias_var) / k;
    a.stddev_se = std::sqrt(std_var) / k;
    a.rel_bias = a.tte != 0.0 ? a.bias / std::abs(a.tte) : 0.0;
    a.rel_stddev = a.tte != 0.0 ? a.stddev / std::abs(a.tte) : 0.0;
    a.instances = per_instance.size();
    return a;
}

SummaryStats run_trials(const ProblemInstance& inst, const SimConfig& cfg) {
    const auto x = build_design(inst, cfg);
    return summarize(trial_estimates(inst, x, cfg), target_tte(inst));
}

void SweepGrid::validate() const {
    base.validate();
    if (r1.empty() || r2.empty() || r3.empty()) fail(ErrorCode::config, "sweep grid needs at least one value of r1, r2 and r3");
    if (designs.empty()) fail(ErrorCode::config, "sweep grid needs at least one design");
    for (double v : r1) {
        if (!(v > 0.0)) fail(ErrorCode::config, fmt::format("r1 must be positive (got {})", v));
    }
    for (double v : r2) {
        if (!(v > 0.0)) fail(ErrorCode::config, fmt::format("r2 must be positive (got {})", v));
    }
    for (double v : r3) {
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::config, fmt::format("r3 must lie in [0, 1] (got {})", v));
    }
}

std::vector<std::string> sweep_preset_names() { return {"fig3", "fig4", "fig5", "fig6"}; }

SweepGrid sweep_preset(std::string_view name) {
    SweepGrid g;
    g.name = std::string(name);
    auto range = [](double from, double step, int count) {
        std::vector<double> v(static_cast<std::size_t>(count));
        for (int k = 0; k < count; ++k) v[static_cast<std::size_t>(k)] = std::round((from + step * k) * 1e6) / 1e6;
        return v;
    };
    if (name == "fig3") {
        g.r1 = range(1.0, 1.0, 30);
        g.r2 = {1.0};
        g.r3 = {0.0};
        g.designs = {DesignKind::bernoulli, DesignKind::constrained};
    } else if (name == "fig4") {
        g.r1 = {20.0};
        g.r2 = range(1.0, 0.1, 10);
        g.r3 = {0.0};
        g.designs = {DesignKind::constrained, DesignKind::unconstrained};
    } else if (name == "fig5") {
        g.r1 = range(5.0, 5.0, 6);
        g.r2 = {1.0};
        g.r3 = {0.0};
        g.designs = {DesignKind::constrained, DesignKind::online};
    } else if (name == "fig6") {
        g.r1 = {20.0};
        g.r2 = {1.0, 1.3, 1.6, 1.9};
        g.r3 = range(0.0, 0.1, 11);
        g.designs = {DesignKind::constrained};
    } else {
        fail(ErrorCode::config, fmt::format("preset: unknown sweep preset '{}'", name));
    }
    return g;
}

std::vector<SweepRow> sweep(const SweepGrid& grid, const SweepProgress& progress) {
    grid.validate();
    struct Point {
        double r1, r2, r3;
    };
    std::vector<Point> points;
    for (double a : grid.r1) {
        for (double b : grid.r2) {
            for (double c : grid.r3) points.push_back({a, b, c});
        }
    }
    const auto instances = grid.base.instances;
    const auto designs = grid.designs.size();
    const auto tasks = points.size() * instances;
    std::vector<SummaryStats> stats(tasks * designs);
    std::vector<std::size_t> items(points.size());
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    parallel_for(tasks, grid.base.jobs, [&](std::size_t task) {
        const auto p = task / instances;
        const auto k = task % instances;
        SimConfig cfg = grid.base;
        cfg.r1 = points[p].r1;
        cfg.r2 = points[p].r2;
        cfg.r3 = points[p].r3;
        cfg.jobs = 1;
        const auto inst = generate_instance(cfg, derive_seed(grid.base.seed, {k, 0}));
        if (k == 0) items[p] = inst.items();
        cfg.seed = derive_seed(grid.base.seed, {k, 1});
        for (std::size_t d = 0; d < designs; ++d) {
            cfg.design = grid.designs[d];
            stats[task * designs + d] = run_trials(inst, cfg);
        }
        const auto finished = ++done;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(finished, tasks);
        }
    });
    std::vector<SweepRow> rows;
    for (std::size_t p = 0; p < points.size(); ++p) {
        for (std::size_t d = 0; d < designs; ++d) {
            std::vector<SummaryStats> per(instances);
            for (std::size_t k = 0; k < instances; ++k) per[k] = stats[(p * instances + k) * designs + d];
            SimConfig cfg = grid.base;
            cfg.design = grid.designs[d];
            rows.push_back({points[p].r1, points[p].r2, points[p].r3, cfg.design, cfg.effective_throttle(),
                            cfg.estimator, average(per), items[p]});
        }
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out =
        "r1,r2,r3,design,throttle,estimator,trials,instances,tte,bias,bias_se,stddev,stddev_se,mse,rel_bias,rel_stddev\n";
    for (const auto& r : rows) {
        const auto& s = r.stats;
        out += fmt::format("{},{},{},{},{},{},{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n",
                           r.r1, r.r2, r.r3, to_string(r.design), to_string(r.throttle), to_string(r.estimator),
                           s.trials, s.instances, s.tte, s.bias, s.bias_se, s.stddev, s.stddev_se, s.mse,
                           s.rel_bias, s.rel_stddev);
    }
    return out;
}

}  // namespace budgetab
