#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "budgetab/model.hpp"
#include "budgetab/solver.hpp"
#include "budgetab/throttle.hpp"

namespace budgetab {

enum class DesignKind { bernoulli, unconstrained, constrained, online };
enum class EstimatorKind { plugin, horvitz_thompson, hajek };

[[nodiscard]] std::string_view to_string(DesignKind kind) noexcept;
[[nodiscard]] std::string_view to_string(ThrottleKind kind) noexcept;
[[nodiscard]] std::string_view to_string(EstimatorKind kind) noexcept;
[[nodiscard]] DesignKind parse_design_kind(std::string_view name);
[[nodiscard]] ThrottleKind parse_throttle_kind(std::string_view name);
[[nodiscard]] EstimatorKind parse_estimator_kind(std::string_view name);

struct SimConfig {
    std::size_t n = 10;
    double r1 = 20.0;  ///< items per buyer
    double r2 = 1.0;   ///< budget over the larger allocation's cost
    double r3 = 0.0;   ///< share of leading items with w1_i = w0_i
    std::size_t trials = 20000;
    std::size_t instances = 20;
    DesignKind design = DesignKind::constrained;
    double bernoulli_p = 0.5;
    ThrottleKind throttle = ThrottleKind::random;  ///< ignored by the online design
    EstimatorKind estimator = EstimatorKind::plugin;
    UtilityMode mode = UtilityMode::fixed;
    std::uint64_t seed = 0;
    SolverConfig solver;
    std::size_t inclusion_reps = 10000;  ///< replications behind p for HT / Hajek
    std::size_t jobs = 1;

    /// Throws ErrorCode::config naming the offending field.
    void validate() const;
    /// m = ceil(n r1).
    [[nodiscard]] std::size_t items() const;
    /// The throttle actually applied: the online design always uses its
    /// in-stream budget test.
    [[nodiscard]] ThrottleKind effective_throttle() const noexcept;
};

/// Synthetic instance: one-hot W1, W0 drawn uniformly per item; costs and
/// utilities lognormal(0, 1/4); utilities doubled on W1 edges; budgets r2
/// times the larger of the two allocations' spend per buyer. Rows are drawn
/// from per-row streams of `seed`, so instances with different r1 share
/// their leading rows.
[[nodiscard]] ProblemInstance generate_instance(const SimConfig& cfg, std::uint64_t seed);

/// The design matrix for cfg.design (for online, the planned rows).
[[nodiscard]] ExperimentMatrix build_design(const ProblemInstance& inst, const SimConfig& cfg);

struct SummaryStats {
    double tte = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    double abs_bias = 0.0;  ///< mean of per-instance |bias|
    double variance = 0.0;
    double stddev = 0.0;
    double mse = 0.0;
    double rel_bias = 0.0;
    double rel_stddev = 0.0;
    double bias_se = 0.0;
    double stddev_se = 0.0;
    std::size_t trials = 0;
    std::size_t instances = 0;
};

/// Every trial's estimate for `x` on `inst`; trial t draws from the stream
/// (cfg.seed, t) whatever cfg.jobs is.
[[nodiscard]] std::vector<double> trial_estimates(const ProblemInstance& inst, const Matrix& x,
                                                  const SimConfig& cfg);

/// Population moments of the estimates around their mean and `tte`.
[[nodiscard]] SummaryStats summarize(std::span<const double> estimates, double tte);

/// Averages per-instance statistics (each field separately; SEs combine in
/// quadrature).
[[nodiscard]] SummaryStats average(std::span<const SummaryStats> per_instance);

/// The ground truth the estimators aim at.
[[nodiscard]] double target_tte(const ProblemInstance& inst);

/// build_design + trial_estimates + summarize.
[[nodiscard]] SummaryStats run_trials(const ProblemInstance& inst, const SimConfig& cfg);

struct SweepGrid {
    std::string name = "sweep";
    SimConfig base;
    std::vector<double> r1;
    std::vector<double> r2;
    std::vector<double> r3;
    std::vector<DesignKind> designs;

    void validate() const;
    [[nodiscard]] std::size_t points() const noexcept { return r1.size() * r2.size() * r3.size(); }
};

struct SweepRow {
    double r1 = 0.0;
    double r2 = 0.0;
    double r3 = 0.0;
    DesignKind design = DesignKind::constrained;
    ThrottleKind throttle = ThrottleKind::random;
    EstimatorKind estimator = EstimatorKind::plugin;
    SummaryStats stats;
    std::size_t items = 0;
};

/// Preset grids: fig3 (r1 sweep, Bernoulli vs constrained), fig4 (r2 sweep,
/// constrained vs unconstrained), fig5 (r1 sweep, offline vs online), fig6
/// (r3 x r2 grid, constrained).
[[nodiscard]] SweepGrid sweep_preset(std::string_view name);
[[nodiscard]] std::vector<std::string> sweep_preset_names();

using SweepProgress = std::function<void(std::size_t done, std::size_t total)>;

/// One row per (r1, r2, r3, design) in that nesting order. Instance k of
/// every grid point uses seed stream (base.seed, k), and its trials share
/// streams across designs.
[[nodiscard]] std::vector<SweepRow> sweep(const SweepGrid& grid, const SweepProgress& progress = {});

[[nodiscard]] std::string sweep_csv(std::span<const SweepRow> rows);

/// Writes <name>.csv and, when `svg` is set, the figure charts into `dir`.
/// Returns the written paths.
std::vector<std::filesystem::path> write_sweep(const SweepGrid& grid, std::span<const SweepRow> rows,
                                               const std::filesystem::path& dir, bool svg);

struct ChartSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

[[nodiscard]] std::string svg_line_chart(std::string_view title, std::string_view x_label,
                                         std::string_view y_label, std::span<const ChartSeries> series);

}  // namespace budgetab
