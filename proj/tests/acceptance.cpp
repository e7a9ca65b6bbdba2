// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. `--only 3,5` restricts the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/core.h>

#include "budgetab/design.hpp"
#include "budgetab/estimators.hpp"
#include "budgetab/sampling.hpp"
#include "budgetab/sim.hpp"
#include "budgetab/solver.hpp"
#include "budgetab/throttle.hpp"
#include "enumeration.hpp"
#include "test_support.hpp"

using namespace budgetab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::size_t g_jobs = 1;

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size();) {
        std::size_t e = k;
        while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[k]]) ++e;
        const double avg = 0.5 * static_cast<double>(k + e) + 1.0;
        for (std::size_t q = k; q <= e; ++q) r[idx[q]] = avg;
        k = e + 1;
    }
    return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < rx.size(); ++k) {
        sxy += (rx[k] - mx) * (ry[k] - my);
        sxx += (rx[k] - mx) * (rx[k] - mx);
        syy += (ry[k] - my) * (ry[k] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

SimConfig desk_config(std::uint64_t seed) {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.jobs = g_jobs;
    return cfg;
}

void make_slack(ProblemInstance& inst) { fixtures::make_budgets_slack(inst); }

const SweepRow& find_row(std::span<const SweepRow> rows, double r1, double r2, double r3, DesignKind d) {
    for (const auto& row : rows) {
        if (row.r1 == r1 && row.r2 == r2 && row.r3 == r3 && row.design == d) return row;
    }
    throw std::runtime_error("missing sweep row");
}

// ---------------------------------------------------------------------------

Outcome exact_unbiasedness() {
    auto rng = make_rng(1001, {});
    double worst = 0.0;
    int cases = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t m = 1 + fixtures::pick(rng, 3);
        const std::size_t n = 1 + fixtures::pick(rng, 2);
        auto inst = fixtures::random_two_point_instance(rng, m, n);
        // Tighten budgets so throttling happens, but keep every single edge
        // affordable so every supported edge has positive inclusion.
        for (std::size_t j = 0; j < n; ++j) {
            double largest = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                if (inst.w1(i, j) || inst.w0(i, j)) largest = std::max(largest, inst.costs(i, j));
            }
            inst.budgets[j] = std::max(inst.budgets[j] * fixtures::uniform(rng, 0.4, 1.0), largest);
        }
        const auto x = fixtures::random_support_design(rng, inst);
        const double tau = expected_tte(inst);
        for (bool random_order : {true, false}) {
            const auto p = fixtures::exact_inclusion(inst, x, random_order);
            const double mean = fixtures::exact_expectation(
                inst, x, random_order, [&](const Matrix& obs) { return ht_estimator(obs, inst.w1, inst.w0, p); });
            worst = std::max(worst, std::abs(mean - tau));
            ++cases;
        }
    }
    return {worst <= 1e-10, fmt::format("max |E[tau_bar] - tau| = {:.3g} over {} exact cases (tol 1e-10)", worst, cases)};
}

Outcome slack_unbiasedness() {
    int within = 0;
    double worst_z = 0.0;
    for (std::uint64_t k = 0; k < 10; ++k) {
        auto cfg = desk_config(2000 + k);
        cfg.n = 10;
        cfg.r1 = 5;
        cfg.trials = 100000;
        auto inst = generate_instance(cfg, derive_seed(cfg.seed, {0}));
        make_slack(inst);
        const auto s = run_trials(inst, cfg);
        const double z = std::abs(s.bias) / s.bias_se;
        worst_z = std::max(worst_z, z);
        within += z <= 3.0;
    }
    return {within == 10, fmt::format("{}/10 instances with |bias| <= 3 SE, max |bias|/SE = {:.2f}", within, worst_z)};
}

// The closed form is exact only when every row's treatment and control
// buyers differ; the fixture redraws w0 on rows where they coincide.
Outcome variance_formula() {
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 10; ++k) {
        auto cfg = desk_config(3000 + k);
        cfg.n = 10;
        cfg.r1 = 5;
        cfg.trials = 100000;
        cfg.mode = UtilityMode::resample;
        auto inst = generate_instance(cfg, derive_seed(cfg.seed, {0}));
        auto rng = make_rng(cfg.seed, {1});
        auto a0 = inst.w0.assignment();
        for (std::size_t i = 0; i < inst.items(); ++i) {
            while (a0[i] == inst.w1.buyer(i)) a0[i] = fixtures::pick(rng, cfg.n);
        }
        inst.w0 = AllocationMatrix::from_assignment(cfg.n, a0);
        make_slack(inst);
        const auto x = build_design(inst, cfg);
        const auto s = summarize(trial_estimates(inst, x, cfg), target_tte(inst));
        const double formula = variance_closed_form(inst, x);
        worst = std::max(worst, std::abs(s.variance - formula) / formula);
    }
    return {worst <= 0.05, fmt::format("max relative gap between Monte-Carlo and closed-form variance = {:.4f} (tol 0.05)", worst)};
}

Outcome mse_domination() {
    double worst_ratio = 0.0;
    int points = 0;
    bool ok = true;
    for (double r1 : {1.0, 5.0, 10.0, 20.0}) {
        for (double r2 : {1.0, 1.3, 1.6, 1.9}) {
            for (auto design : {DesignKind::constrained, DesignKind::bernoulli}) {
                auto cfg = desk_config(4000);
                cfg.r1 = r1;
                cfg.r2 = r2;
                cfg.design = design;
                cfg.trials = 5000;
                double mse_sum = 0.0, bound_sum = 0.0;
                for (std::uint64_t k = 0; k < 10; ++k) {
                    const auto inst = generate_instance(cfg, derive_seed(cfg.seed, {k, 0}));
                    auto trial_cfg = cfg;
                    trial_cfg.seed = derive_seed(cfg.seed, {k, 1});
                    const auto x = build_design(inst, trial_cfg);
                    const auto s = summarize(trial_estimates(inst, x, trial_cfg), target_tte(inst));
                    const double bound = mse_upper_bound(inst, x);
                    ok &= s.mse <= bound;
                    worst_ratio = std::max(worst_ratio, s.mse / bound);
                    mse_sum += s.mse;
                    bound_sum += bound;
                }
                ok &= mse_sum <= bound_sum;
                ++points;
            }
        }
    }
    return {ok, fmt::format("{} grid points x 2 designs x 10 instances, max MSE / bound = {:.4f}", points / 2, worst_ratio)};
}

std::vector<SweepRow> g_fig3;

const std::vector<SweepRow>& fig3_rows() {
    if (g_fig3.empty()) {
        auto grid = sweep_preset("fig3");
        grid.base.seed = 5000;
        grid.base.jobs = g_jobs;
        g_fig3 = sweep(grid);
    }
    return g_fig3;
}

Outcome bias_trend() {
    const auto& rows = fig3_rows();
    bool ok = true;
    std::string detail;
    for (auto design : {DesignKind::bernoulli, DesignKind::constrained}) {
        std::vector<double> r1, per_item;
        for (const auto& row : rows) {
            if (row.design != design) continue;
            r1.push_back(row.r1);
            per_item.push_back(row.stats.abs_bias / static_cast<double>(row.items));
        }
        const double rho = spearman(r1, per_item);
        const double ratio = per_item.back() / per_item.front();
        ok &= rho < -0.8 && ratio < 0.2;
        detail += fmt::format("{}{}: rho = {:.3f}, |bias|/m at r1=30 over r1=1 = {:.3f}", detail.empty() ? "" : "; ",
                              to_string(design), rho, ratio);
    }
    return {ok, detail + " (need rho < -0.8, ratio < 0.2)"};
}

Outcome variance_advantage() {
    const auto& rows = fig3_rows();
    const auto& c = find_row(rows, 30, 1, 0, DesignKind::constrained);
    const auto& b = find_row(rows, 30, 1, 0, DesignKind::bernoulli);
    const double ratio = c.stats.stddev / b.stats.stddev;
    return {ratio <= 0.9, fmt::format("stddev constrained / bernoulli at r1=30 = {:.2f} / {:.2f} = {:.3f} (need <= 0.9)",
                                      c.stats.stddev, b.stats.stddev, ratio)};
}

Outcome problem_agreement() {
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 10; ++k) {
        auto cfg = desk_config(7000 + k);
        auto inst = generate_instance(cfg, derive_seed(cfg.seed, {0}));
        make_slack(inst);
        const auto c = constrained_optimal_design(inst);
        const auto u = unconstrained_optimal_design(inst);
        for (std::size_t q = 0; q < u.data().size(); ++q) worst = std::max(worst, std::abs(c.x.data()[q] - u.data()[q]));
    }
    auto grid = sweep_preset("fig4");
    grid.base.seed = 7100;
    grid.base.jobs = g_jobs;
    const auto rows = sweep(grid);
    bool ok = worst <= 1e-4;
    std::string detail = fmt::format("slack max |X1 - X2| = {:.2g} (tol 1e-4)", worst);
    for (auto design : {DesignKind::constrained, DesignKind::unconstrained}) {
        std::vector<double> r2, bias;
        double settled = 0.0;  // first r2 from which the mean bias stays within 3 SE of zero
        for (const auto& row : rows) {
            if (row.design != design) continue;
            r2.push_back(row.r2);
            bias.push_back(row.stats.abs_bias);
            if (std::abs(row.stats.bias) > 3 * row.stats.bias_se) settled = 0.0;
            else if (settled == 0.0) settled = row.r2;
        }
        const double rho = spearman(r2, bias);
        ok &= rho < -0.8;
        detail += fmt::format("; {} |bias| vs r2: rho = {:.3f}, {:.3g} -> {:.3g}, within 3 SE of 0 from r2 = {}",
                              to_string(design), rho, bias.front(), bias.back(), settled);
    }
    return {ok, detail};
}

Outcome online_vs_offline() {
    auto grid = sweep_preset("fig5");
    grid.r1 = {10, 20, 30};
    grid.base.seed = 8000;
    grid.base.jobs = g_jobs;
    const auto rows = sweep(grid);
    bool ok = true;
    std::string detail;
    for (double r1 : grid.r1) {
        const auto& off = find_row(rows, r1, 1, 0, DesignKind::constrained).stats;
        const auto& on = find_row(rows, r1, 1, 0, DesignKind::online).stats;
        const double sd_ratio = on.stddev / off.stddev;
        const double se = std::hypot(on.bias_se, off.bias_se);
        ok &= std::abs(sd_ratio - 1.0) <= 0.15 && on.abs_bias <= off.abs_bias + 3 * se;
        detail += fmt::format("{}r1={}: sd online/offline = {:.3f}, |bias| online {:.3f} vs offline {:.3f} (3 SE = {:.3f})",
                              detail.empty() ? "" : "; ", r1, sd_ratio, on.abs_bias, off.abs_bias, 3 * se);
    }
    return {ok, detail};
}

Outcome consistency_rate() {
    auto grid = sweep_preset("fig6");
    grid.base.seed = 9000;
    grid.base.trials = 5000;
    grid.base.jobs = g_jobs;
    const auto rows = sweep(grid);
    bool ok = true;
    std::string detail;
    for (double r2 : grid.r2) {
        std::vector<double> r3, bias;
        for (const auto& row : rows) {
            if (row.r2 != r2) continue;
            r3.push_back(row.r3);
            bias.push_back(row.stats.abs_bias);
        }
        const double rho = spearman(r3, bias);
        const bool zero = bias.back() == 0.0 && find_row(rows, grid.r1[0], r2, 1.0, DesignKind::constrained).stats.bias == 0.0;
        ok &= zero && rho < -0.8;
        detail += fmt::format("{}r2={}: rho = {:.3f}, bias at r3=1 = {}", detail.empty() ? "" : "; ", r2, rho, bias.back());
    }
    return {ok, detail};
}

Outcome overspend_probability() {
    constexpr std::size_t k = 3;
    // Exact frequency: each of the 2k items picks one of two buyers.
    int feasible_outcomes = 0;
    for (unsigned mask = 0; mask < (1U << (2 * k)); ++mask) feasible_outcomes += std::popcount(mask) == static_cast<int>(k);
    const double exact = feasible_outcomes / std::pow(2.0, 2 * k);

    const auto inst = fixtures::overspend_example(k);
    const auto x = bernoulli_design(inst.w0, inst.w1, 0.5);
    auto rng = make_rng(10000, {});
    constexpr int draws = 100000;
    int hits = 0;
    for (int d = 0; d < draws; ++d) hits += is_budget_satisfying(sample_allocation(x, rng), inst.costs, inst.budgets);
    const double freq = hits / double(draws);
    const double se = std::sqrt(exact * (1 - exact) / draws);
    return {std::abs(freq - exact) <= 3 * se,
            fmt::format("frequency {:.4f} vs exact {:.4f} (3 SE = {:.4f})", freq, exact, 3 * se)};
}

Outcome survival_bound() {
    bool ok = true;
    std::string detail;
    for (std::size_t m : {100, 1000, 10000}) {
        auto rng = make_rng(11000, {m});
        ProblemInstance inst;
        inst.costs = Matrix(m, 2);
        std::vector<int> a1(m, 0), a0(m, 1);
        for (auto& c : inst.costs.data()) c = fixtures::uniform(rng, 0.5, 1.5);
        inst.w1 = AllocationMatrix::from_assignment(2, a1);
        inst.w0 = AllocationMatrix::from_assignment(2, a0);
        inst.utility = UtilityModel::fixed(Matrix(m, 2, 1.0));
        const Matrix x(m, 2, 0.5);
        inst.budgets.assign(2, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < 2; ++j) inst.budgets[j] += inst.costs(i, j) * x(i, j);
        }
        const std::size_t reps = m >= 10000 ? 400 : 4000;
        const auto est = estimate_inclusion_probs(inst, x, ThrottleKind::random, reps, 11100 + m);
        const double bound = survival_lower_bound(static_cast<double>(m), 0.5, 1.5, 0.5);
        double worst_margin = 1e300, mean_ratio = 0.0;
        for (std::size_t q = 0; q < x.data().size(); ++q) {
            const double ratio = est.p.data()[q] / x.data()[q];
            const double se = est.se.data()[q] / x.data()[q];
            worst_margin = std::min(worst_margin, ratio + 3 * se - bound);
            mean_ratio += ratio / static_cast<double>(x.data().size());
        }
        ok &= worst_margin >= 0.0;
        detail += fmt::format("{}m_j={}: bound {:.3f}, mean p/x {:.3f}, min (p/x + 3 SE - bound) {:.3f}",
                              detail.empty() ? "" : "; ", m, bound, mean_ratio, worst_margin);
    }
    return {ok, detail};
}

Outcome solver_correctness() {
    auto rng = make_rng(12000, {});
    double worst_obj = 0.0, worst_kkt = 0.0, worst_gap = 0.0;
    int converged = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t m = 1 + fixtures::pick(rng, 3);
        const std::size_t n = 1 + fixtures::pick(rng, 2);
        auto inst = fixtures::random_instance(rng, m, n);
        for (auto& b : inst.budgets) b *= fixtures::uniform(rng, 0.3, 1.2);
        const auto a = design_weights(inst);
        const auto res = solve_separable(a, inst.costs, inst.budgets);
        const auto oracle = grid_oracle(a, inst.costs, inst.budgets);
        const auto& cert = res.certificate;
        worst_obj = std::max(worst_obj, std::abs(cert.objective - oracle.objective) / oracle.objective);
        if (cert.converged) {
            ++converged;
            worst_kkt = std::max(worst_kkt, cert.kkt_residual);
        }
        worst_gap = std::max(worst_gap, (cert.objective - cert.dual_value) / cert.objective);
    }
    const bool ok = converged == 50 && worst_obj <= 1e-3 && worst_kkt <= 1e-7 && worst_gap <= 1e-4;
    return {ok, fmt::format("{}/50 converged, max rel objective gap to grid oracle {:.2g}, max KKT {:.2g}, max duality gap {:.2g}",
                            converged, worst_obj, worst_kkt, worst_gap)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    g_jobs = std::max(1U, std::thread::hardware_concurrency());
    for (int a = 1; a < argc; ++a) {
        const std::string arg = argv[a];
        if (arg == "--only" && a + 1 < argc) {
            std::stringstream ss(argv[++a]);
            for (std::string item; std::getline(ss, item, ',');) only.insert(std::stoi(item));
        } else if (arg == "--jobs" && a + 1 < argc) {
            g_jobs = std::max(1, std::stoi(argv[++a]));
        } else {
            std::fprintf(stderr, "usage: %s [--only 1,2,...] [--jobs N]\n", argv[0]);
            return 2;
        }
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"HT estimator exact unbiasedness under throttling", exact_unbiasedness},
        {"plug-in estimator unbiased at slack budgets", slack_unbiasedness},
        {"closed-form variance at slack budgets", variance_formula},
        {"MSE below upper bound on r1 x r2 grid", mse_domination},
        {"bias per item decreasing in r1", bias_trend},
        {"constrained design stddev advantage over Bernoulli", variance_advantage},
        {"budget-free and constrained designs agree; bias decreasing in r2", problem_agreement},
        {"online design close to offline", online_vs_offline},
        {"bias decreasing in consistency rate", consistency_rate},
        {"overspend probability of Bernoulli design", overspend_probability},
        {"survival lower bound under random throttling", survival_bound},
        {"solver agrees with grid oracle", solver_correctness},
    };

    int failed = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        const int id = static_cast<int>(c) + 1;
        if (!only.empty() && !only.contains(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[c].second();
        } catch (const std::exception& e) {
            out = {false, fmt::format("error: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !out.pass;
        std::printf("%s criterion %d: %s: %s [%.0fs]\n", out.pass ? "PASS" : "FAIL", id, criteria[c].first.c_str(),
                    out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
