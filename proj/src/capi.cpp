#include "budgetab/budgetab.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "budgetab/config.hpp"
#include "budgetab/design.hpp"
#include "budgetab/error.hpp"
#include "budgetab/estimators.hpp"
#include "budgetab/io.hpp"
#include "budgetab/online.hpp"
#include "budgetab/sim.hpp"

struct bab_instance {
    budgetab::ProblemInstance inst;
};

struct bab_design {
    std::string kind;
    budgetab::ExperimentMatrix x;
    bool has_certificate = false;
    budgetab::SolverCertificate certificate;
};

namespace {

using namespace budgetab;
using nlohmann::json;

thread_local std::string last_error;

bab_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::config: return BAB_ERR_CONFIG;
        case ErrorCode::io: return BAB_ERR_IO;
        case ErrorCode::solver: return BAB_ERR_SOLVER;
        case ErrorCode::invalid_argument:
        case ErrorCode::dimension_mismatch:
        case ErrorCode::inconsistent_input: return BAB_ERR_INVALID_ARGUMENT;
    }
    return BAB_ERR_INTERNAL;
}

/// Runs body, translating exceptions into status codes and last_error.
template <typename Body>
bab_status guarded(Body&& body) noexcept {
    try {
        last_error.clear();
        return body();
    } catch (const Error& e) {
        last_error = e.what();
        return status_of(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
    } catch (const std::exception& e) {
        last_error = e.what();
    } catch (...) {
        last_error = "unknown error";
    }
    return BAB_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
    if (p == nullptr) fail(ErrorCode::invalid_argument, fmt::format("{} must not be NULL", what));
}

char* duplicate(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string_view view(const char* s) { return s == nullptr ? std::string_view{} : std::string_view{s}; }

json optional_number(double (*f)(const ProblemInstance&, const Matrix&), const ProblemInstance& inst,
                     const Matrix& x) {
    try {
        return f(inst, x);
    } catch (const Error&) {
        return nullptr;
    }
}

/// RAII CSV trace writer; rows are flushed as they arrive.
class TraceFile {
public:
    explicit TraceFile(const char* path) {
        if (path == nullptr) return;
        file_ = std::fopen(path, "wb");
        if (file_ == nullptr) fail(ErrorCode::io, fmt::format("cannot open '{}' for writing", path));
        std::fputs("step,sampled_buyer,feasible,spend\n", file_);
    }
    ~TraceFile() {
        if (file_ != nullptr) std::fclose(file_);
    }
    TraceFile(const TraceFile&) = delete;
    TraceFile& operator=(const TraceFile&) = delete;

    void write(const OnlineStep& s) {
        if (file_ == nullptr) return;
        const auto line = fmt::format("{},{},{},{:.10g}\n", s.step, s.sampled, s.feasible ? 1 : 0, s.spend);
        std::fputs(line.c_str(), file_);
        std::fflush(file_);
    }

private:
    std::FILE* file_ = nullptr;
};

}  // namespace

extern "C" {

uint32_t bab_abi_version(void) { return BAB_ABI_VERSION; }

const char* bab_version_string(void) { return "budgetab 0.1.0"; }

const char* bab_last_error(void) { return last_error.c_str(); }

void bab_string_free(char* s) { std::free(s); }

bab_status bab_instance_generate(const char* config_json, uint64_t seed, bab_instance** out) {
    return guarded([&] {
        require(out, "out");
        auto cfg = sim_config_from_json(view(config_json));
        auto handle = std::make_unique<bab_instance>();
        handle->inst = generate_instance(cfg, seed);
        *out = handle.release();
        return BAB_OK;
    });
}

bab_status bab_instance_from_json(const char* text, bab_instance** out) {
    return guarded([&] {
        require(text, "json");
        require(out, "out");
        auto handle = std::make_unique<bab_instance>();
        handle->inst = instance_from_json(text);
        *out = handle.release();
        return BAB_OK;
    });
}

bab_status bab_instance_load(const char* path, bab_instance** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto handle = std::make_unique<bab_instance>();
        handle->inst = load_instance(path);
        *out = handle.release();
        return BAB_OK;
    });
}

bab_status bab_instance_save(const bab_instance* inst, const char* path) {
    return guarded([&] {
        require(inst, "instance");
        require(path, "path");
        save_instance(path, inst->inst);
        return BAB_OK;
    });
}

bab_status bab_instance_to_json(const bab_instance* inst, char** out) {
    return guarded([&] {
        require(inst, "instance");
        require(out, "out");
        *out = duplicate(instance_to_json(inst->inst));
        return BAB_OK;
    });
}

void bab_instance_free(bab_instance* inst) { delete inst; }

size_t bab_instance_items(const bab_instance* inst) { return inst == nullptr ? 0 : inst->inst.items(); }

size_t bab_instance_buyers(const bab_instance* inst) { return inst == nullptr ? 0 : inst->inst.buyers(); }

bab_status bab_instance_validate(const bab_instance* inst, char** report_json) {
    return guarded([&] {
        require(inst, "instance");
        require(report_json, "report_json");
        *report_json = duplicate(json(validate_instance(inst->inst)).dump());
        return BAB_OK;
    });
}

bab_status bab_instance_summary(const bab_instance* inst, char** out) {
    return guarded([&] {
        require(inst, "instance");
        require(out, "out");
        const auto& p = inst->inst;
        const auto s1 = buyer_spend(p.w1, p.costs);
        const auto s0 = buyer_spend(p.w0, p.costs);
        std::vector<double> slack(p.buyers());
        for (std::size_t j = 0; j < p.buyers(); ++j) slack[j] = p.budgets[j] - std::max(s1[j], s0[j]);
        const json j = {{"m", p.items()}, {"n", p.buyers()}, {"tte", expected_tte(p)}, {"budget_slack", slack}};
        *out = duplicate(j.dump());
        return BAB_OK;
    });
}

bab_status bab_design_create(const bab_instance* inst, const char* kind, const char* options_json,
                             bab_design** out) {
    return guarded([&] {
        require(inst, "instance");
        require(kind, "kind");
        require(out, "out");
        auto cfg = sim_config_from_json(view(options_json));
        cfg.design = parse_design_kind(kind);
        const auto& p = inst->inst;
        auto handle = std::make_unique<bab_design>();
        handle->kind = kind;
        bab_status status = BAB_OK;
        if (cfg.design == DesignKind::constrained) {
            auto d = constrained_optimal_design(p, cfg.solver);
            handle->x = std::move(d.x);
            handle->certificate = std::move(d.certificate);
            handle->has_certificate = true;
            if (!handle->certificate.converged) {
                last_error = fmt::format("solver did not reach tolerance {:.3g} (kkt residual {:.3g})",
                                         cfg.solver.kkt_tolerance, handle->certificate.kkt_residual);
                status = BAB_ERR_SOLVER;
            }
        } else {
            handle->x = build_design(p, cfg);
        }
        *out = handle.release();
        return status;
    });
}

void bab_design_free(bab_design* design) { delete design; }

size_t bab_design_rows(const bab_design* design) { return design == nullptr ? 0 : design->x.rows(); }

size_t bab_design_cols(const bab_design* design) { return design == nullptr ? 0 : design->x.cols(); }

double bab_design_get(const bab_design* design, size_t i, size_t j) {
    if (design == nullptr || i >= design->x.rows() || j >= design->x.cols()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return design->x(i, j);
}

bab_status bab_design_to_json(const bab_design* design, char** out) {
    return guarded([&] {
        require(design, "design");
        require(out, "out");
        *out = duplicate(design_to_json(design->kind, design->x, design->has_certificate ? &design->certificate : nullptr));
        return BAB_OK;
    });
}

bab_status bab_design_save(const bab_design* design, const char* path) {
    return guarded([&] {
        require(design, "design");
        require(path, "path");
        write_text(path, design_to_json(design->kind, design->x, design->has_certificate ? &design->certificate : nullptr));
        return BAB_OK;
    });
}

bab_status bab_simulate(const bab_instance* inst, const char* config_json, char** out) {
    return guarded([&] {
        require(inst, "instance");
        require(out, "out");
        const auto cfg = sim_config_from_json(view(config_json));
        const auto& p = inst->inst;
        const auto x = build_design(p, cfg);
        const auto s = summarize(trial_estimates(p, x, cfg), target_tte(p));
        const json j = {{"design", to_string(cfg.design)},
                        {"throttle", to_string(cfg.effective_throttle())},
                        {"estimator", to_string(cfg.estimator)},
                        {"trials", s.trials},
                        {"seed", cfg.seed},
                        {"tte", s.tte},
                        {"mean", s.mean},
                        {"bias", s.bias},
                        {"bias_se", s.bias_se},
                        {"stddev", s.stddev},
                        {"stddev_se", s.stddev_se},
                        {"mse", s.mse},
                        {"rel_bias", s.rel_bias},
                        {"rel_stddev", s.rel_stddev},
                        {"variance_formula", optional_number(variance_closed_form, p, x)},
                        {"mse_bound", optional_number(mse_upper_bound, p, x)}};
        *out = duplicate(j.dump());
        return BAB_OK;
    });
}

bab_status bab_sweep(const char* config_json, const char* out_dir, int write_svg, bab_progress_fn progress,
                     void* user, char** out) {
    return guarded([&] {
        require(out_dir, "out_dir");
        const auto grid = sweep_grid_from_json(view(config_json));
        SweepProgress callback;
        if (progress != nullptr) callback = [&](std::size_t done, std::size_t total) { progress(done, total, user); };
        const auto rows = sweep(grid, callback);
        const auto files = write_sweep(grid, rows, out_dir, write_svg != 0);
        if (out != nullptr) {
            json names = json::array();
            for (const auto& f : files) names.push_back(f.string());
            *out = duplicate(json{{"rows", rows.size()}, {"files", names}, {"seed", grid.base.seed}}.dump());
        }
        return BAB_OK;
    });
}

bab_status bab_online_run(const bab_instance* inst, const char* config_json, uint64_t seed, const char* trace_csv,
                          bab_step_fn on_step, void* user, char** out) {
    return guarded([&] {
        require(inst, "instance");
        const auto& p = inst->inst;
        const auto m = p.items();
        json cfg_json;
        try {
            cfg_json = config_json == nullptr ? json::object() : json::parse(config_json);
        } catch (const json::exception& e) {
            fail(ErrorCode::config, fmt::format("malformed JSON config: {}", e.what()));
        }
        if (!cfg_json.is_object()) fail(ErrorCode::config, "config must be a JSON object");
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::string order_name = "identity";
        json solver_keys = json::object();
        for (const auto& [key, v] : cfg_json.items()) {
            if (key == "order") {
                if (!v.is_string()) fail(ErrorCode::config, "order must be a string");
                order_name = v.get<std::string>();
                if (order_name == "reverse") {
                    std::reverse(order.begin(), order.end());
                } else if (order_name == "random") {
                    auto rng = make_rng(seed, {0x6f72646572ULL});
                    detail::shuffle_order(order, rng);
                } else if (order_name != "identity") {
                    fail(ErrorCode::config, fmt::format("order must be identity, reverse or random (got '{}')", order_name));
                }
            } else if (key == "permutation") {
                try {
                    order = v.get<std::vector<std::size_t>>();
                } catch (const json::exception&) {
                    fail(ErrorCode::config, "permutation must be an array of item indices");
                }
                order_name = "custom";
            } else if (key == "tolerance" || key == "max_iterations") {
                solver_keys[key] = v;
            } else {
                fail(ErrorCode::config, fmt::format("unknown config key '{}'", key));
            }
        }
        const auto cfg = sim_config_from_json(solver_keys.dump());
        ProblemInstance streamed;
        try {
            streamed = permute_items(p, order);
        } catch (const Error& e) {
            fail(ErrorCode::config, fmt::format("permutation: {}", e.what()));
        }
        TraceFile trace(trace_csv);
        std::size_t allocated = 0;
        std::size_t rejected = 0;
        auto rng = make_rng(seed, {});
        const auto result = online_run(streamed, cfg.solver, rng, [&](const OnlineStep& s) {
            trace.write(s);
            if (s.feasible) ++allocated;
            if (s.sampled >= 0 && !s.feasible) ++rejected;
            if (on_step != nullptr) on_step(s.step, s.sampled, s.feasible ? 1 : 0, s.spend, user);
        });
        if (out != nullptr) {
            const json j = {{"estimate", result.estimate}, {"tte", expected_tte(p)}, {"seed", seed},
                            {"steps", result.trace.size()}, {"allocated", allocated}, {"rejected", rejected},
                            {"solver_calls", result.solver_calls}, {"order", order_name}};
            *out = duplicate(j.dump());
        }
        return BAB_OK;
    });
}

}  // extern "C"
