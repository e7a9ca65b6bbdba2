#include "budgetab/config.hpp"

#include <set>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "budgetab/error.hpp"

namespace budgetab {

using nlohmann::json;

namespace {

json parse_object(std::string_view text) {
    json j;
    try {
        j = text.empty() ? json::object() : json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::config, fmt::format("malformed JSON config: {}", e.what()));
    }
    if (!j.is_object()) fail(ErrorCode::config, "config must be a JSON object");
    return j;
}

double number(const json& v, std::string_view key) {
    if (!v.is_number()) fail(ErrorCode::config, fmt::format("{} must be a number", key));
    return v.get<double>();
}

std::size_t count(const json& v, std::string_view key) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        fail(ErrorCode::config, fmt::format("{} must be a non-negative integer", key));
    }
    return v.get<std::size_t>();
}

std::string text_of(const json& v, std::string_view key) {
    if (!v.is_string()) fail(ErrorCode::config, fmt::format("{} must be a string", key));
    return v.get<std::string>();
}

std::uint64_t seed_of(const json& v) {
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) return v.get<std::uint64_t>();
    if (v.is_string()) {
        try {
            std::size_t used = 0;
            const auto s = v.get<std::string>();
            const auto out = std::stoull(s, &used, 0);
            if (used == s.size()) return out;
        } catch (const std::exception&) {
        }
    }
    fail(ErrorCode::config, "seed must be a non-negative integer");
}

std::vector<double> values(const json& v, std::string_view key) {
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) fail(ErrorCode::config, fmt::format("{} must be a number or non-empty array", key));
    std::vector<double> out;
    for (const auto& e : v) out.push_back(number(e, key));
    return out;
}

/// Applies the simulation keys; returns false for keys it does not know.
bool apply(SimConfig& cfg, const std::string& key, const json& v) {
    if (key == "n") {
        cfg.n = count(v, key);
    } else if (key == "r1") {
        cfg.r1 = number(v, key);
    } else if (key == "r2") {
        cfg.r2 = number(v, key);
    } else if (key == "r3") {
        cfg.r3 = number(v, key);
    } else if (key == "trials") {
        cfg.trials = count(v, key);
    } else if (key == "instances") {
        cfg.instances = count(v, key);
    } else if (key == "design") {
        cfg.design = parse_design_kind(text_of(v, key));
    } else if (key == "p") {
        cfg.bernoulli_p = number(v, key);
    } else if (key == "throttle") {
        cfg.throttle = parse_throttle_kind(text_of(v, key));
    } else if (key == "estimator") {
        cfg.estimator = parse_estimator_kind(text_of(v, key));
    } else if (key == "mode") {
        const auto mode = text_of(v, key);
        if (mode == "fixed") {
            cfg.mode = UtilityMode::fixed;
        } else if (mode == "resample") {
            cfg.mode = UtilityMode::resample;
        } else {
            fail(ErrorCode::config, fmt::format("mode must be 'fixed' or 'resample' (got '{}')", mode));
        }
    } else if (key == "seed") {
        cfg.seed = seed_of(v);
    } else if (key == "jobs") {
        cfg.jobs = count(v, key);
    } else if (key == "tolerance") {
        cfg.solver.kkt_tolerance = number(v, key);
    } else if (key == "max_iterations") {
        cfg.solver.max_iterations = static_cast<int>(count(v, key));
    } else if (key == "inclusion_reps") {
        cfg.inclusion_reps = count(v, key);
    } else {
        return false;
    }
    return true;
}

}  // namespace

SimConfig sim_config_from_json(std::string_view text, SimConfig base) {
    const json j = parse_object(text);
    for (const auto& [key, v] : j.items()) {
        if (!apply(base, key, v)) fail(ErrorCode::config, fmt::format("unknown config key '{}'", key));
    }
    base.validate();
    return base;
}

SweepGrid sweep_grid_from_json(std::string_view text) {
    const json j = parse_object(text);
    SweepGrid grid;
    if (j.contains("preset")) {
        grid = sweep_preset(text_of(j.at("preset"), "preset"));
    } else {
        grid.r1 = {grid.base.r1};
        grid.r2 = {grid.base.r2};
        grid.r3 = {grid.base.r3};
        grid.designs = {grid.base.design};
    }
    for (const auto& [key, v] : j.items()) {
        if (key == "preset") continue;
        if (key == "name") {
            grid.name = text_of(v, key);
        } else if (key == "r1") {
            grid.r1 = values(v, key);
        } else if (key == "r2") {
            grid.r2 = values(v, key);
        } else if (key == "r3") {
            grid.r3 = values(v, key);
        } else if (key == "designs") {
            if (!v.is_array() || v.empty()) fail(ErrorCode::config, "designs must be a non-empty array");
            grid.designs.clear();
            for (const auto& d : v) grid.designs.push_back(parse_design_kind(text_of(d, key)));
        } else if (key == "design") {
            grid.designs = {parse_design_kind(text_of(v, key))};
        } else if (!apply(grid.base, key, v)) {
            fail(ErrorCode::config, fmt::format("unknown config key '{}'", key));
        }
    }
    grid.validate();
    return grid;
}

}  // namespace budgetab
