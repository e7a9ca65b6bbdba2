#pragma once

#include <string_view>

#include "budgetab/sim.hpp"

namespace budgetab {

// JSON configuration documents. Unknown keys are rejected so that typos
// surface as ErrorCode::config naming the key.
//
// Simulation keys: n, r1, r2, r3, trials, instances, design, p, throttle,
// estimator, mode ("fixed" | "resample"), seed, jobs, tolerance,
// max_iterations, inclusion_reps.
//
// Sweep documents take the same keys, plus "preset" (fig3 | fig4 | fig5 |
// fig6), "name", and "designs"; r1, r2 and r3 may be numbers or arrays.

/// Applies the keys in `text` on top of `base`.
[[nodiscard]] SimConfig sim_config_from_json(std::string_view text, SimConfig base = {});

[[nodiscard]] SweepGrid sweep_grid_from_json(std::string_view text);

}  // namespace budgetab
