#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "budgetab/model.hpp"
#include "budgetab/solver.hpp"

namespace budgetab {

// Instances are one JSON document:
//   {m, n, costs, budgets, w0, w1, utility: {mu, sigma2, generator, mode}}
// with matrices as row-major nested arrays. Parse failures throw
// ErrorCode::config, file failures ErrorCode::io.

[[nodiscard]] std::string instance_to_json(const ProblemInstance& inst);
[[nodiscard]] ProblemInstance instance_from_json(std::string_view text);

[[nodiscard]] ProblemInstance load_instance(const std::filesystem::path& path);
void save_instance(const std::filesystem::path& path, const ProblemInstance& inst);

[[nodiscard]] std::string matrix_to_json(const Matrix& x);
[[nodiscard]] Matrix matrix_from_json(std::string_view text);

/// {"kind": ..., "x": [[...]], "certificate": {...}}; the certificate is
/// omitted when null.
[[nodiscard]] std::string design_to_json(std::string_view kind, const Matrix& x,
                                         const SolverCertificate* certificate);
/// Reads back the "x" member of a design document.
[[nodiscard]] Matrix design_from_json(std::string_view text);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace budgetab
