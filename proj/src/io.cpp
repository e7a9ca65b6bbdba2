#include "budgetab/io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "budgetab/error.hpp"

namespace budgetab {

using nlohmann::json;

namespace {

json to_json(const Matrix& x) {
    json rows = json::array();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto r = x.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

json to_json(const AllocationMatrix& w) {
    json rows = json::array();
    for (std::size_t i = 0; i < w.rows(); ++i) {
        std::vector<int> r(w.cols());
        for (std::size_t j = 0; j < w.cols(); ++j) r[j] = w(i, j) ? 1 : 0;
        rows.push_back(std::move(r));
    }
    return rows;
}

const json& member(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) fail(ErrorCode::config, fmt::format("missing field '{}'", key));
    return j.at(key);
}

Matrix matrix_from(const json& j, std::string_view name, std::size_t rows, std::size_t cols) {
    if (!j.is_array() || j.size() != rows) {
        fail(ErrorCode::config, fmt::format("'{}' must be an array of {} rows", name, rows));
    }
    Matrix x(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& r = j[i];
        if (!r.is_array() || r.size() != cols) {
            fail(ErrorCode::config, fmt::format("'{}' row {} must have {} entries", name, i, cols));
        }
        for (std::size_t k = 0; k < cols; ++k) {
            if (!r[k].is_number()) fail(ErrorCode::config, fmt::format("'{}'[{}][{}] is not a number", name, i, k));
            x(i, k) = r[k].get<double>();
        }
    }
    return x;
}

Matrix matrix_from(const json& j, std::string_view name) {
    if (!j.is_array()) fail(ErrorCode::config, fmt::format("'{}' must be an array", name));
    const std::size_t rows = j.size();
    const std::size_t cols = rows == 0 || !j[0].is_array() ? 0 : j[0].size();
    return matrix_from(j, name, rows, cols);
}

AllocationMatrix allocation_from(const json& j, std::string_view name, std::size_t m, std::size_t n) {
    const Matrix raw = matrix_from(j, name, m, n);
    AllocationMatrix w(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const double v = raw(i, k);
            if (v != 0.0 && v != 1.0) {
                fail(ErrorCode::config, fmt::format("'{}'[{}][{}] must be 0 or 1", name, i, k));
            }
            w.set(i, k, v == 1.0);
        }
    }
    return w;
}

json generator_json(const UtilityGenerator& g) {
    struct Visitor {
        json operator()(const FixedUtilities& f) const { return {{"kind", "fixed"}, {"values", to_json(f.values)}}; }
        json operator()(const LognormalUtilities& l) const {
            return {{"kind", "lognormal"}, {"location", to_json(l.location)}, {"scale", to_json(l.scale)}};
        }
        json operator()(const TwoPointUtilities& t) const {
            return {{"kind", "two_point"},
                    {"low", to_json(t.low)},
                    {"high", to_json(t.high)},
                    {"p_high", to_json(t.p_high)}};
        }
    };
    return std::visit(Visitor{}, g);
}

UtilityModel utility_from(const json& j, std::size_t m, std::size_t n) {
    const auto& g = member(j, "generator");
    const auto kind = member(g, "kind").get<std::string>();
    UtilityModel u;
    if (kind == "fixed") {
        u = UtilityModel::fixed(matrix_from(member(g, "values"), "generator.values", m, n));
    } else if (kind == "lognormal") {
        u = UtilityModel::lognormal(matrix_from(member(g, "location"), "generator.location", m, n),
                                    matrix_from(member(g, "scale"), "generator.scale", m, n));
    } else if (kind == "two_point") {
        u = UtilityModel::two_point(matrix_from(member(g, "low"), "generator.low", m, n),
                                    matrix_from(member(g, "high"), "generator.high", m, n),
                                    matrix_from(member(g, "p_high"), "generator.p_high", m, n));
    } else {
        fail(ErrorCode::config, fmt::format("unknown utility generator '{}'", kind));
    }
    // Stored moments win over the generator's so that hand-edited files are
    // caught by validation rather than silently repaired.
    if (j.contains("mu")) u.mu = matrix_from(j.at("mu"), "utility.mu", m, n);
    if (j.contains("sigma2")) u.sigma2 = matrix_from(j.at("sigma2"), "utility.sigma2", m, n);
    const auto mode = j.value("mode", kind == "fixed" ? "fixed" : "resample");
    if (mode == "fixed") {
        u.mode = UtilityMode::fixed;
    } else if (mode == "resample") {
        u.mode = UtilityMode::resample;
    } else {
        fail(ErrorCode::config, fmt::format("unknown utility mode '{}'", mode));
    }
    return u;
}

json parse(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::config, fmt::format("malformed JSON: {}", e.what()));
    }
}

}  // namespace

std::string instance_to_json(const ProblemInstance& inst) {
    json j;
    j["m"] = inst.items();
    j["n"] = inst.buyers();
    j["costs"] = to_json(inst.costs);
    j["budgets"] = inst.budgets;
    j["w0"] = to_json(inst.w0);
    j["w1"] = to_json(inst.w1);
    j["utility"] = {{"mu", to_json(inst.utility.mu)},
                    {"sigma2", to_json(inst.utility.sigma2)},
                    {"generator", generator_json(inst.utility.generator)},
                    {"mode", inst.utility.mode == UtilityMode::fixed ? "fixed" : "resample"}};
    return j.dump() + "\n";
}

ProblemInstance instance_from_json(std::string_view text) {
    const json j = parse(text);
    try {
        const auto m = member(j, "m").get<std::size_t>();
        const auto n = member(j, "n").get<std::size_t>();
        ProblemInstance inst;
        inst.costs = matrix_from(member(j, "costs"), "costs", m, n);
        inst.budgets = member(j, "budgets").get<std::vector<double>>();
        if (inst.budgets.size() != n) fail(ErrorCode::config, fmt::format("'budgets' must have {} entries", n));
        inst.w0 = allocation_from(member(j, "w0"), "w0", m, n);
        inst.w1 = allocation_from(member(j, "w1"), "w1", m, n);
        inst.utility = utility_from(member(j, "utility"), m, n);
        return inst;
    } catch (const json::exception& e) {
        fail(ErrorCode::config, fmt::format("invalid instance: {}", e.what()));
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, fmt::format("cannot open '{}' for reading", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(ErrorCode::io, fmt::format("error reading '{}'", path.string()));
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, fmt::format("cannot open '{}' for writing", path.string()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) fail(ErrorCode::io, fmt::format("error writing '{}'", path.string()));
}

ProblemInstance load_instance(const std::filesystem::path& path) { return instance_from_json(read_text(path)); }

void save_instance(const std::filesystem::path& path, const ProblemInstance& inst) {
    write_text(path, instance_to_json(inst));
}

std::string matrix_to_json(const Matrix& x) { return to_json(x).dump(); }

Matrix matrix_from_json(std::string_view text) { return matrix_from(parse(text), "matrix"); }

std::string design_to_json(std::string_view kind, const Matrix& x, const SolverCertificate* certificate) {
    json j;
    j["kind"] = kind;
    j["x"] = to_json(x);
    if (certificate != nullptr) j["certificate"] = json::parse(certificate->to_json());
    return j.dump() + "\n";
}

Matrix design_from_json(std::string_view text) {
    const json j = parse(text);
    return matrix_from(member(j, "x"), "x");
}

}  // namespace budgetab
