// budgetab: command-line front end over the budgetab C API.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <spdlog/sinks/stdout_color_sinks.h>

#include "budgetab/budgetab.h"

namespace {

using nlohmann::json;

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kSolver = 4 };

struct Failure {
    int code;
    std::string message;
};

int exit_code(bab_status s) {
    switch (s) {
        case BAB_OK: return kOk;
        case BAB_ERR_CONFIG:
        case BAB_ERR_INVALID_ARGUMENT: return kConfig;
        case BAB_ERR_IO: return kIo;
        case BAB_ERR_SOLVER: return kSolver;
        default: return kInternal;
    }
}

void check(bab_status s) {
    if (s != BAB_OK) throw Failure{exit_code(s), bab_last_error()};
}

/// Owns a string handed out by the library.
struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { bab_string_free(p); }
    [[nodiscard]] std::string str() const { return p ? p : ""; }
};

struct Instance {
    bab_instance* p = nullptr;
    ~Instance() { bab_instance_free(p); }
};

struct Design {
    bab_design* p = nullptr;
    ~Design() { bab_design_free(p); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure{kIo, "cannot open '" + path + "' for reading"};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) throw Failure{kIo, "cannot write '" + path + "'"};
}

json parse_config(const std::string& text, const std::string& origin) {
    try {
        json j = text.empty() ? json::object() : json::parse(text);
        if (!j.is_object()) throw Failure{kConfig, origin + ": config must be a JSON object"};
        return j;
    } catch (const json::exception& e) {
        throw Failure{kConfig, origin + ": malformed JSON: " + e.what()};
    }
}

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<double> tolerance;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> instances;

    /// Seed from the flag, else from the config, else fresh entropy
    /// (reported on stderr so the run can be repeated).
    std::uint64_t resolve_seed(const json& cfg) const {
        if (seed) return *seed;
        if (cfg.contains("seed")) {
            const auto& v = cfg.at("seed");
            if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) {
                return v.get<std::uint64_t>();
            }
            throw Failure{kConfig, "seed must be a non-negative integer"};
        }
        std::random_device rd;
        const std::uint64_t s = (std::uint64_t{rd()} << 32) ^ rd();
        std::cerr << "seed: " << s << " (entropy)\n";
        return s;
    }

    void apply(json& cfg, bool simulation) const {
        if (tolerance) cfg["tolerance"] = *tolerance;
        if (!simulation) return;
        if (jobs) cfg["jobs"] = *jobs;
        if (trials) cfg["trials"] = *trials;
        if (instances) cfg["instances"] = *instances;
    }
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("budgetab");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* level = std::getenv("BUDGETAB_LOG")) {
        spdlog::set_level(spdlog::level::from_str(level));
    }
}

int cmd_generate(const Globals& g, const std::string& config_path, const std::string& out) {
    json cfg = parse_config(read_file(config_path), config_path);
    const auto seed = g.resolve_seed(cfg);
    cfg.erase("seed");
    Instance inst;
    check(bab_instance_generate(cfg.dump().c_str(), seed, &inst.p));
    check(bab_instance_save(inst.p, out.c_str()));
    OwnedString summary;
    check(bab_instance_summary(inst.p, &summary.p));
    const auto s = json::parse(summary.str());
    std::cout << "m=" << s["m"] << " n=" << s["n"] << " tte=" << s["tte"].get<double>() << " seed=" << seed << "\n";
    std::cout << "budget slack per buyer:";
    for (const auto& v : s["budget_slack"]) std::cout << ' ' << v.get<double>();
    std::cout << "\n";
    spdlog::info("wrote {}", out);
    return kOk;
}

int cmd_design(const Globals& g, const std::string& instance_path, const std::string& kind, double p,
               const std::string& out) {
    Instance inst;
    check(bab_instance_load(instance_path.c_str(), &inst.p));
    json opts = {{"p", p}};
    g.apply(opts, false);
    Design design;
    const auto status = bab_design_create(inst.p, kind.c_str(), opts.dump().c_str(), &design.p);
    const std::string error = bab_last_error();
    if (design.p != nullptr) {
        check(bab_design_save(design.p, out.c_str()));
        OwnedString text;
        check(bab_design_to_json(design.p, &text.p));
        const auto j = json::parse(text.str());
        if (j.contains("certificate")) {
            const auto& c = j["certificate"];
            std::cout << "objective=" << c["objective"].get<double>() << " kkt_residual=" << c["kkt_residual"].get<double>()
                      << " iterations=" << c["iterations"] << " converged=" << c["converged"] << "\n";
        }
        spdlog::info("wrote {}", out);
    }
    if (status != BAB_OK) throw Failure{exit_code(status), error};
    return kOk;
}

int cmd_simulate(const Globals& g, const std::string& instance_path, const std::string& config_path,
                 const std::string& out) {
    json cfg = config_path.empty() ? json::object() : parse_config(read_file(config_path), config_path);
    cfg["seed"] = g.resolve_seed(cfg);
    g.apply(cfg, true);
    cfg.erase("instances");
    Instance inst;
    check(bab_instance_load(instance_path.c_str(), &inst.p));
    OwnedString result;
    check(bab_simulate(inst.p, cfg.dump().c_str(), &result.p));
    const auto text = json::parse(result.str()).dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        write_file(out, text);
        spdlog::info("wrote {}", out);
    }
    return kOk;
}

void report_progress(size_t done, size_t total, void*) { spdlog::info("sweep progress {}/{}", done, total); }

int cmd_sweep(const Globals& g, const std::string& config_path, const std::string& preset, const std::string& out_dir,
              bool no_svg) {
    json cfg = config_path.empty() ? json::object() : parse_config(read_file(config_path), config_path);
    if (!preset.empty()) cfg["preset"] = preset;
    if (!cfg.contains("preset") && config_path.empty()) throw Failure{kConfig, "sweep needs a config file or --preset"};
    cfg["seed"] = g.resolve_seed(cfg);
    g.apply(cfg, true);
    OwnedString result;
    check(bab_sweep(cfg.dump().c_str(), out_dir.c_str(), no_svg ? 0 : 1, report_progress, nullptr, &result.p));
    const auto j = json::parse(result.str());
    for (const auto& f : j["files"]) std::cout << f.get<std::string>() << "\n";
    spdlog::info("{} rows, seed {}", j["rows"].get<std::size_t>(), j["seed"].get<std::uint64_t>());
    return kOk;
}

int cmd_online(const Globals& g, const std::string& instance_path, const std::string& config_path,
               const std::string& order, const std::string& trace, const std::string& out) {
    json cfg = config_path.empty() ? json::object() : parse_config(read_file(config_path), config_path);
    const auto seed = g.resolve_seed(cfg);
    cfg.erase("seed");
    if (!order.empty()) cfg["order"] = order;
    g.apply(cfg, false);
    Instance inst;
    check(bab_instance_load(instance_path.c_str(), &inst.p));
    OwnedString result;
    check(bab_online_run(inst.p, cfg.dump().c_str(), seed, trace.empty() ? nullptr : trace.c_str(), nullptr, nullptr,
                         &result.p));
    const auto j = json::parse(result.str());
    std::cout << "estimate=" << j["estimate"].get<double>() << " tte=" << j["tte"].get<double>() << " seed=" << seed
              << " allocated=" << j["allocated"] << " rejected=" << j["rejected"] << "\n";
    if (!out.empty()) write_file(out, j.dump(2) + "\n");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Budget-constrained A/B experiment design and simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", bab_version_string());

    Globals g;
    std::uint64_t seed = 0;
    std::size_t jobs = 1, trials = 0, instances = 0;
    double tolerance = 0.0;
    auto* seed_opt = app.add_option("--seed", seed, "Master seed for all randomness")->check(CLI::NonNegativeNumber);
    auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    auto* tol_opt = app.add_option("--tolerance", tolerance, "Solver KKT tolerance")->check(CLI::PositiveNumber);
    auto* trials_opt = app.add_option("--trials", trials, "Trials per instance")->check(CLI::PositiveNumber);
    auto* inst_opt = app.add_option("--instances", instances, "Instances per grid point")->check(CLI::PositiveNumber);
    app.fallthrough();

    std::string config, out, instance, kind = "constrained", preset, trace, order;
    double p = 0.5;
    bool no_svg = false;

    auto* gen = app.add_subcommand("generate", "Generate a synthetic instance");
    gen->add_option("config", config, "Generator config JSON")->required();
    gen->add_option("-o,--output", out, "Instance output path")->required();

    auto* des = app.add_subcommand("design", "Build an experiment matrix");
    des->add_option("instance", instance, "Instance JSON")->required();
    des->add_option("-k,--kind", kind, "bernoulli | unconstrained | constrained | online")
        ->check(CLI::IsMember({"bernoulli", "unconstrained", "constrained", "online"}));
    des->add_option("-p", p, "Bernoulli treatment probability");
    des->add_option("-o,--output", out, "Design output path")->required();

    auto* sim = app.add_subcommand("simulate", "Monte-Carlo summary for one instance");
    sim->add_option("instance", instance, "Instance JSON")->required();
    sim->add_option("-c,--config", config, "Simulation config JSON");
    sim->add_option("-o,--output", out, "Result JSON path (default stdout)");

    auto* swp = app.add_subcommand("sweep", "Parameter sweep to CSV and SVG");
    swp->add_option("config", config, "Sweep config JSON");
    swp->add_option("--preset", preset, "fig3 | fig4 | fig5 | fig6");
    swp->add_option("-o,--output", out, "Output directory")->required();
    swp->add_flag("--no-svg", no_svg, "Write the CSV only");

    auto* onl = app.add_subcommand("online", "Stream an instance through the online design");
    onl->add_option("instance", instance, "Instance JSON")->required();
    onl->add_option("-c,--config", config, "Online config JSON");
    onl->add_option("--order", order, "identity | reverse | random");
    onl->add_option("--trace", trace, "Per-step trace CSV");
    onl->add_option("-o,--output", out, "Result JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    if (seed_opt->count()) g.seed = seed;
    if (jobs_opt->count()) g.jobs = jobs;
    if (tol_opt->count()) g.tolerance = tolerance;
    if (trials_opt->count()) g.trials = trials;
    if (inst_opt->count()) g.instances = instances;

    try {
        if (*gen) return cmd_generate(g, config, out);
        if (*des) return cmd_design(g, instance, kind, p, out);
        if (*sim) return cmd_simulate(g, instance, config, out);
        if (*swp) return cmd_sweep(g, config, preset, out, no_svg);
        if (*onl) return cmd_online(g, instance, config, order, trace, out);
    } catch (const Failure& f) {
        spdlog::error("{}", f.message);
        return f.code;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kInternal;
    }
    return kInternal;
}
