#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "repex/engine.hpp"
#include "repex/errors.hpp"
#include "repex/model.hpp"
#include "repex/patterns.hpp"
#include "repex/pilot.hpp"

namespace repex {

struct PatternConfig {
    enum class Kind { Sync, Async };
    Kind kind = Kind::Sync;
    AsyncCriterion criterion;
};

// Everything one run needs, fully resolved. The JSON form round-trips:
// parsing the resolved dump yields an identical config.
struct SimulationConfig {
    PotentialSystem system;
    std::vector<DimensionSpec> dimensions;
    RunSettings run;
    PatternConfig pattern;
    PilotSpec pilot;
    DurationModel durations;
    FaultPolicy faults;
    std::string output_dir = "out";
};

namespace cfg {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& message) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + message);
}

inline const json& member(const json& node, const std::string& path, const char* key) {
    if (!node.is_object()) fail(path, "expected an object");
    auto it = node.find(key);
    if (it == node.end()) fail(path, std::string("missing required key '") + key + "'");
    return *it;
}

inline void check_keys(const json& node, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!node.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : node.items()) {
        bool known = false;
        for (const char* candidate : allowed)
            if (key == candidate) known = true;
        if (!known) fail(path, "unknown key '" + key + "'");
    }
}

inline double number(const json& node, const std::string& path) {
    if (!node.is_number()) fail(path, "expected a number");
    return node.get<double>();
}

inline double number_or(const json& node, const std::string& path, const char* key, double fallback) {
    if (!node.contains(key)) return fallback;
    return number(node.at(key), path + "." + key);
}

inline long integer_or(const json& node, const std::string& path, const char* key, long fallback) {
    if (!node.contains(key)) return fallback;
    const json& value = node.at(key);
    if (!value.is_number_integer()) fail(path + "." + key, "expected an integer");
    return value.get<long>();
}

inline bool boolean_or(const json& node, const std::string& path, const char* key, bool fallback) {
    if (!node.contains(key)) return fallback;
    const json& value = node.at(key);
    if (!value.is_boolean()) fail(path + "." + key, "expected a boolean");
    return value.get<bool>();
}

inline std::string text(const json& node, const std::string& path) {
    if (!node.is_string()) fail(path, "expected a string");
    return node.get<std::string>();
}

inline std::string text_or(const json& node, const std::string& path, const char* key,
                           const std::string& fallback) {
    if (!node.contains(key)) return fallback;
    return text(node.at(key), path + "." + key);
}

// --- system ---

inline PotentialSystem parse_system(const json& node, const std::string& path) {
    check_keys(node, path,
               {"kind", "a", "b", "amp_phi", "amp_psi", "coupling", "mass", "scaled_term"});
    PotentialSystem system;
    const std::string kind = text(member(node, path, "kind"), path + ".kind");
    if (kind == "double_well_1d") {
        DoubleWell1D dw;
        dw.a = number_or(node, path, "a", dw.a);
        dw.b = number_or(node, path, "b", dw.b);
        system.form = dw;
    } else if (kind == "torsion_2d") {
        Torsion2D torsion;
        torsion.amp_phi = number_or(node, path, "amp_phi", torsion.amp_phi);
        torsion.amp_psi = number_or(node, path, "amp_psi", torsion.amp_psi);
        torsion.coupling = number_or(node, path, "coupling", torsion.coupling);
        system.form = torsion;
    } else {
        fail(path + ".kind", "unknown system kind '" + kind + "'");
    }
    system.mass = number_or(node, path, "mass", 1.0);
    const std::string scaled = text_or(node, path, "scaled_term", "whole_potential");
    if (scaled == "whole_potential")
        system.scaled_term = ScaledTerm::WholePotential;
    else if (scaled == "coupling_only")
        system.scaled_term = ScaledTerm::CouplingOnly;
    else
        fail(path + ".scaled_term", "expected 'whole_potential' or 'coupling_only'");
    try {
        system.validate();
    } catch (const Error& error) {
        fail(path, error.what());
    }
    return system;
}

inline json dump_system(const PotentialSystem& system) {
    json node;
    if (const auto* dw = std::get_if<DoubleWell1D>(&system.form)) {
        node["kind"] = "double_well_1d";
        node["a"] = dw->a;
        node["b"] = dw->b;
    } else {
        const auto& torsion = std::get<Torsion2D>(system.form);
        node["kind"] = "torsion_2d";
        node["amp_phi"] = torsion.amp_phi;
        node["amp_psi"] = torsion.amp_psi;
        node["coupling"] = torsion.coupling;
    }
    node["mass"] = system.mass;
    node["scaled_term"] =
        system.scaled_term == ScaledTerm::WholePotential ? "whole_potential" : "coupling_only";
    return node;
}

// --- dimensions ---

inline std::vector<double> parse_ladder(const json& node, const std::string& path, DimensionKind kind,
                                        bool periodic) {
    check_keys(node, path, {"values", "lo", "hi", "n", "progression"});
    if (node.contains("values")) {
        const json& values = node.at("values");
        if (!values.is_array() || values.empty()) fail(path + ".values", "expected a non-empty array");
        std::vector<double> out;
        for (std::size_t k = 0; k < values.size(); ++k)
            out.push_back(number(values.at(k), path + ".values[" + std::to_string(k) + "]"));
        return out;
    }
    const double lo = number(member(node, path, "lo"), path + ".lo");
    const double hi = number(member(node, path, "hi"), path + ".hi");
    const long n = integer_or(node, path, "n", -1);
    if (n < 0) fail(path, "missing required key 'n'");
    const std::string progression = text_or(node, path, "progression", "geometric");
    Progression prog;
    if (progression == "geometric")
        prog = Progression::Geometric;
    else if (progression == "uniform")
        prog = Progression::Uniform;
    else
        fail(path + ".progression", "expected 'geometric' or 'uniform'");
    try {
        return build_ladder(kind, lo, hi, static_cast<int>(n), prog, periodic);
    } catch (const Error& error) {
        fail(path, error.what());
    }
}

inline DimensionSpec parse_dimension(const json& node, const std::string& path) {
    check_keys(node, path, {"kind", "ladder", "force_constant", "coordinate", "periodic"});
    const std::string kind_text = text(member(node, path, "kind"), path + ".kind");
    DimensionKind kind;
    if (kind_text == "temperature")
        kind = DimensionKind::Temperature;
    else if (kind_text == "umbrella")
        kind = DimensionKind::Umbrella;
    else if (kind_text == "hamiltonian_scale")
        kind = DimensionKind::HamiltonianScale;
    else
        fail(path + ".kind", "unknown dimension kind '" + kind_text + "'");

    const bool periodic = boolean_or(node, path, "periodic", kind == DimensionKind::Umbrella);
    DimensionSpec dim = make_dimension(
        kind, parse_ladder(member(node, path, "ladder"), path + ".ladder", kind, periodic));
    dim.periodic = periodic;
    if (kind == DimensionKind::Umbrella) {
        dim.force_constant = number_or(node, path, "force_constant", 0.02);
        dim.coordinate = static_cast<int>(integer_or(node, path, "coordinate", 0));
    } else if (node.contains("force_constant") || node.contains("coordinate")) {
        fail(path, "force_constant/coordinate only apply to umbrella dimensions");
    }
    try {
        dim.validate();
    } catch (const Error& error) {
        fail(path + ".ladder", error.what());
    }
    return dim;
}

inline json dump_dimension(const DimensionSpec& dim) {
    json node;
    node["kind"] = to_string(dim.kind);
    json ladder;
    std::vector<double> values;
    for (const auto& point : dim.ladder) values.push_back(point.value);
    ladder["values"] = values;
    node["ladder"] = ladder;
    node["periodic"] = dim.periodic;
    if (dim.kind == DimensionKind::Umbrella) {
        node["force_constant"] = dim.force_constant;
        node["coordinate"] = dim.coordinate;
    }
    return node;
}

// --- distributions / durations ---

inline Distribution parse_distribution(const json& node, const std::string& path) {
    check_keys(node, path, {"kind", "t", "mu", "sigma", "a", "b"});
    const std::string kind = text(member(node, path, "kind"), path + ".kind");
    if (kind == "constant") return Distribution::constant(number_or(node, path, "t", 1.0));
    if (kind == "log_normal")
        return Distribution::log_normal(number_or(node, path, "mu", 0.0),
                                        number_or(node, path, "sigma", 1.0));
    if (kind == "uniform")
        return Distribution::uniform(number_or(node, path, "a", 0.5), number_or(node, path, "b", 1.5));
    fail(path + ".kind", "expected 'constant', 'log_normal', or 'uniform'");
}

inline json dump_distribution(const Distribution& dist) {
    json node;
    switch (dist.kind) {
        case Distribution::Kind::Constant:
            node["kind"] = "constant";
            node["t"] = dist.t;
            break;
        case Distribution::Kind::LogNormal:
            node["kind"] = "log_normal";
            node["mu"] = dist.mu;
            node["sigma"] = dist.sigma;
            break;
        case Distribution::Kind::Uniform:
            node["kind"] = "uniform";
            node["a"] = dist.a;
            node["b"] = dist.b;
            break;
    }
    return node;
}

inline DurationModel parse_durations(const json& node, const std::string& path) {
    check_keys(node, path,
               {"md", "energy_eval", "exchange_compute", "launch_overhead", "data_time",
                "framework_overhead", "md_scale"});
    DurationModel durations;
    if (node.contains("md")) durations.md = parse_distribution(node.at("md"), path + ".md");
    if (node.contains("energy_eval"))
        durations.energy_eval = parse_distribution(node.at("energy_eval"), path + ".energy_eval");
    if (node.contains("exchange_compute"))
        durations.exchange_compute =
            parse_distribution(node.at("exchange_compute"), path + ".exchange_compute");
    durations.launch_overhead = number_or(node, path, "launch_overhead", durations.launch_overhead);
    durations.data_time = number_or(node, path, "data_time", durations.data_time);
    durations.framework_overhead =
        number_or(node, path, "framework_overhead", durations.framework_overhead);
    if (node.contains("md_scale")) {
        const json& scale = node.at("md_scale");
        if (!scale.is_array()) fail(path + ".md_scale", "expected an array");
        for (std::size_t k = 0; k < scale.size(); ++k)
            durations.md_scale.push_back(
                number(scale.at(k), path + ".md_scale[" + std::to_string(k) + "]"));
    }
    try {
        durations.validate();
    } catch (const Error& error) {
        fail(path, error.what());
    }
    return durations;
}

inline json dump_durations(const DurationModel& durations) {
    json node;
    node["md"] = dump_distribution(durations.md);
    node["energy_eval"] = dump_distribution(durations.energy_eval);
    node["exchange_compute"] = dump_distribution(durations.exchange_compute);
    node["launch_overhead"] = durations.launch_overhead;
    node["data_time"] = durations.data_time;
    node["framework_overhead"] = durations.framework_overhead;
    if (!durations.md_scale.empty()) node["md_scale"] = durations.md_scale;
    return node;
}

// --- top level ---

inline SimulationConfig config_from_json(const json& root) {
    const std::string path = "config";
    check_keys(root, path,
               {"system", "dimensions", "run", "pattern", "pilot", "durations", "faults", "seed",
                "output_dir"});
    SimulationConfig config;
    config.system = parse_system(member(root, path, "system"), "system");

    const json& dims = member(root, path, "dimensions");
    if (!dims.is_array() || dims.empty()) fail("dimensions", "expected a non-empty array");
    for (std::size_t d = 0; d < dims.size(); ++d)
        config.dimensions.push_back(
            parse_dimension(dims.at(d), "dimensions[" + std::to_string(d) + "]"));
    for (std::size_t d = 0; d < config.dimensions.size(); ++d) {
        const DimensionSpec& dim = config.dimensions[d];
        if (dim.kind == DimensionKind::Umbrella && dim.coordinate >= config.system.dof())
            fail("dimensions[" + std::to_string(d) + "].coordinate",
                 "restrained coordinate out of range for this system");
    }

    const json& run = member(root, path, "run");
    check_keys(run, "run",
               {"cycles", "steps_per_cycle", "step_size", "friction", "stride", "base_temperature",
                "record_trajectory"});
    config.run.cycles = integer_or(run, "run", "cycles", -1);
    if (config.run.cycles < 0) fail("run.cycles", "missing or negative");
    config.run.steps_per_cycle = integer_or(run, "run", "steps_per_cycle", 2000);
    if (config.run.steps_per_cycle < 0) fail("run.steps_per_cycle", "must be >= 0");
    config.run.step_size = number_or(run, "run", "step_size", 0.01);
    if (!(config.run.step_size > 0)) fail("run.step_size", "must be > 0");
    config.run.friction = number_or(run, "run", "friction", 1.0);
    if (config.run.friction < 0) fail("run.friction", "must be >= 0");
    config.run.stride = static_cast<int>(integer_or(run, "run", "stride", 100));
    if (config.run.stride < 1) fail("run.stride", "must be >= 1");
    config.run.base_temperature = number_or(run, "run", "base_temperature", 300.0);
    if (!(config.run.base_temperature > 0)) fail("run.base_temperature", "must be > 0");
    config.run.record_trajectory = boolean_or(run, "run", "record_trajectory", true);

    if (root.contains("pattern")) {
        const json& pattern = root.at("pattern");
        check_keys(pattern, "pattern", {"kind", "criterion"});
        const std::string kind = text(member(pattern, "pattern", "kind"), "pattern.kind");
        if (kind == "sync") {
            config.pattern.kind = PatternConfig::Kind::Sync;
        } else if (kind == "async") {
            config.pattern.kind = PatternConfig::Kind::Async;
            const json& criterion = member(pattern, "pattern", "criterion");
            check_keys(criterion, "pattern.criterion", {"kind", "n", "window"});
            const std::string ckind =
                text(member(criterion, "pattern.criterion", "kind"), "pattern.criterion.kind");
            if (ckind == "fifo_n") {
                config.pattern.criterion.kind = AsyncCriterion::Kind::FifoN;
                config.pattern.criterion.n =
                    static_cast<int>(integer_or(criterion, "pattern.criterion", "n", 1));
            } else if (ckind == "time_window") {
                config.pattern.criterion.kind = AsyncCriterion::Kind::TimeWindow;
                config.pattern.criterion.window =
                    number_or(criterion, "pattern.criterion", "window", 1.0);
            } else {
                fail("pattern.criterion.kind", "expected 'fifo_n' or 'time_window'");
            }
            try {
                config.pattern.criterion.validate();
            } catch (const Error& error) {
                fail("pattern.criterion", error.what());
            }
        } else {
            fail("pattern.kind", "expected 'sync' or 'async'");
        }
    }

    if (root.contains("pilot")) {
        const json& pilot = root.at("pilot");
        check_keys(pilot, "pilot",
                   {"total_cores", "cores_per_replica", "walltime_budget", "backend", "workers"});
        config.pilot.total_cores = static_cast<int>(integer_or(pilot, "pilot", "total_cores", 4));
        config.pilot.cores_per_replica =
            static_cast<int>(integer_or(pilot, "pilot", "cores_per_replica", 1));
        if (pilot.contains("walltime_budget"))
            config.pilot.walltime_budget = number(pilot.at("walltime_budget"), "pilot.walltime_budget");
        const std::string backend = text_or(pilot, "pilot", "backend", "real_workers");
        if (backend == "real_workers")
            config.pilot.backend = BackendKind::RealWorkers;
        else if (backend == "virtual_clock")
            config.pilot.backend = BackendKind::VirtualClock;
        else
            fail("pilot.backend", "expected 'real_workers' or 'virtual_clock'");
        config.pilot.workers = static_cast<int>(integer_or(pilot, "pilot", "workers", 0));
        try {
            config.pilot.validate();
        } catch (const Error& error) {
            fail("pilot", error.what());
        }
    } else {
        config.pilot.total_cores = 4;
        config.pilot.backend = BackendKind::RealWorkers;
    }

    if (root.contains("durations"))
        config.durations = parse_durations(root.at("durations"), "durations");

    if (root.contains("faults")) {
        const json& faults = root.at("faults");
        check_keys(faults, "faults", {"probability", "recovery", "max_retries"});
        config.faults.probability = number_or(faults, "faults", "probability", 0.0);
        const std::string recovery = text_or(faults, "faults", "recovery", "relaunch");
        if (recovery == "relaunch")
            config.faults.recovery = FaultPolicy::Recovery::Relaunch;
        else if (recovery == "continue")
            config.faults.recovery = FaultPolicy::Recovery::Continue;
        else
            fail("faults.recovery", "expected 'relaunch' or 'continue'");
        config.faults.max_retries = static_cast<int>(integer_or(faults, "faults", "max_retries", 3));
        try {
            config.faults.validate();
        } catch (const Error& error) {
            fail("faults", error.what());
        }
    }

    if (root.contains("seed")) {
        const json& seed = root.at("seed");
        if (!seed.is_number_unsigned() && !seed.is_number_integer())
            fail("seed", "expected an integer");
        config.run.seed = seed.get<std::uint64_t>();
    }
    config.output_dir = text_or(root, path, "output_dir", "out");
    return config;
}

inline json resolved_json(const SimulationConfig& config) {
    json root;
    root["system"] = dump_system(config.system);
    json dims = json::array();
    for (const auto& dim : config.dimensions) dims.push_back(dump_dimension(dim));
    root["dimensions"] = dims;
    root["run"] = {{"cycles", config.run.cycles},
                   {"steps_per_cycle", config.run.steps_per_cycle},
                   {"step_size", config.run.step_size},
                   {"friction", config.run.friction},
                   {"stride", config.run.stride},
                   {"base_temperature", config.run.base_temperature},
                   {"record_trajectory", config.run.record_trajectory}};
    if (config.pattern.kind == PatternConfig::Kind::Sync) {
        root["pattern"] = {{"kind", "sync"}};
    } else if (config.pattern.criterion.kind == AsyncCriterion::Kind::FifoN) {
        root["pattern"] = {{"kind", "async"},
                           {"criterion", {{"kind", "fifo_n"}, {"n", config.pattern.criterion.n}}}};
    } else {
        root["pattern"] = {
            {"kind", "async"},
            {"criterion", {{"kind", "time_window"}, {"window", config.pattern.criterion.window}}}};
    }
    json pilot;
    pilot["total_cores"] = config.pilot.total_cores;
    pilot["cores_per_replica"] = config.pilot.cores_per_replica;
    if (std::isfinite(config.pilot.walltime_budget))
        pilot["walltime_budget"] = config.pilot.walltime_budget;
    pilot["backend"] =
        config.pilot.backend == BackendKind::RealWorkers ? "real_workers" : "virtual_clock";
    pilot["workers"] = config.pilot.workers;
    root["pilot"] = pilot;
    root["durations"] = dump_durations(config.durations);
    root["faults"] = {{"probability", config.faults.probability},
                      {"recovery", config.faults.recovery == FaultPolicy::Recovery::Relaunch
                                       ? "relaunch"
                                       : "continue"},
                      {"max_retries", config.faults.max_retries}};
    root["seed"] = config.run.seed;
    root["output_dir"] = config.output_dir;
    return root;
}

}  // namespace cfg

inline SimulationConfig parse_config_text(const std::string& text, const std::string& source) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& error) {
        throw Error(ErrorCode::InvalidConfig, source + ": " + error.what());
    }
    return cfg::config_from_json(root);
}

inline SimulationConfig parse_config(const std::string& file_path) {
    std::ifstream in(file_path);
    if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open config file " + file_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, file_path);
}

// Number of replicas the configured grid will contain.
inline std::size_t configured_grid_size(const SimulationConfig& config) {
    std::size_t total = 1;
    for (const auto& dim : config.dimensions) total *= dim.ladder.size();
    return total;
}

inline ReplicaGrid build_configured_grid(const SimulationConfig& config) {
    return build_grid(config.dimensions, config.system.dof(), config.run.seed);
}

}  // namespace repex
