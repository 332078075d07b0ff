#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "repex/errors.hpp"
#include "repex/rng.hpp"

namespace repex {

// Units are fixed project-wide: energies kcal/mol, temperatures K, angles
// degrees, times in scheduler seconds (virtual or wall).
inline constexpr double kBoltzmann = 0.0019872041;  // kcal mol^-1 K^-1

inline double beta_of(double temperature_k) {
    if (!(temperature_k > 0.0))
        throw Error(ErrorCode::InvalidValue, "temperature must be > 0 K, got " + std::to_string(temperature_k));
    return 1.0 / (kBoltzmann * temperature_k);
}

// ---------------------------------------------------------------------------
// Angles
// ---------------------------------------------------------------------------

// Wraps into [0, 360).
inline double wrap_angle(double degrees) {
    if (!std::isfinite(degrees)) throw Error(ErrorCode::InvalidValue, "non-finite angle");
    double r = degrees - 360.0 * std::floor(degrees / 360.0);
    if (r >= 360.0) r -= 360.0;  // floor rounding at the seam
    if (r < 0.0) r += 360.0;
    return r;
}

// Minimal-image difference a - b in [-180, 180).
inline double angle_difference(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw Error(ErrorCode::InvalidValue, "non-finite angle");
    double d = a - b;
    d -= 360.0 * std::floor(d / 360.0 + 0.5);
    if (d >= 180.0) d -= 360.0;
    if (d < -180.0) d += 360.0;
    return d;
}

// ---------------------------------------------------------------------------
// Exchange dimensions
// ---------------------------------------------------------------------------

enum class DimensionKind { Temperature, Umbrella, HamiltonianScale };

inline const char* to_string(DimensionKind kind) {
    switch (kind) {
        case DimensionKind::Temperature: return "temperature";
        case DimensionKind::Umbrella: return "umbrella";
        case DimensionKind::HamiltonianScale: return "hamiltonian_scale";
    }
    return "?";
}

enum class Progression { Geometric, Uniform };

struct ParameterPoint {
    double value = 0.0;  // K, degrees, or dimensionless lambda
    int index = 0;       // position on the ladder
};

struct DimensionSpec {
    DimensionKind kind = DimensionKind::Temperature;
    std::vector<ParameterPoint> ladder;
    // Umbrella only:
    double force_constant = 0.0;  // kcal mol^-1 deg^-2
    int coordinate = 0;           // restrained coordinate index
    bool periodic = true;         // uniform spacing treats [lo, hi) as a circle

    void validate(const std::string& where = "dimension") const {
        if (ladder.empty()) throw Error(ErrorCode::InvalidConfig, where + ": ladder must have at least one window");
        for (std::size_t i = 0; i < ladder.size(); ++i) {
            if (ladder[i].index != static_cast<int>(i))
                throw Error(ErrorCode::InvalidConfig, where + ": ladder indices must be 0..n-1 in order");
            if (!std::isfinite(ladder[i].value))
                throw Error(ErrorCode::InvalidValue, where + ": non-finite ladder value");
        }
        for (std::size_t i = 1; i < ladder.size(); ++i)
            if (!(ladder[i].value > ladder[i - 1].value))
                throw Error(ErrorCode::InvalidConfig, where + ": ladder values must be strictly increasing");
        switch (kind) {
            case DimensionKind::Temperature:
                if (ladder.front().value <= 0.0)
                    throw Error(ErrorCode::InvalidRange, where + ": temperatures must be > 0 K");
                break;
            case DimensionKind::Umbrella:
                if (force_constant < 0.0)
                    throw Error(ErrorCode::InvalidRange, where + ": umbrella force constant must be >= 0");
                if (coordinate < 0)
                    throw Error(ErrorCode::InvalidConfig, where + ": restrained coordinate index must be >= 0");
                break;
            case DimensionKind::HamiltonianScale:
                if (ladder.front().value < 0.0 || ladder.back().value > 1.0)
                    throw Error(ErrorCode::InvalidRange, where + ": lambda ladder must lie in [0, 1]");
                break;
        }
    }
};

// Ladder construction. Geometric places windows at lo*(hi/lo)^(i/(n-1)) with
// exact endpoints; Uniform with `periodic` places n windows spaced (hi-lo)/n
// from lo (no duplicate of lo at hi), otherwise includes both endpoints.
inline std::vector<double> build_ladder(DimensionKind kind, double lo, double hi, int n,
                                        Progression progression, bool periodic = false) {
    if (n < 1) throw Error(ErrorCode::InvalidCount, "ladder needs at least one window");
    if (!(lo <= hi)) throw Error(ErrorCode::InvalidRange, "ladder lo must be <= hi");
    if (progression == Progression::Geometric && lo <= 0.0)
        throw Error(ErrorCode::InvalidRange, "geometric progression requires lo > 0");
    (void)kind;

    std::vector<double> values(static_cast<std::size_t>(n));
    if (n == 1) {
        values[0] = lo;
        return values;
    }
    switch (progression) {
        case Progression::Geometric: {
            const double ratio = hi / lo;
            for (int i = 0; i < n; ++i)
                values[static_cast<std::size_t>(i)] = lo * std::pow(ratio, static_cast<double>(i) / (n - 1));
            values.front() = lo;
            values.back() = hi;
            break;
        }
        case Progression::Uniform: {
            if (periodic) {
                const double step = (hi - lo) / n;
                for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = lo + step * i;
            } else {
                const double step = (hi - lo) / (n - 1);
                for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = lo + step * i;
                values.back() = hi;
            }
            break;
        }
    }
    return values;
}

inline DimensionSpec make_dimension(DimensionKind kind, const std::vector<double>& values) {
    DimensionSpec dim;
    dim.kind = kind;
    dim.ladder.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        dim.ladder.push_back({values[i], static_cast<int>(i)});
    return dim;
}

// ---------------------------------------------------------------------------
// Replicas
// ---------------------------------------------------------------------------

enum class ReplicaStatus { Idle, RunningMD, AwaitingExchange, InExchange, Failed, Done };

inline const char* to_string(ReplicaStatus status) {
    switch (status) {
        case ReplicaStatus::Idle: return "idle";
        case ReplicaStatus::RunningMD: return "running_md";
        case ReplicaStatus::AwaitingExchange: return "awaiting_exchange";
        case ReplicaStatus::InExchange: return "in_exchange";
        case ReplicaStatus::Failed: return "failed";
        case ReplicaStatus::Done: return "done";
    }
    return "?";
}

struct ReplicaState {
    int id = 0;
    std::vector<int> coords;  // one ladder index per dimension
    std::vector<double> configuration;
    std::vector<double> velocities;
    long cycle_count = 0;
    ReplicaStatus status = ReplicaStatus::Idle;
    std::uint64_t rng_seed = 0;
};

// The active thermodynamic state of one replica: everything the engine needs
// beyond the configuration itself.
struct Restraint {
    double center = 0.0;         // degrees
    double force_constant = 0.0; // kcal mol^-1 deg^-2
    int coordinate = 0;
};

struct ActiveParams {
    double temperature = 300.0;  // K
    std::vector<Restraint> restraints;
    double lambda = 1.0;  // Hamiltonian scaling; 1 = unscaled
};

struct ReplicaGrid {
    std::vector<DimensionSpec> dimensions;
    std::vector<ReplicaState> replicas;

    std::size_t size() const { return replicas.size(); }

    const ReplicaState& at(int id) const { return replicas.at(static_cast<std::size_t>(id)); }
    ReplicaState& at(int id) { return replicas.at(static_cast<std::size_t>(id)); }

    double ladder_value(int dim, int index) const {
        return dimensions.at(static_cast<std::size_t>(dim)).ladder.at(static_cast<std::size_t>(index)).value;
    }
};

// Thermodynamic parameters implied by a replica's ladder coordinates.
// `base_temperature` applies when no temperature dimension is configured.
inline ActiveParams active_params(const ReplicaGrid& grid, const ReplicaState& replica,
                                  double base_temperature = 300.0) {
    ActiveParams params;
    params.temperature = base_temperature;
    for (std::size_t d = 0; d < grid.dimensions.size(); ++d) {
        const DimensionSpec& dim = grid.dimensions[d];
        const double value = grid.ladder_value(static_cast<int>(d), replica.coords.at(d));
        switch (dim.kind) {
            case DimensionKind::Temperature:
                params.temperature = value;
                break;
            case DimensionKind::Umbrella:
                params.restraints.push_back({value, dim.force_constant, dim.coordinate});
                break;
            case DimensionKind::HamiltonianScale:
                params.lambda = value;
                break;
        }
    }
    return params;
}

// Builds the full Cartesian-product grid. Replica ids are assigned in
// row-major order of the ladder indices (dim 0 slowest), per-replica seeds are
// mixed from (global seed, id), and restrained coordinates start at their
// window centers so every window begins inside its own basin.
inline ReplicaGrid build_grid(std::vector<DimensionSpec> dimensions, int dof,
                              std::uint64_t global_seed) {
    if (dimensions.empty()) throw Error(ErrorCode::InvalidConfig, "grid needs at least one dimension");
    if (dof < 1) throw Error(ErrorCode::InvalidConfig, "grid needs at least one coordinate");
    for (std::size_t d = 0; d < dimensions.size(); ++d) {
        dimensions[d].validate("dimensions[" + std::to_string(d) + "]");
        if (dimensions[d].kind == DimensionKind::Umbrella && dimensions[d].coordinate >= dof)
            throw Error(ErrorCode::InvalidConfig,
                        "dimensions[" + std::to_string(d) + "]: restrained coordinate out of range");
    }

    std::size_t total = 1;
    for (const auto& dim : dimensions) total *= dim.ladder.size();

    ReplicaGrid grid;
    grid.dimensions = std::move(dimensions);
    grid.replicas.resize(total);

    std::vector<int> coords(grid.dimensions.size(), 0);
    for (std::size_t id = 0; id < total; ++id) {
        ReplicaState& replica = grid.replicas[id];
        replica.id = static_cast<int>(id);
        replica.coords = coords;
        replica.configuration.assign(static_cast<std::size_t>(dof), 0.0);
        replica.velocities.assign(static_cast<std::size_t>(dof), 0.0);
        replica.rng_seed = mix_seed(global_seed, stream::kReplica, id);
        for (std::size_t d = 0; d < grid.dimensions.size(); ++d) {
            const DimensionSpec& dim = grid.dimensions[d];
            if (dim.kind == DimensionKind::Umbrella)
                replica.configuration[static_cast<std::size_t>(dim.coordinate)] =
                    dim.ladder[static_cast<std::size_t>(coords[d])].value;
        }
        // advance row-major: last dimension varies fastest
        for (std::size_t d = grid.dimensions.size(); d-- > 0;) {
            if (++coords[d] < static_cast<int>(grid.dimensions[d].ladder.size())) break;
            coords[d] = 0;
        }
    }
    return grid;
}

}  // namespace repex
