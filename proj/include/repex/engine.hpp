#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "repex/errors.hpp"
#include "repex/model.hpp"
#include "repex/rng.hpp"

namespace repex {

inline constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

// ---------------------------------------------------------------------------
// Analytic potentials
// ---------------------------------------------------------------------------

// u(x) = a*x^4 - b*x^2, kcal/mol; two basins at +-sqrt(b/2a) for b > 0.
struct DoubleWell1D {
    double a = 1.0;
    double b = 2.0;
};

// u(phi, psi) = amp_phi*(1-cos phi) + amp_psi*(1-cos psi) + coupling*cos(phi+psi),
// angles in degrees, converted to radians internally. Multi-basin for the
// defaults (3.0, 3.0, 1.5).
struct Torsion2D {
    double amp_phi = 3.0;
    double amp_psi = 3.0;
    double coupling = 1.5;
};

// Which part of the base potential a HamiltonianScale dimension multiplies.
enum class ScaledTerm { WholePotential, CouplingOnly };

struct PotentialSystem {
    std::variant<DoubleWell1D, Torsion2D> form = DoubleWell1D{};
    double mass = 1.0;  // arbitrary units, shared by all coordinates
    ScaledTerm scaled_term = ScaledTerm::WholePotential;

    int dof() const { return std::holds_alternative<DoubleWell1D>(form) ? 1 : 2; }
    bool periodic() const { return std::holds_alternative<Torsion2D>(form); }

    void validate() const {
        if (const auto* dw = std::get_if<DoubleWell1D>(&form)) {
            if (!(dw->a > 0.0)) throw Error(ErrorCode::InvalidConfig, "double well: a must be > 0");
            if (!std::isfinite(dw->a) || !std::isfinite(dw->b))
                throw Error(ErrorCode::InvalidValue, "double well: non-finite parameter");
        } else {
            const auto& t = std::get<Torsion2D>(form);
            if (!std::isfinite(t.amp_phi) || !std::isfinite(t.amp_psi) || !std::isfinite(t.coupling))
                throw Error(ErrorCode::InvalidValue, "torsion: non-finite parameter");
        }
        if (!(mass > 0.0)) throw Error(ErrorCode::InvalidConfig, "mass must be > 0");
    }
};

namespace detail {

inline void check_dof(const PotentialSystem& system, std::size_t n) {
    if (n != static_cast<std::size_t>(system.dof()))
        throw Error(ErrorCode::InvalidConfig,
                    "configuration has " + std::to_string(n) + " coordinates, system expects " +
                        std::to_string(system.dof()));
}

inline double base_energy(const PotentialSystem& system, std::span<const double> x, double lambda) {
    if (const auto* dw = std::get_if<DoubleWell1D>(&system.form)) {
        const double q = x[0];
        const double u = dw->a * q * q * q * q - dw->b * q * q;
        return system.scaled_term == ScaledTerm::WholePotential ? lambda * u : u;
    }
    const auto& t = std::get<Torsion2D>(system.form);
    const double phi = x[0] * kDegToRad;
    const double psi = x[1] * kDegToRad;
    const double uncoupled = t.amp_phi * (1.0 - std::cos(phi)) + t.amp_psi * (1.0 - std::cos(psi));
    const double coupled = t.coupling * std::cos(phi + psi);
    return system.scaled_term == ScaledTerm::WholePotential ? lambda * (uncoupled + coupled)
                                                            : uncoupled + lambda * coupled;
}

// d(base)/dx_i in kcal/mol per coordinate unit (per degree for torsions).
inline void base_gradient(const PotentialSystem& system, std::span<const double> x, double lambda,
                          std::span<double> grad) {
    if (const auto* dw = std::get_if<DoubleWell1D>(&system.form)) {
        const double q = x[0];
        double g = 4.0 * dw->a * q * q * q - 2.0 * dw->b * q;
        if (system.scaled_term == ScaledTerm::WholePotential) g *= lambda;
        grad[0] = g;
        return;
    }
    const auto& t = std::get<Torsion2D>(system.form);
    const double phi = x[0] * kDegToRad;
    const double psi = x[1] * kDegToRad;
    const double couple_scale = system.scaled_term == ScaledTerm::CouplingOnly ? lambda : 1.0;
    const double whole_scale = system.scaled_term == ScaledTerm::WholePotential ? lambda : 1.0;
    const double dcouple = -couple_scale * t.coupling * std::sin(phi + psi);
    grad[0] = whole_scale * (t.amp_phi * std::sin(phi) + dcouple) * kDegToRad;
    grad[1] = whole_scale * (t.amp_psi * std::sin(psi) + dcouple) * kDegToRad;
}

inline double restraint_delta(const PotentialSystem& system, double coord, double center) {
    return system.periodic() ? angle_difference(coord, center) : coord - center;
}

}  // namespace detail

// Potential energy of `config` under `params`: lambda-scaled base term plus
// harmonic restraints 0.5*k*delta^2 with minimal-image deltas on periodic
// coordinates.
inline double total_energy(const PotentialSystem& system, std::span<const double> config,
                           const ActiveParams& params) {
    detail::check_dof(system, config.size());
    double energy = detail::base_energy(system, config, params.lambda);
    for (const Restraint& r : params.restraints) {
        if (r.coordinate < 0 || r.coordinate >= system.dof())
            throw Error(ErrorCode::InvalidConfig, "restraint coordinate out of range");
        const double delta = detail::restraint_delta(system, config[static_cast<std::size_t>(r.coordinate)], r.center);
        energy += 0.5 * r.force_constant * delta * delta;
    }
    return energy;
}

// Forces F = -dU/dx, same layout as the configuration.
inline void compute_forces(const PotentialSystem& system, std::span<const double> config,
                           const ActiveParams& params, std::span<double> forces) {
    detail::check_dof(system, config.size());
    detail::base_gradient(system, config, params.lambda, forces);
    for (auto& f : forces) f = -f;
    for (const Restraint& r : params.restraints) {
        const double delta = detail::restraint_delta(system, config[static_cast<std::size_t>(r.coordinate)], r.center);
        forces[static_cast<std::size_t>(r.coordinate)] -= r.force_constant * delta;
    }
}

inline double single_point_energy(const PotentialSystem& system, std::span<const double> config,
                                  const ActiveParams& foreign_params) {
    return total_energy(system, config, foreign_params);
}

// ---------------------------------------------------------------------------
// MD segments
// ---------------------------------------------------------------------------

struct MdSettings {
    long steps = 0;
    double step_size = 0.01;
    double friction = 1.0;  // gamma; 0 reduces BAOAB to velocity Verlet
    int stride = 100;       // trajectory sampling interval, initial frame included
};

struct EngineRequest {
    enum class Kind { MdSegment, SinglePointEnergy };

    Kind kind = Kind::MdSegment;
    std::vector<double> configuration;
    std::vector<double> velocities;
    std::uint64_t seed = 0;
    ActiveParams params;           // the replica's own parameters
    MdSettings md;                 // MdSegment only
    ActiveParams foreign_params;   // SinglePointEnergy only

    void validate() const {
        if (kind == Kind::MdSegment) {
            if (md.steps < 0) throw Error(ErrorCode::InvalidConfig, "md steps must be >= 0");
            if (!(md.step_size > 0.0)) throw Error(ErrorCode::InvalidConfig, "md step size must be > 0");
            if (md.stride < 1) throw Error(ErrorCode::InvalidConfig, "trajectory stride must be >= 1");
            if (md.friction < 0.0) throw Error(ErrorCode::InvalidConfig, "friction must be >= 0");
        }
    }
};

struct EngineResult {
    std::vector<double> configuration;
    std::vector<double> velocities;
    double energy = 0.0;  // under the replica's own parameters
    std::vector<std::vector<double>> trajectory;
    double wall_seconds = 0.0;
    double virtual_seconds = 0.0;  // assigned by the pilot
};

// Advances one replica by `md.steps` BAOAB Langevin steps at the request
// temperature. Deterministic given (seed, request). Throws EngineError if the
// dynamics become non-finite.
inline EngineResult run_md_segment(const PotentialSystem& system, const EngineRequest& request) {
    request.validate();
    detail::check_dof(system, request.configuration.size());
    const auto t0 = std::chrono::steady_clock::now();

    const std::size_t n = request.configuration.size();
    std::vector<double> x = request.configuration;
    std::vector<double> v = request.velocities;
    if (v.size() != n) v.assign(n, 0.0);
    std::vector<double> f(n);

    const double h = request.md.step_size;
    const double half = 0.5 * h;
    const double inv_mass = 1.0 / system.mass;
    const double kt = kBoltzmann * request.params.temperature;
    const double c1 = std::exp(-request.md.friction * h);
    const double c2 = std::sqrt(std::max(0.0, (1.0 - c1 * c1) * kt * inv_mass));

    Rng rng(request.seed);
    EngineResult result;
    result.trajectory.reserve(static_cast<std::size_t>(request.md.steps / request.md.stride) + 1);
    result.trajectory.push_back(x);

    compute_forces(system, x, request.params, f);
    for (long step = 0; step < request.md.steps; ++step) {
        for (std::size_t i = 0; i < n; ++i) v[i] += half * f[i] * inv_mass;
        for (std::size_t i = 0; i < n; ++i) x[i] += half * v[i];
        if (c2 > 0.0 || c1 != 1.0)
            for (std::size_t i = 0; i < n; ++i) v[i] = c1 * v[i] + c2 * rng.gaussian();
        for (std::size_t i = 0; i < n; ++i) x[i] += half * v[i];
        if (system.periodic())
            for (auto& q : x) q = wrap_angle(q);
        compute_forces(system, x, request.params, f);
        for (std::size_t i = 0; i < n; ++i) v[i] += half * f[i] * inv_mass;

        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(x[i]) || !std::isfinite(v[i]) || !std::isfinite(f[i]))
                throw EngineError("non-finite state at step " + std::to_string(step));
        if ((step + 1) % request.md.stride == 0) result.trajectory.push_back(x);
    }

    result.configuration = std::move(x);
    result.velocities = std::move(v);
    result.energy = total_energy(system, result.configuration, request.params);
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace repex
