#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "repex/engine.hpp"
#include "repex/exchange.hpp"
#include "repex/model.hpp"
#include "repex/patterns.hpp"
#include "repex/pilot.hpp"

namespace repex {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationOptions {
    std::uint64_t seed = 20240101;
    // Applied to every exchange delta inside the detailed-balance check; the
    // identity in production. Lets a test corrupt the criterion and verify
    // the check actually catches it.
    std::function<double(double)> delta_transform;
};

namespace validation {

// In-product quadrature machinery for the self-check suite.

inline std::vector<double> boltzmann_bin_probs(const PotentialSystem& system, double temperature,
                                               double lo, double hi, int bins, int points = 2001) {
    const double beta = beta_of(temperature);
    const double dx = (hi - lo) / (points - 1);
    std::vector<double> prob(static_cast<std::size_t>(bins), 0.0);
    double total = 0.0;
    double prev = std::exp(-beta * total_energy(system, std::vector{lo}, {}));
    for (int k = 1; k < points; ++k) {
        const double x = lo + k * dx;
        const double w = std::exp(-beta * total_energy(system, std::vector{x}, {}));
        const double piece = 0.5 * (prev + w) * dx;
        int bin = static_cast<int>(((lo + (k - 0.5) * dx) - lo) / (hi - lo) * bins);
        bin = std::clamp(bin, 0, bins - 1);
        prob[static_cast<std::size_t>(bin)] += piece;
        total += piece;
        prev = w;
    }
    for (auto& p : prob) p /= total;
    return prob;
}

class BoltzmannSampler {
public:
    BoltzmannSampler(const PotentialSystem& system, double temperature, double lo, double hi,
                     int points = 2001)
        : lo_(lo), dx_((hi - lo) / (points - 1)) {
        const double beta = beta_of(temperature);
        cdf_.resize(static_cast<std::size_t>(points), 0.0);
        double prev = std::exp(-beta * total_energy(system, std::vector{lo}, {}));
        double acc = 0.0;
        for (int k = 1; k < points; ++k) {
            const double w = std::exp(-beta * total_energy(system, std::vector{lo_ + k * dx_}, {}));
            acc += 0.5 * (prev + w) * dx_;
            cdf_[static_cast<std::size_t>(k)] = acc;
            prev = w;
        }
        for (auto& c : cdf_) c /= acc;
    }

    double sample(double u) const {
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return lo_;
        const std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
        if (k >= cdf_.size()) return lo_ + dx_ * static_cast<double>(cdf_.size() - 1);
        const double c0 = cdf_[k - 1], c1 = cdf_[k];
        return lo_ + dx_ * (static_cast<double>(k - 1) + (c1 > c0 ? (u - c0) / (c1 - c0) : 0.0));
    }

private:
    double lo_, dx_;
    std::vector<double> cdf_;
};

inline double l1_against(const std::vector<long>& counts, const std::vector<double>& prob) {
    long total = 0;
    for (long c : counts) total += c;
    double l1 = 0.0;
    for (std::size_t b = 0; b < counts.size(); ++b)
        l1 += std::abs(static_cast<double>(counts[b]) / static_cast<double>(total) - prob[b]);
    return l1;
}

inline std::vector<long> bin_samples(const std::vector<double>& xs, double lo, double hi, int bins) {
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    for (double x : xs) {
        if (x < lo || x >= hi) continue;
        const int bin = std::min(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins));
        counts[static_cast<std::size_t>(bin)] += 1;
    }
    return counts;
}

// E[min(1, e^-delta)] between two equilibrated temperature neighbors by 2-D
// quadrature.
inline double expected_pair_acceptance(const PotentialSystem& system, double t_i, double t_j,
                                       double lo, double hi, int points = 801) {
    const double beta_i = beta_of(t_i);
    const double beta_j = beta_of(t_j);
    const double dx = (hi - lo) / (points - 1);
    std::vector<double> u(static_cast<std::size_t>(points)), pi(u), pj(u);
    double zi = 0.0, zj = 0.0;
    for (int k = 0; k < points; ++k) {
        u[static_cast<std::size_t>(k)] = total_energy(system, std::vector{lo + k * dx}, {});
        const double edge = (k == 0 || k == points - 1) ? 0.5 : 1.0;
        pi[static_cast<std::size_t>(k)] = edge * std::exp(-beta_i * u[static_cast<std::size_t>(k)]);
        pj[static_cast<std::size_t>(k)] = edge * std::exp(-beta_j * u[static_cast<std::size_t>(k)]);
        zi += pi[static_cast<std::size_t>(k)];
        zj += pj[static_cast<std::size_t>(k)];
    }
    double acc = 0.0;
    for (int a = 0; a < points; ++a)
        for (int b = 0; b < points; ++b) {
            const double delta =
                (beta_i - beta_j) * (u[static_cast<std::size_t>(b)] - u[static_cast<std::size_t>(a)]);
            acc += pi[static_cast<std::size_t>(a)] * pj[static_cast<std::size_t>(b)] *
                   (delta <= 0.0 ? 1.0 : std::exp(-delta));
        }
    return acc / (zi * zj);
}

inline std::string fmt(double x) {
    std::ostringstream out;
    out.precision(4);
    out << x;
    return out.str();
}

// --- individual checks ---

inline CheckResult check_boltzmann_fidelity(std::uint64_t seed) {
    PotentialSystem system;
    system.form = DoubleWell1D{1.0, 2.0};
    system.mass = 0.5;

    CheckResult result{"boltzmann_fidelity", true, ""};
    for (double temperature : {280.0, 300.0, 330.0}) {
        EngineRequest request;
        request.configuration = {1.0};
        request.velocities = {0.0};
        request.seed = mix_seed(seed, static_cast<std::uint64_t>(temperature));
        request.params.temperature = temperature;
        request.md.steps = 1000000;
        request.md.step_size = 0.05;
        request.md.friction = 1.0;
        request.md.stride = 100;
        const auto run = run_md_segment(system, request);
        std::vector<double> xs;
        xs.reserve(run.trajectory.size());
        for (const auto& frame : run.trajectory) xs.push_back(frame[0]);
        const double l1 = l1_against(bin_samples(xs, -3, 3, 50),
                                     boltzmann_bin_probs(system, temperature, -3, 3, 50));
        result.detail += (result.detail.empty() ? "L1=" : ", ") + fmt(l1) + "@" + fmt(temperature) + "K";
        if (!(l1 <= 0.05)) result.passed = false;
    }
    return result;
}

inline CheckResult check_detailed_balance(std::uint64_t seed,
                                          const std::function<double(double)>& transform) {
    PotentialSystem system;
    system.form = DoubleWell1D{1.0, 2.0};
    const auto temperatures = build_ladder(DimensionKind::Temperature, 273, 373, 4,
                                           Progression::Geometric);
    std::vector<BoltzmannSampler> samplers;
    for (double t : temperatures) samplers.emplace_back(system, t, -3.0, 3.0);

    auto u_of = [&](double x) { return total_energy(system, std::vector{x}, {}); };
    Rng rng(mix_seed(seed, 0xdbULL));
    const int attempts = 100000;
    const int slots = static_cast<int>(temperatures.size());

    std::vector<std::vector<double>> slot_samples(static_cast<std::size_t>(slots));
    std::vector<long> pair_attempts(static_cast<std::size_t>(slots - 1), 0);
    std::vector<long> pair_accepts(static_cast<std::size_t>(slots - 1), 0);

    std::vector<double> xs(static_cast<std::size_t>(slots));
    for (int attempt = 0; attempt < attempts; ++attempt) {
        for (int s = 0; s < slots; ++s)
            xs[static_cast<std::size_t>(s)] = samplers[static_cast<std::size_t>(s)].sample(rng.uniform());
        const int anchor = attempt % 2;
        for (int lo = anchor; lo + 1 < slots; lo += 2) {
            const double delta_raw = acceptance_delta(
                DimensionKind::Temperature, temperatures[static_cast<std::size_t>(lo)],
                temperatures[static_cast<std::size_t>(lo + 1)], u_of(xs[static_cast<std::size_t>(lo)]),
                u_of(xs[static_cast<std::size_t>(lo + 1)]));
            const double delta = transform ? transform(delta_raw) : delta_raw;
            pair_attempts[static_cast<std::size_t>(lo)] += 1;
            if (rng.uniform() < acceptance_probability(delta)) {
                std::swap(xs[static_cast<std::size_t>(lo)], xs[static_cast<std::size_t>(lo + 1)]);
                pair_accepts[static_cast<std::size_t>(lo)] += 1;
            }
        }
        for (int s = 0; s < slots; ++s)
            slot_samples[static_cast<std::size_t>(s)].push_back(xs[static_cast<std::size_t>(s)]);
    }

    CheckResult result{"detailed_balance", true, ""};
    for (int s = 0; s < slots; ++s) {
        const double l1 =
            l1_against(bin_samples(slot_samples[static_cast<std::size_t>(s)], -3, 3, 50),
                       boltzmann_bin_probs(system, temperatures[static_cast<std::size_t>(s)], -3, 3, 50));
        if (!(l1 <= 0.05)) result.passed = false;
        if (s == 0) result.detail += "slotL1=" + fmt(l1);
    }
    for (int lo = 0; lo + 1 < slots; ++lo) {
        const double expected =
            expected_pair_acceptance(system, temperatures[static_cast<std::size_t>(lo)],
                                     temperatures[static_cast<std::size_t>(lo + 1)], -3.0, 3.0);
        const double observed = static_cast<double>(pair_accepts[static_cast<std::size_t>(lo)]) /
                                static_cast<double>(pair_attempts[static_cast<std::size_t>(lo)]);
        result.detail += ", pair" + std::to_string(lo) + "=" + fmt(observed) + "/" + fmt(expected);
        if (!(std::abs(observed - expected) <= 0.02)) result.passed = false;
    }
    return result;
}

inline CheckResult check_gradients(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x9fULL));
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        PotentialSystem system;
        ActiveParams params;
        params.lambda = rng.uniform(0.1, 1.0);
        std::vector<double> x;
        if (trial % 2 == 0) {
            system.form = Torsion2D{};
            x = {rng.uniform(0.0, 360.0), rng.uniform(0.0, 360.0)};
            params.restraints = {{rng.uniform(0.0, 360.0), 0.02, 0},
                                 {rng.uniform(0.0, 360.0), 0.02, 1}};
        } else {
            system.form = DoubleWell1D{1.0, 2.0};
            x = {rng.uniform(-2.5, 2.5)};
        }
        std::vector<double> f(x.size());
        compute_forces(system, x, params, f);
        for (std::size_t c = 0; c < x.size(); ++c) {
            auto xp = x, xm = x;
            xp[c] += h;
            xm[c] -= h;
            const double fd =
                -(total_energy(system, xp, params) - total_energy(system, xm, params)) / (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(f[c]), 1e-6});
            worst = std::max(worst, std::abs(f[c] - fd) / scale);
        }
    }
    return {"gradient_check", worst <= 1e-6, "max rel err=" + fmt(worst)};
}

inline CheckResult check_wave_law(std::uint64_t seed) {
    auto grid = build_grid({make_dimension(DimensionKind::Temperature,
                                           build_ladder(DimensionKind::Temperature, 273, 373, 512,
                                                        Progression::Geometric))},
                           1, seed);
    DurationModel durations;
    durations.md = Distribution::constant(10.0);
    durations.exchange_compute = Distribution::constant(1.0);
    durations.launch_overhead = 0.5;
    PilotSpec spec{128, 1, 1e18, BackendKind::VirtualClock, 0};
    Pilot pilot(spec, durations, {}, seed);
    RunSettings settings;
    settings.cycles = 1;
    settings.record_trajectory = false;
    settings.seed = seed;
    auto log = run_sync(grid, pilot, settings, durations);

    double md_end = 0.0;
    int used = 0, peak = 0;
    for (const auto& task : log.tasks)
        if (task.kind == TaskKind::MdSegment) md_end = std::max(md_end, task.end_t);
    for (const auto& e : log.events) {
        if (e.kind == EventKind::Start) used += e.cores;
        if (e.kind == EventKind::End || e.kind == EventKind::Fail) used -= e.cores;
        peak = std::max(peak, used);
    }
    const bool exact = md_end == 4 * 10.5 && peak <= 128;
    return {"mode2_wave_law", exact,
            "md makespan=" + fmt(md_end) + " (want 42), peak cores=" + std::to_string(peak)};
}

inline CheckResult check_sync_barrier(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xbaULL));
    for (int trial = 0; trial < 20; ++trial) {
        const int rungs = 2 + static_cast<int>(rng.uniform() * 7);
        const int cores = 1 + static_cast<int>(rng.uniform() * 2 * rungs);
        auto grid = build_grid({make_dimension(DimensionKind::Temperature,
                                               build_ladder(DimensionKind::Temperature, 280, 360,
                                                            rungs, Progression::Geometric))},
                               1, rng.next_u64());
        DurationModel durations;
        durations.md = Distribution::log_normal(rng.uniform(0.5, 2.0), rng.uniform(0.1, 1.0));
        durations.launch_overhead = rng.uniform(0.0, 1.0);
        PilotSpec spec{cores, 1, 1e18, BackendKind::VirtualClock, 0};
        Pilot pilot(spec, durations, {}, rng.next_u64());
        RunSettings settings;
        settings.cycles = 3;
        settings.record_trajectory = false;
        settings.seed = rng.next_u64();
        auto log = run_sync(grid, pilot, settings, durations);

        std::vector<double> exchange_end(3, 0.0);
        for (const auto& task : log.tasks)
            if (task.kind == TaskKind::ExchangeCompute)
                exchange_end[static_cast<std::size_t>(task.cycle)] =
                    std::max(exchange_end[static_cast<std::size_t>(task.cycle)], task.end_t);
        for (const auto& task : log.tasks) {
            if (task.kind != TaskKind::MdSegment || task.cycle == 0) continue;
            if (task.start_t < exchange_end[static_cast<std::size_t>(task.cycle - 1)])
                return {"sync_barrier", false,
                        "cycle " + std::to_string(task.cycle) + " started early at trial " +
                            std::to_string(trial)};
        }
    }
    return {"sync_barrier", true, "20 fuzzed configs"};
}

inline CheckResult check_async_liveness(std::uint64_t seed) {
    auto make_grid = [&] {
        return build_grid({make_dimension(DimensionKind::Temperature,
                                          build_ladder(DimensionKind::Temperature, 273, 373, 16,
                                                       Progression::Geometric))},
                          1, seed);
    };
    DurationModel durations;
    durations.md = Distribution::log_normal(1.0, 0.6);
    durations.launch_overhead = 0.1;
    RunSettings settings;
    settings.cycles = 4;
    settings.record_trajectory = false;
    settings.seed = seed;

    auto grid = make_grid();
    Pilot pilot(PilotSpec{8, 1, 1e18, BackendKind::VirtualClock, 0}, durations, {}, seed);
    run_async(grid, pilot, settings, durations, AsyncCriterion{AsyncCriterion::Kind::FifoN, 4, 0});
    for (const auto& replica : grid.replicas)
        if (replica.cycle_count != 4 || replica.status != ReplicaStatus::Done)
            return {"async_liveness", false, "p=0 replica stalled"};

    FaultPolicy faults;
    faults.probability = 0.3;
    faults.recovery = FaultPolicy::Recovery::Continue;
    auto grid2 = make_grid();
    Pilot pilot2(PilotSpec{8, 1, 1e18, BackendKind::VirtualClock, 0}, durations, faults, seed);
    run_async(grid2, pilot2, settings, durations, AsyncCriterion{AsyncCriterion::Kind::FifoN, 4, 0});
    for (const auto& replica : grid2.replicas)
        if (replica.status != ReplicaStatus::Done && replica.status != ReplicaStatus::Failed)
            return {"async_liveness", false, "faulty run left a replica in limbo"};
    return {"async_liveness", true, "p=0 and p=0.3/Continue both terminate"};
}

inline CheckResult check_determinism(std::uint64_t seed) {
    auto run_once = [&] {
        auto grid = build_grid({make_dimension(DimensionKind::Temperature,
                                               build_ladder(DimensionKind::Temperature, 273, 373, 6,
                                                            Progression::Geometric))},
                               1, seed);
        DurationModel durations;
        durations.md = Distribution::log_normal(1.0, 0.4);
        PilotSpec spec{6, 1, 1e18, BackendKind::VirtualClock, 0};
        Pilot pilot(spec, durations, {}, seed);
        RunSettings settings;
        settings.cycles = 5;
        settings.record_trajectory = false;
        settings.seed = seed;
        auto log = run_sync(grid, pilot, settings, durations);
        std::ostringstream out;
        for (const auto& e : log.events)
            out << e.t << ' ' << static_cast<int>(e.kind) << ' ' << e.task << ';';
        for (const auto& record : log.records)
            for (const auto& pair : record.pairs)
                out << pair.replica_i << ':' << pair.replica_j << ':' << pair.u << ':'
                    << pair.accepted << ';';
        return out.str();
    };
    const bool same = run_once() == run_once();
    return {"determinism", same, same ? "identical traces" : "trace mismatch"};
}

inline CheckResult check_utilization_ordering(std::uint64_t seed) {
    double sync_mean = 0.0, async_mean = 0.0;
    const int seeds = 8;
    for (int s = 0; s < seeds; ++s) {
        const std::uint64_t run_seed = mix_seed(seed, static_cast<std::uint64_t>(s));
        DurationModel durations;
        durations.md = Distribution::log_normal(std::log(10.0) - 0.75 * 0.75 / 2.0, 0.75);
        durations.energy_eval = Distribution::constant(1.0);
        durations.exchange_compute = Distribution::constant(1.0);
        durations.launch_overhead = 0.1;
        RunSettings settings;
        settings.cycles = 4;
        settings.record_trajectory = false;
        settings.seed = run_seed;
        auto dims = make_dimension(DimensionKind::Temperature,
                                   build_ladder(DimensionKind::Temperature, 273, 373, 32,
                                                Progression::Geometric));

        auto grid_sync = build_grid({dims}, 1, run_seed);
        Pilot pilot_sync(PilotSpec{8, 1, 1e18, BackendKind::VirtualClock, 0}, durations, {}, run_seed);
        sync_mean += utilization_of(run_sync(grid_sync, pilot_sync, settings, durations),
                                    pilot_sync.spec());

        auto grid_async = build_grid({dims}, 1, run_seed);
        Pilot pilot_async(PilotSpec{8, 1, 1e18, BackendKind::VirtualClock, 0}, durations, {}, run_seed);
        async_mean += utilization_of(
            run_async(grid_async, pilot_async, settings, durations,
                      AsyncCriterion{AsyncCriterion::Kind::FifoN, 8, 0}),
            pilot_async.spec());
    }
    sync_mean /= seeds;
    async_mean /= seeds;
    return {"utilization_ordering", async_mean >= sync_mean,
            "async=" + fmt(async_mean) + "% sync=" + fmt(sync_mean) + "%"};
}

}  // namespace validation

inline std::vector<CheckResult> run_validation_suite(const ValidationOptions& options = {}) {
    std::vector<CheckResult> results;
    results.push_back(validation::check_gradients(options.seed));
    results.push_back(validation::check_wave_law(options.seed));
    results.push_back(validation::check_sync_barrier(options.seed));
    results.push_back(validation::check_async_liveness(options.seed));
    results.push_back(validation::check_determinism(options.seed));
    results.push_back(validation::check_utilization_ordering(options.seed));
    results.push_back(validation::check_boltzmann_fidelity(options.seed));
    results.push_back(validation::check_detailed_balance(options.seed, options.delta_transform));
    return results;
}

}  // namespace repex
