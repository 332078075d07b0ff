#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "repex/engine.hpp"
#include "repex/exchange.hpp"
#include "repex/metrics.hpp"
#include "repex/model.hpp"
#include "repex/pilot.hpp"

namespace repex {

// ---------------------------------------------------------------------------
// Run configuration and log
// ---------------------------------------------------------------------------

struct RunSettings {
    long cycles = 0;
    long steps_per_cycle = 1000;
    double step_size = 0.01;
    double friction = 1.0;
    int stride = 100;
    double base_temperature = 300.0;  // used when no temperature dimension exists
    bool record_trajectory = true;
    std::uint64_t seed = 0;
};

struct AsyncCriterion {
    enum class Kind { FifoN, TimeWindow };
    Kind kind = Kind::FifoN;
    int n = 1;            // FifoN: arrivals per exchange
    double window = 1.0;  // TimeWindow: seconds after the window opens

    void validate() const {
        if (kind == Kind::FifoN && n < 1)
            throw Error(ErrorCode::InvalidConfig, "FifoN criterion needs n >= 1");
        if (kind == Kind::TimeWindow && !(window > 0.0))
            throw Error(ErrorCode::InvalidConfig, "time window must be > 0");
    }
};

struct TimingRow {
    long cycle = 0;
    int dim = 0;
    CycleTiming timing;
};

struct WallRow {
    long cycle = 0;
    double wall_md_seconds = 0.0;
    double wall_ex_seconds = 0.0;
};

struct TaskRow {
    std::int64_t id = -1;
    TaskKind kind = TaskKind::MdSegment;
    int replica = -1;
    long cycle = 0;
    int attempt = 0;
    int cores = 1;
    double submit_t = 0.0;
    double start_t = 0.0;
    double end_t = 0.0;
    double overhead = 0.0;
    double duration = 0.0;
    bool failed = false;
    double wall_seconds = 0.0;
};

struct TrajectorySample {
    int replica = -1;
    long cycle = 0;
    std::vector<int> coords;  // ladder indices at sampling time
    std::vector<double> frame;
};

struct RunLog {
    std::vector<Event> events;
    std::vector<ExchangeRecord> records;
    std::vector<TimingRow> timings;
    std::vector<WallRow> walls;
    std::vector<TaskRow> tasks;
    std::vector<TrajectorySample> trajectory;
    bool truncated = false;
    double makespan = 0.0;
    double md_busy_core_seconds = 0.0;
    ExecutionMode mode = ExecutionMode::ModeI;
    long md_task_count = 0;
    long energy_task_count = 0;
    long exchange_phase_count = 0;
    long md_waves_nominal = 0;  // ceil(replicas / max_concurrency)
};

inline double utilization_of(const RunLog& log, const PilotSpec& pilot) {
    return utilization_percent(log.md_busy_core_seconds, pilot.total_cores, log.makespan);
}

// Called after each completed synchronous cycle; used for restart snapshots.
using CycleCallback = std::function<void(const ReplicaGrid&, long next_cycle, double virtual_now,
                                         std::int64_t next_task_id)>;

// ---------------------------------------------------------------------------
// Shared driver machinery
// ---------------------------------------------------------------------------

namespace detail {

struct PhaseOutcome {
    int home_slot = -1;
    double start_t = 0.0;
    double end_t = 0.0;
    double overhead = 0.0;
    double duration = 0.0;
};

// Splits a phase's span into work time and launch overhead along the chain of
// tasks that ran on the slot finishing last. Idle gaps on that slot count as
// work time: waiting for stragglers belongs to the phase, not to launching.
inline std::pair<double, double> phase_decomposition(const std::vector<PhaseOutcome>& outcomes,
                                                     double phase_start, double phase_end) {
    if (outcomes.empty()) return {0.0, 0.0};
    const PhaseOutcome* last = &outcomes.front();
    for (const auto& outcome : outcomes)
        if (outcome.end_t > last->end_t) last = &outcome;
    double chain_overhead = 0.0;
    double chain_work = 0.0;
    for (const auto& outcome : outcomes) {
        if (outcome.home_slot != last->home_slot) continue;
        chain_overhead += outcome.overhead;
        chain_work += outcome.duration;
    }
    const double span = phase_end - phase_start;
    const double idle = std::max(0.0, span - chain_overhead - chain_work);
    return {chain_work + idle, chain_overhead};
}

inline TaskRow to_task_row(const TaskOutcome& outcome) {
    TaskRow row;
    row.id = outcome.spec.id;
    row.kind = outcome.spec.kind;
    row.replica = outcome.spec.replica;
    row.cycle = outcome.spec.cycle;
    row.attempt = outcome.spec.attempt;
    row.cores = outcome.spec.cores;
    row.submit_t = outcome.submit_t;
    row.start_t = outcome.start_t;
    row.end_t = outcome.end_t;
    row.overhead = outcome.overhead;
    row.duration = outcome.duration;
    row.failed = outcome.failed;
    row.wall_seconds = outcome.wall_seconds;
    return row;
}

inline PhaseOutcome to_phase_outcome(const TaskOutcome& outcome) {
    return {outcome.home_slot, outcome.start_t, outcome.end_t, outcome.overhead, outcome.duration};
}

inline EngineRequest make_md_request(const ReplicaGrid& grid, const ReplicaState& replica,
                                     const RunSettings& settings) {
    EngineRequest request;
    request.kind = EngineRequest::Kind::MdSegment;
    request.configuration = replica.configuration;
    request.velocities = replica.velocities;
    request.seed = replica.rng_seed;
    request.params = active_params(grid, replica, settings.base_temperature);
    request.md.steps = settings.steps_per_cycle;
    request.md.step_size = settings.step_size;
    request.md.friction = settings.friction;
    request.md.stride = settings.stride;
    return request;
}

inline std::int64_t submit_md(ReplicaGrid& grid, Pilot& pilot, const RunSettings& settings,
                              ReplicaState& replica, long cycle) {
    TaskSpec task;
    task.kind = TaskKind::MdSegment;
    task.replica = replica.id;
    task.cores = pilot.spec().cores_per_replica;
    task.cycle = cycle;
    task.request = make_md_request(grid, replica, settings);
    replica.status = ReplicaStatus::RunningMD;
    return pilot.submit(std::move(task));
}

// Evaluates config_replica's configuration under params_replica's parameters,
// i.e. U_params(x_config), as a scheduled task.
inline std::int64_t submit_energy_eval(const ReplicaGrid& grid, Pilot& pilot,
                                       const RunSettings& settings, long cycle, int config_replica,
                                       int params_replica) {
    TaskSpec task;
    task.kind = TaskKind::EnergyEval;
    task.replica = config_replica;
    task.cores = pilot.spec().cores_per_replica;
    task.cycle = cycle;
    task.request.kind = EngineRequest::Kind::SinglePointEnergy;
    task.request.configuration = grid.at(config_replica).configuration;
    task.request.foreign_params =
        active_params(grid, grid.at(params_replica), settings.base_temperature);
    return pilot.submit(std::move(task));
}

inline void apply_md_result(ReplicaState& replica, const EngineResult& result) {
    replica.configuration = result.configuration;
    replica.velocities = result.velocities;
    replica.rng_seed = mix_seed(replica.rng_seed, stream::kReplica);
    replica.cycle_count += 1;
}

inline void record_trajectory(RunLog& log, const ReplicaState& replica, long cycle,
                              const EngineResult& result) {
    for (const auto& frame : result.trajectory)
        log.trajectory.push_back({replica.id, cycle, replica.coords, frame});
}

struct PairEnergies {
    double e_ii = 0.0, e_jj = 0.0, e_ij = 0.0, e_ji = 0.0;
};

// Deltas follow the generic criterion; the uniform draws come from a stream
// seeded by (global seed, phase tag, dimension) so exchange outcomes do not
// depend on task completion order.
inline ExchangeRecord build_record(const ReplicaGrid& grid, long cycle, int dim,
                                   const std::vector<std::pair<int, int>>& pairs,
                                   const std::vector<PairEnergies>& energies,
                                   double base_temperature, std::uint64_t seed,
                                   std::uint64_t phase_tag) {
    const DimensionKind kind = grid.dimensions[static_cast<std::size_t>(dim)].kind;
    Rng draw(mix_seed(seed, stream::kExchange, phase_tag, static_cast<std::uint64_t>(dim)));
    ExchangeRecord record;
    record.cycle = cycle;
    record.dim = dim;
    record.pairs.reserve(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        const ActiveParams params_i = active_params(grid, grid.at(i), base_temperature);
        const ActiveParams params_j = active_params(grid, grid.at(j), base_temperature);
        const PairEnergies& e = energies[p];
        const double delta = acceptance_delta(kind, params_i.temperature, params_j.temperature,
                                              e.e_ii, e.e_jj, e.e_ij, e.e_ji);
        const double u = draw.uniform();
        record.pairs.push_back({i, j, delta, u, u < acceptance_probability(delta)});
    }
    return record;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Synchronous pattern
// ---------------------------------------------------------------------------

// One cycle: MD for every live replica, global barrier, cross-energy tasks
// where the active dimension needs them, one exchange-compute task, swap
// application, barrier. Waves under Mode II fall out of the pilot's core
// accounting; nothing here is mode-specific.
inline RunLog run_sync(ReplicaGrid& grid, Pilot& pilot, const RunSettings& settings,
                       const DurationModel& durations, const CycleCallback& on_cycle_end = {},
                       long start_cycle = 0) {
    const bool physics = pilot.spec().backend == BackendKind::RealWorkers;
    const int num_dims = static_cast<int>(grid.dimensions.size());

    RunLog log;
    log.mode = execution_mode(pilot.spec(), grid.size());
    const std::size_t slots = static_cast<std::size_t>(max_concurrency(pilot.spec()));
    log.md_waves_nominal = static_cast<long>((grid.size() + slots - 1) / slots);

    std::map<int, double> own_energy;  // replica id -> U under own params, post-MD

    for (long cycle = start_cycle; cycle < settings.cycles; ++cycle) {
        if (pilot.now() >= pilot.spec().walltime_budget) {
            log.truncated = true;
            break;
        }
        if (durations.framework_overhead > 0.0)
            pilot.advance_to(pilot.now() + durations.framework_overhead);

        // --- MD phase ---
        const double md_start = pilot.now();
        std::vector<detail::PhaseOutcome> md_outcomes;
        for (ReplicaState& replica : grid.replicas) {
            if (replica.status == ReplicaStatus::Failed || replica.status == ReplicaStatus::Done)
                continue;
            detail::submit_md(grid, pilot, settings, replica, cycle);
            ++log.md_task_count;
        }
        double wall_md = 0.0;
        while (pilot.busy()) {
            TaskOutcome outcome = pilot.next_completion();
            log.tasks.push_back(detail::to_task_row(outcome));
            md_outcomes.push_back(detail::to_phase_outcome(outcome));
            wall_md += outcome.wall_seconds;
            ReplicaState& replica = grid.at(outcome.spec.replica);
            if (outcome.failed) {
                replica.status = ReplicaStatus::Failed;
                own_energy.erase(replica.id);
                continue;
            }
            detail::apply_md_result(replica, outcome.result);
            own_energy[replica.id] = outcome.result.energy;
            if (settings.record_trajectory) detail::record_trajectory(log, replica, cycle, outcome.result);
            replica.status = ReplicaStatus::AwaitingExchange;
        }
        pilot.mark_barrier();
        const double md_end = pilot.now();
        if (durations.data_time > 0.0) pilot.advance_to(pilot.now() + durations.data_time);

        // --- Exchange phase ---
        const int dim = active_dimension(cycle, num_dims);
        const DimensionKind kind = grid.dimensions[static_cast<std::size_t>(dim)].kind;
        const double ex_start = pilot.now();
        std::vector<detail::PhaseOutcome> ex_outcomes;

        // attempt counter in this dimension = cycle / num_dims under round-robin
        const PairPhase phase = ((cycle / num_dims) % 2 == 0) ? PairPhase::Even : PairPhase::Odd;
        std::vector<std::pair<int, int>> pairs;
        for (const auto& group : group_by_inactive(grid, dim))
            for (const auto& pair : pair_neighbors(group, phase)) pairs.push_back(pair);

        std::vector<detail::PairEnergies> energies(pairs.size());
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            energies[p].e_ii = own_energy.count(pairs[p].first) ? own_energy[pairs[p].first] : 0.0;
            energies[p].e_jj = own_energy.count(pairs[p].second) ? own_energy[pairs[p].second] : 0.0;
        }

        double wall_ex = 0.0;
        if (kind == DimensionKind::HamiltonianScale && !pairs.empty()) {
            // Scaled-Hamiltonian cross energies are scheduled as one extra
            // task per replica per attempt (doubling the phase's task count);
            // both backends schedule them, only RealWorkers uses the values.
            std::map<std::int64_t, std::pair<std::size_t, bool>> awaiting;
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const auto [i, j] = pairs[p];
                awaiting[detail::submit_energy_eval(grid, pilot, settings, cycle, j, i)] = {p, false};
                awaiting[detail::submit_energy_eval(grid, pilot, settings, cycle, i, j)] = {p, true};
                log.energy_task_count += 2;
            }
            std::vector<bool> pair_dead(pairs.size(), false);
            while (pilot.busy()) {
                TaskOutcome outcome = pilot.next_completion();
                log.tasks.push_back(detail::to_task_row(outcome));
                ex_outcomes.push_back(detail::to_phase_outcome(outcome));
                wall_ex += outcome.wall_seconds;
                const auto [p, is_ji] = awaiting.at(outcome.spec.id);
                if (outcome.failed) {
                    grid.at(outcome.spec.replica).status = ReplicaStatus::Failed;
                    own_energy.erase(outcome.spec.replica);
                    pair_dead[p] = true;
                    continue;
                }
                (is_ji ? energies[p].e_ji : energies[p].e_ij) = outcome.result.energy;
            }
            std::vector<std::pair<int, int>> alive_pairs;
            std::vector<detail::PairEnergies> alive_energies;
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                if (pair_dead[p]) continue;
                alive_pairs.push_back(pairs[p]);
                alive_energies.push_back(energies[p]);
            }
            pairs = std::move(alive_pairs);
            energies = std::move(alive_energies);
        } else if (kind == DimensionKind::Umbrella && physics) {
            const PotentialSystem* system = pilot.system();
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const auto [i, j] = pairs[p];
                const ActiveParams params_i = active_params(grid, grid.at(i), settings.base_temperature);
                const ActiveParams params_j = active_params(grid, grid.at(j), settings.base_temperature);
                energies[p].e_ij = single_point_energy(*system, grid.at(j).configuration, params_i);
                energies[p].e_ji = single_point_energy(*system, grid.at(i).configuration, params_j);
            }
        }

        // Virtual-clock energies are all zero, so deltas vanish and every
        // attempted swap is accepted: ladder identities still circulate and
        // the schedule shape stays faithful without any physics.
        ExchangeRecord record;
        record.cycle = cycle;
        record.dim = dim;
        if (!pairs.empty())
            record = detail::build_record(grid, cycle, dim, pairs, energies, settings.base_temperature,
                                          settings.seed, static_cast<std::uint64_t>(cycle));

        if (!pairs.empty()) {
            for (const auto& [i, j] : pairs) {
                grid.at(i).status = ReplicaStatus::InExchange;
                grid.at(j).status = ReplicaStatus::InExchange;
            }
            TaskSpec task;
            task.kind = TaskKind::ExchangeCompute;
            task.replica = -1;
            task.cores = 1;
            task.cycle = cycle;
            pilot.submit(std::move(task));
            while (pilot.busy()) {
                TaskOutcome outcome = pilot.next_completion();
                log.tasks.push_back(detail::to_task_row(outcome));
                ex_outcomes.push_back(detail::to_phase_outcome(outcome));
            }
        }
        pilot.mark_exchange(cycle, dim);
        apply_swaps(grid, record, dim);
        log.records.push_back(std::move(record));
        ++log.exchange_phase_count;

        for (ReplicaState& replica : grid.replicas)
            if (replica.status != ReplicaStatus::Failed && replica.status != ReplicaStatus::Done)
                replica.status = ReplicaStatus::Idle;
        pilot.mark_barrier();
        const double ex_end = pilot.now();

        const auto [t_md, launch_md] = detail::phase_decomposition(md_outcomes, md_start, md_end);
        const auto [t_ex, launch_ex] = detail::phase_decomposition(ex_outcomes, ex_start, ex_end);
        TimingRow row;
        row.cycle = cycle;
        row.dim = dim;
        row.timing = {t_md, t_ex, durations.data_time, durations.framework_overhead,
                      launch_md + launch_ex};
        log.timings.push_back(row);
        if (physics) log.walls.push_back({cycle, wall_md, wall_ex});

        if (on_cycle_end) on_cycle_end(grid, cycle + 1, pilot.now(), pilot.next_task_id());
    }

    for (ReplicaState& replica : grid.replicas)
        if (replica.status != ReplicaStatus::Failed && replica.cycle_count >= settings.cycles)
            replica.status = ReplicaStatus::Done;

    log.makespan = pilot.now();
    log.md_busy_core_seconds = pilot.md_busy_core_seconds();
    log.events = pilot.events();
    return log;
}

// ---------------------------------------------------------------------------
// Asynchronous pattern
// ---------------------------------------------------------------------------

// Replicas cycle MD -> gate -> subset exchange -> MD independently; there is
// no global barrier. FifoN gates every n arrivals (fewer when fewer replicas
// remain active, which keeps the tail live); TimeWindow gates everyone whose
// segment finished within `window` of the first arrival. Ungated and unpaired
// replicas go straight back to MD.
inline RunLog run_async(ReplicaGrid& grid, Pilot& pilot, const RunSettings& settings,
                        const DurationModel& durations, const AsyncCriterion& criterion) {
    criterion.validate();
    const bool physics = pilot.spec().backend == BackendKind::RealWorkers;
    const int num_dims = static_cast<int>(grid.dimensions.size());

    RunLog log;
    log.mode = execution_mode(pilot.spec(), grid.size());
    const std::size_t slots = static_cast<std::size_t>(max_concurrency(pilot.spec()));
    log.md_waves_nominal = static_cast<long>((grid.size() + slots - 1) / slots);

    std::map<int, double> own_energy;
    std::map<int, double> last_md_duration;
    std::map<int, double> last_md_overhead;

    struct PendingExchange {
        long event = 0;
        int dim = 0;
        std::vector<int> members;                // paired members only
        std::vector<std::pair<int, int>> pairs;
        std::vector<detail::PairEnergies> energies;
        std::vector<bool> pair_dead;
        std::vector<int> pair_outstanding;       // eval tasks still in flight per pair
        std::map<std::int64_t, std::pair<std::size_t, bool>> awaiting;
        std::size_t outstanding = 0;
        std::int64_t compute_task = -1;
        detail::PhaseOutcome compute_outcome;
    };

    std::deque<std::pair<int, double>> gate;  // (replica id, arrival time)
    std::vector<PendingExchange> pending;
    long exchange_events = 0;
    std::vector<long> attempts_per_dim(static_cast<std::size_t>(num_dims), 0);
    bool window_open = false;
    double window_deadline = 0.0;

    auto active_count = [&] {
        int n = 0;
        for (const ReplicaState& replica : grid.replicas)
            if (replica.status != ReplicaStatus::Failed && replica.status != ReplicaStatus::Done) ++n;
        return n;
    };

    auto resume_md = [&](int replica_id) {
        ReplicaState& replica = grid.at(replica_id);
        if (replica.status == ReplicaStatus::Failed || replica.status == ReplicaStatus::Done) return;
        if (replica.cycle_count >= settings.cycles) {
            replica.status = ReplicaStatus::Done;
            return;
        }
        detail::submit_md(grid, pilot, settings, replica, replica.cycle_count);
        ++log.md_task_count;
    };

    auto finalize_exchange = [&](PendingExchange& exchange) {
        std::vector<std::pair<int, int>> alive_pairs;
        std::vector<detail::PairEnergies> alive_energies;
        for (std::size_t p = 0; p < exchange.pairs.size(); ++p) {
            if (exchange.pair_dead[p]) continue;
            alive_pairs.push_back(exchange.pairs[p]);
            alive_energies.push_back(exchange.energies[p]);
        }
        ExchangeRecord record;
        record.cycle = exchange.event;
        record.dim = exchange.dim;
        if (!alive_pairs.empty())
            record = detail::build_record(grid, exchange.event, exchange.dim, alive_pairs,
                                          alive_energies, settings.base_temperature, settings.seed,
                                          static_cast<std::uint64_t>(exchange.event));
        pilot.mark_exchange(exchange.event, exchange.dim);
        apply_swaps(grid, record, exchange.dim);

        TimingRow row;
        row.cycle = exchange.event;
        row.dim = exchange.dim;
        double mean_md = 0.0, mean_over = 0.0;
        for (int member : exchange.members) {
            mean_md += last_md_duration.count(member) ? last_md_duration[member] : 0.0;
            mean_over += last_md_overhead.count(member) ? last_md_overhead[member] : 0.0;
        }
        if (!exchange.members.empty()) {
            mean_md /= static_cast<double>(exchange.members.size());
            mean_over /= static_cast<double>(exchange.members.size());
        }
        row.timing = {mean_md, exchange.compute_outcome.duration, durations.data_time,
                      durations.framework_overhead, mean_over + exchange.compute_outcome.overhead};
        log.timings.push_back(row);
        log.records.push_back(std::move(record));
        ++log.exchange_phase_count;

        for (int member : exchange.members) resume_md(member);
    };

    auto trigger_exchange = [&](std::vector<std::pair<int, double>> arrivals) {
        const long event = exchange_events++;
        const int dim = active_dimension(event, num_dims);
        attempts_per_dim[static_cast<std::size_t>(dim)] += 1;
        const PairPhase phase = (attempts_per_dim[static_cast<std::size_t>(dim)] - 1) % 2 == 0
                                    ? PairPhase::Even
                                    : PairPhase::Odd;

        // group the arrived subset by inactive coordinates, then pair
        // ladder-adjacent rungs on the parity anchor
        std::map<std::vector<int>, std::vector<GroupMember>> buckets;
        for (const auto& [replica_id, t] : arrivals) {
            const ReplicaState& replica = grid.at(replica_id);
            if (replica.status == ReplicaStatus::Failed) continue;
            std::vector<int> key;
            for (std::size_t d = 0; d < replica.coords.size(); ++d)
                if (static_cast<int>(d) != dim) key.push_back(replica.coords[d]);
            buckets[key].push_back({replica.coords[static_cast<std::size_t>(dim)], replica_id});
        }
        PendingExchange exchange;
        exchange.event = event;
        exchange.dim = dim;
        for (auto& [key, members] : buckets) {
            std::sort(members.begin(), members.end(), [](const GroupMember& a, const GroupMember& b) {
                return a.ladder_index < b.ladder_index;
            });
            for (const auto& pair : pair_neighbors(members, phase)) exchange.pairs.push_back(pair);
        }

        // unpaired arrivals go straight back to MD
        std::vector<bool> in_pair(grid.size(), false);
        for (const auto& [i, j] : exchange.pairs) in_pair[static_cast<std::size_t>(i)] =
            in_pair[static_cast<std::size_t>(j)] = true;
        for (const auto& [replica_id, t] : arrivals) {
            if (in_pair[static_cast<std::size_t>(replica_id)]) {
                exchange.members.push_back(replica_id);
                grid.at(replica_id).status = ReplicaStatus::InExchange;
            } else {
                resume_md(replica_id);
            }
        }
        if (exchange.pairs.empty()) {
            finalize_exchange(exchange);
            return;
        }

        exchange.energies.resize(exchange.pairs.size());
        exchange.pair_dead.assign(exchange.pairs.size(), false);
        for (std::size_t p = 0; p < exchange.pairs.size(); ++p) {
            const auto [i, j] = exchange.pairs[p];
            exchange.energies[p].e_ii = own_energy.count(i) ? own_energy[i] : 0.0;
            exchange.energies[p].e_jj = own_energy.count(j) ? own_energy[j] : 0.0;
        }

        const DimensionKind kind = grid.dimensions[static_cast<std::size_t>(dim)].kind;
        if (kind == DimensionKind::HamiltonianScale) {
            exchange.pair_outstanding.assign(exchange.pairs.size(), 2);
            for (std::size_t p = 0; p < exchange.pairs.size(); ++p) {
                const auto [i, j] = exchange.pairs[p];
                exchange.awaiting[detail::submit_energy_eval(grid, pilot, settings, exchange.event, j, i)] =
                    {p, false};
                exchange.awaiting[detail::submit_energy_eval(grid, pilot, settings, exchange.event, i, j)] =
                    {p, true};
                log.energy_task_count += 2;
            }
            exchange.outstanding = exchange.awaiting.size();
        } else if (kind == DimensionKind::Umbrella && physics) {
            const PotentialSystem* system = pilot.system();
            for (std::size_t p = 0; p < exchange.pairs.size(); ++p) {
                const auto [i, j] = exchange.pairs[p];
                const ActiveParams params_i = active_params(grid, grid.at(i), settings.base_temperature);
                const ActiveParams params_j = active_params(grid, grid.at(j), settings.base_temperature);
                exchange.energies[p].e_ij = single_point_energy(*system, grid.at(j).configuration, params_i);
                exchange.energies[p].e_ji = single_point_energy(*system, grid.at(i).configuration, params_j);
            }
        }

        if (exchange.outstanding == 0) {
            TaskSpec task;
            task.kind = TaskKind::ExchangeCompute;
            task.cores = 1;
            task.cycle = exchange.event;
            exchange.compute_task = pilot.submit(std::move(task));
        }
        pending.push_back(std::move(exchange));
    };

    auto maybe_trigger = [&] {
        if (criterion.kind == AsyncCriterion::Kind::FifoN) {
            for (;;) {
                const int threshold = std::min(criterion.n, active_count());
                if (threshold < 1 || static_cast<int>(gate.size()) < threshold || gate.empty()) break;
                std::vector<std::pair<int, double>> arrivals;
                const int take = std::min<int>(criterion.n, static_cast<int>(gate.size()));
                for (int k = 0; k < take; ++k) {
                    arrivals.push_back(gate.front());
                    gate.pop_front();
                }
                trigger_exchange(std::move(arrivals));
            }
        } else if (window_open) {
            const bool deadline_due = window_deadline <= pilot.next_event_time();
            const bool starved = !pilot.busy();
            if (deadline_due || starved) {
                if (window_deadline > pilot.now() && window_deadline <= pilot.next_event_time())
                    pilot.advance_to(window_deadline);
                window_open = false;
                std::vector<std::pair<int, double>> arrivals(gate.begin(), gate.end());
                gate.clear();
                trigger_exchange(std::move(arrivals));
            }
        }
    };

    // initial MD wave
    for (ReplicaState& replica : grid.replicas) {
        if (settings.cycles <= 0) break;
        detail::submit_md(grid, pilot, settings, replica, replica.cycle_count);
        ++log.md_task_count;
    }

    while (true) {
        maybe_trigger();
        if (!pilot.busy()) {
            if (!gate.empty() && active_count() > 0) continue;  // flush re-check
            break;
        }
        if (pilot.now() >= pilot.spec().walltime_budget) {
            log.truncated = true;
            break;
        }

        TaskOutcome outcome = pilot.next_completion();
        log.tasks.push_back(detail::to_task_row(outcome));

        if (outcome.spec.kind == TaskKind::MdSegment) {
            ReplicaState& replica = grid.at(outcome.spec.replica);
            if (outcome.failed) {
                replica.status = ReplicaStatus::Failed;
                own_energy.erase(replica.id);
                continue;
            }
            detail::apply_md_result(replica, outcome.result);
            own_energy[replica.id] = outcome.result.energy;
            last_md_duration[replica.id] = outcome.duration;
            last_md_overhead[replica.id] = outcome.overhead;
            if (settings.record_trajectory)
                detail::record_trajectory(log, replica, replica.cycle_count - 1, outcome.result);
            // every segment ends at the gate, including the last; replicas at
            // the target turn Done once their final exchange resolves
            replica.status = ReplicaStatus::AwaitingExchange;
            gate.emplace_back(replica.id, pilot.now());
            if (criterion.kind == AsyncCriterion::Kind::TimeWindow && !window_open) {
                window_open = true;
                window_deadline = pilot.now() + criterion.window;
            }
            continue;
        }

        if (outcome.spec.kind == TaskKind::EnergyEval) {
            auto it = std::find_if(pending.begin(), pending.end(), [&](const PendingExchange& e) {
                return e.awaiting.count(outcome.spec.id) > 0;
            });
            if (it == pending.end()) continue;
            PendingExchange& exchange = *it;
            const auto [p, is_ji] = exchange.awaiting.at(outcome.spec.id);
            if (outcome.failed) {
                ReplicaState& replica = grid.at(outcome.spec.replica);
                replica.status = ReplicaStatus::Failed;
                own_energy.erase(replica.id);
                exchange.pair_dead[p] = true;
            } else {
                (is_ji ? exchange.energies[p].e_ji : exchange.energies[p].e_ij) = outcome.result.energy;
            }
            if (--exchange.pair_outstanding[p] == 0 && exchange.pair_dead[p]) {
                // both eval tasks are in; the surviving side of a dead pair
                // returns to MD without exchanging
                const auto [i, j] = exchange.pairs[p];
                for (int member : {i, j}) {
                    if (grid.at(member).status == ReplicaStatus::Failed) {
                        std::erase(exchange.members, member);
                        continue;
                    }
                    std::erase(exchange.members, member);
                    resume_md(member);
                }
            }
            if (--exchange.outstanding == 0) {
                bool any_alive = false;
                for (std::size_t q = 0; q < exchange.pairs.size(); ++q)
                    if (!exchange.pair_dead[q]) any_alive = true;
                if (any_alive) {
                    TaskSpec task;
                    task.kind = TaskKind::ExchangeCompute;
                    task.cores = 1;
                    task.cycle = exchange.event;
                    exchange.compute_task = pilot.submit(std::move(task));
                } else {
                    PendingExchange done = std::move(exchange);
                    pending.erase(it);
                    finalize_exchange(done);
                }
            }
            continue;
        }

        // ExchangeCompute
        auto it = std::find_if(pending.begin(), pending.end(), [&](const PendingExchange& e) {
            return e.compute_task == outcome.spec.id;
        });
        if (it == pending.end()) continue;
        it->compute_outcome = detail::to_phase_outcome(outcome);
        PendingExchange done = std::move(*it);
        pending.erase(it);
        finalize_exchange(done);
    }

    for (ReplicaState& replica : grid.replicas)
        if (replica.status != ReplicaStatus::Failed && replica.cycle_count >= settings.cycles)
            replica.status = ReplicaStatus::Done;

    pilot.mark_barrier();
    log.makespan = pilot.now();
    log.md_busy_core_seconds = pilot.md_busy_core_seconds();
    log.events = pilot.events();
    return log;
}

}  // namespace repex
