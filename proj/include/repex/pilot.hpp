#pragma once

#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <mutex>
#include <queue>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "repex/engine.hpp"
#include "repex/errors.hpp"
#include "repex/model.hpp"
#include "repex/rng.hpp"

namespace repex {

// ---------------------------------------------------------------------------
// Resource description
// ---------------------------------------------------------------------------

enum class BackendKind { RealWorkers, VirtualClock };

struct PilotSpec {
    int total_cores = 1;
    int cores_per_replica = 1;
    double walltime_budget = std::numeric_limits<double>::infinity();  // virtual seconds
    BackendKind backend = BackendKind::VirtualClock;
    int workers = 0;  // RealWorkers thread count; 0 = hardware concurrency

    void validate() const {
        if (cores_per_replica < 1) throw Error(ErrorCode::InvalidConfig, "cores per replica must be >= 1");
        if (total_cores < cores_per_replica)
            throw Error(ErrorCode::InvalidConfig, "pilot needs at least cores-per-replica cores");
        if (!(walltime_budget > 0.0)) throw Error(ErrorCode::InvalidConfig, "walltime budget must be > 0");
    }
};

inline int max_concurrency(const PilotSpec& pilot) {
    pilot.validate();
    return pilot.total_cores / pilot.cores_per_replica;
}

enum class ExecutionMode { ModeI, ModeII };

inline const char* to_string(ExecutionMode mode) {
    return mode == ExecutionMode::ModeI ? "mode_i" : "mode_ii";
}

// Mode I: every replica can run concurrently. Mode II: fewer core slots than
// replicas, so phases execute in waves.
inline ExecutionMode execution_mode(const PilotSpec& pilot, std::size_t replica_count) {
    if (replica_count == 0) throw Error(ErrorCode::InvalidConfig, "empty grid");
    return static_cast<std::size_t>(max_concurrency(pilot)) >= replica_count ? ExecutionMode::ModeI
                                                                             : ExecutionMode::ModeII;
}

// ---------------------------------------------------------------------------
// Task durations and faults
// ---------------------------------------------------------------------------

struct Distribution {
    enum class Kind { Constant, LogNormal, Uniform };

    Kind kind = Kind::Constant;
    double t = 1.0;               // Constant
    double mu = 0.0, sigma = 1.0; // LogNormal
    double a = 0.5, b = 1.5;      // Uniform

    static Distribution constant(double seconds) { return {Kind::Constant, seconds, 0, 1, 0, 0}; }
    static Distribution log_normal(double mu, double sigma) { return {Kind::LogNormal, 1, mu, sigma, 0, 0}; }
    static Distribution uniform(double lo, double hi) { return {Kind::Uniform, 1, 0, 1, lo, hi}; }

    double sample(Rng& rng) const {
        switch (kind) {
            case Kind::Constant: return t;
            case Kind::LogNormal: return std::exp(mu + sigma * rng.gaussian());
            case Kind::Uniform: return rng.uniform(a, b);
        }
        return t;
    }

    void validate(const std::string& where) const {
        switch (kind) {
            case Kind::Constant:
                if (!(t > 0.0)) throw Error(ErrorCode::InvalidConfig, where + ": duration must be > 0");
                break;
            case Kind::LogNormal:
                if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, where + ": sigma must be >= 0");
                break;
            case Kind::Uniform:
                if (!(0.0 < a && a <= b)) throw Error(ErrorCode::InvalidConfig, where + ": need 0 < a <= b");
                break;
        }
    }
};

// Virtual duration of each task kind plus the per-task launch overhead a task
// pays while holding its cores. Data movement and framework bookkeeping are
// charged once per cycle as constants. md_scale gives per-replica speed
// factors for heterogeneous workloads (slow high-level-theory replicas next
// to fast classical ones); empty means uniform.
struct DurationModel {
    Distribution md = Distribution::constant(10.0);
    Distribution energy_eval = Distribution::constant(1.0);
    Distribution exchange_compute = Distribution::constant(1.0);
    double launch_overhead = 0.5;
    double data_time = 0.0;
    double framework_overhead = 0.0;
    std::vector<double> md_scale;

    void validate() const {
        md.validate("durations.md");
        energy_eval.validate("durations.energy_eval");
        exchange_compute.validate("durations.exchange_compute");
        if (launch_overhead < 0.0) throw Error(ErrorCode::InvalidConfig, "launch overhead must be >= 0");
        if (data_time < 0.0) throw Error(ErrorCode::InvalidConfig, "data time must be >= 0");
        if (framework_overhead < 0.0)
            throw Error(ErrorCode::InvalidConfig, "framework overhead must be >= 0");
        for (double scale : md_scale)
            if (!(scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "md_scale factors must be > 0");
    }
};

struct FaultPolicy {
    enum class Recovery { Continue, Relaunch };

    double probability = 0.0;
    Recovery recovery = Recovery::Relaunch;
    int max_retries = 0;

    void validate() const {
        if (!(probability >= 0.0 && probability <= 1.0))
            throw Error(ErrorCode::InvalidConfig, "fault probability must be in [0, 1]");
        if (max_retries < 0) throw Error(ErrorCode::InvalidConfig, "max retries must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Tasks and events
// ---------------------------------------------------------------------------

enum class TaskKind { MdSegment, EnergyEval, ExchangeCompute };

inline const char* to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::MdSegment: return "md_segment";
        case TaskKind::EnergyEval: return "energy_eval";
        case TaskKind::ExchangeCompute: return "exchange_compute";
    }
    return "?";
}

struct TaskSpec {
    std::int64_t id = -1;  // assigned at submit
    TaskKind kind = TaskKind::MdSegment;
    int replica = -1;      // -1 for ExchangeCompute
    int cores = 1;
    long cycle = 0;        // replica cycle, or exchange event index
    int attempt = 0;
    EngineRequest request;
};

enum class EventKind { Submit, Start, End, Fail, Barrier, Exchange };

inline const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Submit: return "submit";
        case EventKind::Start: return "start";
        case EventKind::End: return "end";
        case EventKind::Fail: return "fail";
        case EventKind::Barrier: return "barrier";
        case EventKind::Exchange: return "exchange";
    }
    return "?";
}

// One line of the event trace. Times are virtual/logical and deterministic.
struct Event {
    double t = 0.0;
    EventKind kind = EventKind::Submit;
    std::int64_t task = -1;
    int replica = -1;
    int cores = 0;
};

struct TaskOutcome {
    TaskSpec spec;
    bool failed = false;  // retries exhausted (or Continue policy hit)
    EngineResult result;
    double submit_t = 0.0;
    double start_t = 0.0;
    double end_t = 0.0;
    double overhead = 0.0;
    double duration = 0.0;  // virtual compute time, excludes overhead
    int home_slot = -1;     // lowest core slot the task occupied
    double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Worker pool (RealWorkers backend)
// ---------------------------------------------------------------------------

class WorkerPool {
public:
    explicit WorkerPool(int threads) {
        if (threads < 1) threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads < 1) threads = 1;
        workers_.reserve(static_cast<std::size_t>(threads));
        for (int i = 0; i < threads; ++i)
            workers_.emplace_back([this] { run(); });
    }

    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& worker : workers_) worker.join();
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    std::future<EngineResult> submit(std::function<EngineResult()> fn) {
        std::packaged_task<EngineResult()> task(std::move(fn));
        auto future = task.get_future();
        {
            std::lock_guard lock(mutex_);
            queue_.push_back(std::move(task));
        }
        cv_.notify_one();
        return future;
    }

    int size() const { return static_cast<int>(workers_.size()); }

private:
    void run() {
        for (;;) {
            std::packaged_task<EngineResult()> task;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
                if (stop_ && queue_.empty()) return;
                task = std::move(queue_.front());
                queue_.pop_front();
            }
            task();  // exceptions land in the future
        }
    }

    std::vector<std::thread> workers_;
    std::deque<std::packaged_task<EngineResult()>> queue_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool stop_ = false;
};

// ---------------------------------------------------------------------------
// Pilot
// ---------------------------------------------------------------------------

// Deterministic discrete-event resource manager. Tasks queue FIFO, start as
// soon as enough core slots are free, and hold their cores for
// launch_overhead + duration. Completion order is driven by these virtual
// durations in both backends; RealWorkers additionally executes the engine
// work on a thread pool and records measured wall time separately, so the
// logical trace of a run is a pure function of (config, seed).
class Pilot {
public:
    Pilot(const PilotSpec& spec, const DurationModel& durations, const FaultPolicy& faults,
          std::uint64_t seed, const PotentialSystem* system = nullptr)
        : spec_(spec), durations_(durations), faults_(faults), seed_(seed), system_(system) {
        spec_.validate();
        durations_.validate();
        faults_.validate();
        for (int core = 0; core < spec_.total_cores; ++core) free_slots_.insert(core);
        if (spec_.backend == BackendKind::RealWorkers) {
            if (system_ == nullptr)
                throw Error(ErrorCode::InvalidConfig, "RealWorkers backend needs a potential system");
            pool_ = std::make_unique<WorkerPool>(spec_.workers);
        }
    }

    const PilotSpec& spec() const { return spec_; }
    const PotentialSystem* system() const { return system_; }
    double now() const { return now_; }
    bool busy() const { return !queue_.empty() || !running_.empty(); }
    std::size_t running_count() const { return running_.size(); }
    const std::vector<Event>& events() const { return events_; }
    double md_busy_core_seconds() const { return md_busy_core_seconds_; }
    double overhead_core_seconds() const { return overhead_core_seconds_; }
    std::int64_t next_task_id() const { return next_task_id_; }
    void set_next_task_id(std::int64_t id) { next_task_id_ = id; }
    void set_clock(double t) { now_ = t; }

    std::int64_t submit(TaskSpec spec) {
        if (spec.cores < 1 || spec.cores > spec_.total_cores)
            throw Error(ErrorCode::InvalidTask,
                        "task needs " + std::to_string(spec.cores) + " cores, pilot has " +
                            std::to_string(spec_.total_cores));
        spec.id = next_task_id_++;
        const std::int64_t id = spec.id;
        events_.push_back({now_, EventKind::Submit, id, spec.replica, spec.cores});
        queue_.push_back({std::move(spec), now_});
        start_ready_tasks();
        return id;
    }

    // Earliest pending completion; +inf when nothing is running.
    double next_event_time() const {
        return running_.empty() ? std::numeric_limits<double>::infinity() : running_.top().end_t;
    }

    // Moves the clock forward without processing completions (used for
    // time-window gates). Must not skip over a pending completion.
    void advance_to(double t) {
        if (t < now_) throw Error(ErrorCode::InvalidValue, "clock cannot move backwards");
        if (t > next_event_time())
            throw Error(ErrorCode::InvalidValue, "advance would skip a pending completion");
        now_ = t;
    }

    // Advances the clock to the next task completion and reports it. Failed
    // attempts are relaunched internally under the Relaunch policy; the
    // outcome surfaces only when the task succeeds or its replica is out of
    // retries.
    TaskOutcome next_completion() {
        for (;;) {
            if (running_.empty())
                throw Error(ErrorCode::InvalidTask, "no running tasks; submit before waiting");
            Running running = pop_next_running();
            now_ = running.end_t;
            release_slots(running);

            const bool faulted = draw_fault(running.spec) || engine_faulted(running);
            if (faulted) {
                events_.push_back(
                    {now_, EventKind::Fail, running.spec.id, running.spec.replica, running.spec.cores});
                const bool can_retry = faults_.recovery == FaultPolicy::Recovery::Relaunch &&
                                       running.spec.attempt < faults_.max_retries;
                if (can_retry) {
                    TaskSpec retry = running.spec;
                    retry.attempt += 1;
                    submit(std::move(retry));
                    continue;
                }
                start_ready_tasks();
                return make_outcome(std::move(running), /*failed=*/true);
            }

            events_.push_back(
                {now_, EventKind::End, running.spec.id, running.spec.replica, running.spec.cores});
            account(running);
            start_ready_tasks();
            return make_outcome(std::move(running), /*failed=*/false);
        }
    }

    void mark_barrier() { events_.push_back({now_, EventKind::Barrier, -1, -1, 0}); }
    void mark_exchange(std::int64_t tag, int dim) {
        events_.push_back({now_, EventKind::Exchange, tag, dim, 0});
    }

private:
    struct Running {
        TaskSpec spec;
        double submit_t = 0.0;
        double start_t = 0.0;
        double end_t = 0.0;
        double overhead = 0.0;
        double duration = 0.0;
        int home_slot = -1;
        std::vector<int> slots;
        std::shared_future<EngineResult> future;
        bool engine_error = false;
        std::string engine_error_message;
    };

    struct RunningOrder {
        bool operator()(const Running& a, const Running& b) const {
            if (a.end_t != b.end_t) return a.end_t > b.end_t;
            return a.spec.id > b.spec.id;
        }
    };

    void start_ready_tasks() {
        while (!queue_.empty() && static_cast<int>(free_slots_.size()) >= queue_.front().spec.cores) {
            TaskSpec spec = std::move(queue_.front().spec);
            const double submit_t = queue_.front().submit_t;
            queue_.pop_front();

            Running running;
            running.submit_t = submit_t;
            running.start_t = now_;
            running.overhead = durations_.launch_overhead;
            running.duration = sample_duration(spec);
            running.end_t = now_ + running.overhead + running.duration;
            for (int i = 0; i < spec.cores; ++i) {
                auto it = free_slots_.begin();
                running.slots.push_back(*it);
                free_slots_.erase(it);
            }
            running.home_slot = running.slots.front();
            events_.push_back({now_, EventKind::Start, spec.id, spec.replica, spec.cores});

            if (spec_.backend == BackendKind::RealWorkers && spec.kind != TaskKind::ExchangeCompute) {
                const PotentialSystem system = *system_;
                EngineRequest request = spec.request;
                running.future = pool_->submit([system, request]() -> EngineResult {
                    if (request.kind == EngineRequest::Kind::MdSegment)
                        return run_md_segment(system, request);
                    const auto t0 = std::chrono::steady_clock::now();
                    EngineResult result;
                    result.configuration = request.configuration;
                    result.velocities = request.velocities;
                    result.energy = single_point_energy(system, request.configuration, request.foreign_params);
                    result.wall_seconds =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    return result;
                }).share();
            }

            running.spec = std::move(spec);
            running_.push(std::move(running));
        }
    }

    Running pop_next_running() {
        Running top = running_.top();
        running_.pop();
        return top;
    }

    void release_slots(const Running& running) {
        for (int slot : running.slots) free_slots_.insert(slot);
    }

    double sample_duration(const TaskSpec& spec) {
        const Distribution& dist = spec.kind == TaskKind::MdSegment      ? durations_.md
                                   : spec.kind == TaskKind::EnergyEval   ? durations_.energy_eval
                                                                         : durations_.exchange_compute;
        Rng rng(mix_seed(seed_, stream::kDuration, static_cast<std::uint64_t>(spec.replica + 1),
                         static_cast<std::uint64_t>(spec.cycle), static_cast<std::uint64_t>(spec.kind),
                         static_cast<std::uint64_t>(spec.attempt)));
        double duration = dist.sample(rng);
        if (spec.kind == TaskKind::MdSegment && spec.replica >= 0 &&
            static_cast<std::size_t>(spec.replica) < durations_.md_scale.size())
            duration *= durations_.md_scale[static_cast<std::size_t>(spec.replica)];
        return duration;
    }

    // Faults are injected on replica-bound tasks only; the exchange step is
    // the framework's own serial computation.
    bool draw_fault(const TaskSpec& spec) {
        if (faults_.probability <= 0.0 || spec.kind == TaskKind::ExchangeCompute) return false;
        if (faults_.probability >= 1.0) return true;
        Rng rng(mix_seed(seed_, stream::kFault, static_cast<std::uint64_t>(spec.replica + 1),
                         static_cast<std::uint64_t>(spec.cycle), static_cast<std::uint64_t>(spec.kind),
                         static_cast<std::uint64_t>(spec.attempt)));
        return rng.uniform() < faults_.probability;
    }

    bool engine_faulted(Running& running) {
        if (!running.future.valid()) return false;
        try {
            running.future.get();
            return false;
        } catch (const EngineError& error) {
            running.engine_error = true;
            running.engine_error_message = error.what();
            return true;
        }
    }

    void account(const Running& running) {
        const double core_seconds = running.duration * running.spec.cores;
        if (running.spec.kind == TaskKind::MdSegment) md_busy_core_seconds_ += core_seconds;
        overhead_core_seconds_ += running.overhead * running.spec.cores;
    }

    TaskOutcome make_outcome(Running&& running, bool failed) {
        TaskOutcome outcome;
        outcome.failed = failed;
        outcome.submit_t = running.submit_t;
        outcome.start_t = running.start_t;
        outcome.end_t = running.end_t;
        outcome.overhead = running.overhead;
        outcome.duration = running.duration;
        outcome.home_slot = running.home_slot;
        if (!failed && running.future.valid()) {
            outcome.result = running.future.get();
            outcome.wall_seconds = outcome.result.wall_seconds;
        } else if (spec_.backend == BackendKind::VirtualClock &&
                   running.spec.kind != TaskKind::ExchangeCompute) {
            // No physics in the virtual backend: echo the input state.
            outcome.result.configuration = running.spec.request.configuration;
            outcome.result.velocities = running.spec.request.velocities;
        }
        outcome.result.virtual_seconds = outcome.duration;
        outcome.spec = std::move(running.spec);
        return outcome;
    }

    struct QueueEntry {
        TaskSpec spec;
        double submit_t = 0.0;
    };

    PilotSpec spec_;
    DurationModel durations_;
    FaultPolicy faults_;
    std::uint64_t seed_ = 0;
    const PotentialSystem* system_ = nullptr;
    std::unique_ptr<WorkerPool> pool_;

    double now_ = 0.0;
    std::set<int> free_slots_;
    std::deque<QueueEntry> queue_;
    std::priority_queue<Running, std::vector<Running>, RunningOrder> running_;
    std::vector<Event> events_;
    std::int64_t next_task_id_ = 0;
    double md_busy_core_seconds_ = 0.0;
    double overhead_core_seconds_ = 0.0;
};

// Runs a plain batch of tasks to completion on a VirtualClock pilot and
// returns (event trace, makespan). The RE drivers build on the same Pilot;
// this is the raw scheduling surface.
struct ScheduleResult {
    std::vector<Event> events;
    double makespan = 0.0;
    std::vector<TaskOutcome> outcomes;
};

inline ScheduleResult simulate_schedule(std::vector<TaskSpec> workload, const PilotSpec& spec,
                                        const DurationModel& durations, std::uint64_t seed) {
    if (spec.backend != BackendKind::VirtualClock)
        throw Error(ErrorCode::InvalidConfig, "simulate_schedule requires the VirtualClock backend");
    Pilot pilot(spec, durations, FaultPolicy{}, seed);
    for (auto& task : workload) pilot.submit(std::move(task));
    ScheduleResult result;
    while (pilot.busy()) result.outcomes.push_back(pilot.next_completion());
    result.makespan = pilot.now();
    result.events = pilot.events();
    return result;
}

}  // namespace repex
