#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "repex/pilot.hpp"

using namespace repex;
using Catch::Matchers::WithinAbs;

namespace {

PilotSpec virtual_pilot(int cores, int per_replica = 1) {
    PilotSpec spec;
    spec.total_cores = cores;
    spec.cores_per_replica = per_replica;
    spec.backend = BackendKind::VirtualClock;
    return spec;
}

TaskSpec md_task(int replica, long cycle = 0, int cores = 1) {
    TaskSpec task;
    task.kind = TaskKind::MdSegment;
    task.replica = replica;
    task.cores = cores;
    task.cycle = cycle;
    return task;
}

std::string trace_string(const std::vector<Event>& events) {
    std::ostringstream out;
    for (const auto& e : events)
        out << e.t << ' ' << to_string(e.kind) << ' ' << e.task << ' ' << e.replica << ' ' << e.cores
            << '\n';
    return out.str();
}

// peak concurrent cores from start/end/fail events
int peak_cores(const std::vector<Event>& events) {
    int used = 0, peak = 0;
    for (const auto& e : events) {
        if (e.kind == EventKind::Start) used += e.cores;
        if (e.kind == EventKind::End || e.kind == EventKind::Fail) used -= e.cores;
        peak = std::max(peak, used);
    }
    return peak;
}

}  // namespace

TEST_CASE("max_concurrency") {
    CHECK(max_concurrency(virtual_pilot(128, 1)) == 128);
    CHECK(max_concurrency(virtual_pilot(128, 16)) == 8);
    CHECK(max_concurrency(virtual_pilot(100, 7)) == 14);
    CHECK_THROWS_AS(max_concurrency(virtual_pilot(4, 8)), Error);
}

TEST_CASE("execution_mode") {
    CHECK(execution_mode(virtual_pilot(64, 1), 64) == ExecutionMode::ModeI);
    CHECK(execution_mode(virtual_pilot(112, 1), 1728) == ExecutionMode::ModeII);
    CHECK(execution_mode(virtual_pilot(1, 1), 1) == ExecutionMode::ModeI);
    CHECK_THROWS_AS(execution_mode(virtual_pilot(1, 1), 0), Error);
}

TEST_CASE("simulate_schedule") {
    DurationModel durations;
    durations.md = Distribution::constant(10.0);
    durations.launch_overhead = 0.5;

    SECTION("four 10s tasks on four cores finish together") {
        std::vector<TaskSpec> tasks;
        for (int r = 0; r < 4; ++r) tasks.push_back(md_task(r));
        auto result = simulate_schedule(tasks, virtual_pilot(4), durations, 1);
        CHECK(result.makespan == 10.5);
    }
    SECTION("two cores double the makespan") {
        std::vector<TaskSpec> tasks;
        for (int r = 0; r < 4; ++r) tasks.push_back(md_task(r));
        auto result = simulate_schedule(tasks, virtual_pilot(2), durations, 1);
        CHECK(result.makespan == 21.0);
    }
    SECTION("1728 single-core tasks on 112 cores run in 16 waves") {
        std::vector<TaskSpec> tasks;
        for (int r = 0; r < 1728; ++r) tasks.push_back(md_task(r));
        auto result = simulate_schedule(tasks, virtual_pilot(112), durations, 1);
        CHECK(result.makespan == 16 * 10.5);
        CHECK(peak_cores(result.events) <= 112);
    }
    SECTION("requires the virtual backend") {
        PilotSpec real = virtual_pilot(4);
        real.backend = BackendKind::RealWorkers;
        CHECK_THROWS_AS(simulate_schedule({md_task(0)}, real, durations, 1), Error);
    }
}

TEST_CASE("core accounting") {
    DurationModel durations;
    durations.md = Distribution::log_normal(1.0, 0.8);
    durations.launch_overhead = 0.25;
    Pilot pilot(virtual_pilot(3), durations, {}, 42);
    for (int r = 0; r < 20; ++r) pilot.submit(md_task(r));
    while (pilot.busy()) pilot.next_completion();

    SECTION("core conservation holds at every instant") {
        int used = 0;
        for (const auto& e : pilot.events()) {
            if (e.kind == EventKind::Start) used += e.cores;
            if (e.kind == EventKind::End || e.kind == EventKind::Fail) used -= e.cores;
            REQUIRE(used >= 0);
            REQUIRE(used <= 3);
        }
        CHECK(used == 0);
    }
    SECTION("md busy time is the sum of sampled durations") {
        double total = 0.0;
        Pilot again(virtual_pilot(3), durations, {}, 42);
        for (int r = 0; r < 20; ++r) again.submit(md_task(r));
        while (again.busy()) total += again.next_completion().duration;
        CHECK_THAT(again.md_busy_core_seconds(), WithinAbs(total, 1e-9));
    }
}

TEST_CASE("oversized tasks are refused") {
    Pilot pilot(virtual_pilot(4), {}, {}, 1);
    TaskSpec task = md_task(0, 0, 8);
    CHECK_THROWS_AS(pilot.submit(std::move(task)), Error);
}

TEST_CASE("clock can only move forward and never skips completions") {
    DurationModel durations;
    durations.md = Distribution::constant(5.0);
    durations.launch_overhead = 0.0;
    Pilot pilot(virtual_pilot(1), durations, {}, 1);
    pilot.submit(md_task(0));
    CHECK_THROWS_AS(pilot.advance_to(6.0), Error);  // completion at 5.0 pending
    pilot.advance_to(2.0);
    CHECK(pilot.now() == 2.0);
    CHECK_THROWS_AS(pilot.advance_to(1.0), Error);
    auto outcome = pilot.next_completion();
    CHECK(outcome.end_t == 5.0);
}

TEST_CASE("fault injection") {
    DurationModel durations;
    durations.md = Distribution::constant(1.0);
    durations.launch_overhead = 0.0;

    SECTION("p = 0 leaves the stream untouched") {
        FaultPolicy policy;
        policy.probability = 0.0;
        Pilot pilot(virtual_pilot(4), durations, policy, 7);
        for (int r = 0; r < 12; ++r) pilot.submit(md_task(r));
        int failures = 0;
        while (pilot.busy())
            if (pilot.next_completion().failed) ++failures;
        CHECK(failures == 0);
        for (const auto& e : pilot.events()) CHECK(e.kind != EventKind::Fail);
    }
    SECTION("p = 1 with Relaunch(3) fails every replica after 4 attempts") {
        FaultPolicy policy;
        policy.probability = 1.0;
        policy.recovery = FaultPolicy::Recovery::Relaunch;
        policy.max_retries = 3;
        Pilot pilot(virtual_pilot(4), durations, policy, 7);
        for (int r = 0; r < 6; ++r) pilot.submit(md_task(r));
        std::map<int, int> failed_outcomes;
        while (pilot.busy()) {
            auto outcome = pilot.next_completion();
            REQUIRE(outcome.failed);
            CHECK(outcome.spec.attempt == 3);
            failed_outcomes[outcome.spec.replica] += 1;
        }
        CHECK(failed_outcomes.size() == 6);
        std::map<int, int> fail_events;
        for (const auto& e : pilot.events())
            if (e.kind == EventKind::Fail) fail_events[e.replica] += 1;
        for (const auto& [replica, count] : fail_events) CHECK(count == 4);
    }
    SECTION("Continue reports the first failure") {
        FaultPolicy policy;
        policy.probability = 1.0;
        policy.recovery = FaultPolicy::Recovery::Continue;
        Pilot pilot(virtual_pilot(2), durations, policy, 7);
        pilot.submit(md_task(0));
        auto outcome = pilot.next_completion();
        CHECK(outcome.failed);
        CHECK(outcome.spec.attempt == 0);
    }
    SECTION("exchange-compute tasks are never fault-injected") {
        FaultPolicy policy;
        policy.probability = 1.0;
        policy.recovery = FaultPolicy::Recovery::Continue;
        Pilot pilot(virtual_pilot(2), durations, policy, 7);
        TaskSpec task;
        task.kind = TaskKind::ExchangeCompute;
        task.cores = 1;
        pilot.submit(std::move(task));
        CHECK_FALSE(pilot.next_completion().failed);
    }
}

TEST_CASE("deterministic traces") {
    DurationModel durations;
    durations.md = Distribution::log_normal(2.0, 0.75);
    durations.energy_eval = Distribution::uniform(0.5, 1.5);
    durations.launch_overhead = 0.3;
    FaultPolicy policy;
    policy.probability = 0.2;
    policy.recovery = FaultPolicy::Recovery::Relaunch;
    policy.max_retries = 2;

    auto run = [&](std::uint64_t seed) {
        Pilot pilot(virtual_pilot(5), durations, policy, seed);
        for (int r = 0; r < 30; ++r) pilot.submit(md_task(r, r % 3));
        while (pilot.busy()) pilot.next_completion();
        return trace_string(pilot.events());
    };
    CHECK(run(99) == run(99));
    CHECK(run(99) != run(100));
}

TEST_CASE("real workers execute the engine and keep the logical trace") {
    PotentialSystem system;
    system.form = DoubleWell1D{1.0, 2.0};

    DurationModel durations;
    durations.md = Distribution::constant(2.0);
    durations.launch_overhead = 0.1;

    PilotSpec real;
    real.total_cores = 2;
    real.backend = BackendKind::RealWorkers;
    real.workers = 2;

    auto make_request = [](std::uint64_t seed) {
        EngineRequest request;
        request.kind = EngineRequest::Kind::MdSegment;
        request.configuration = {0.5};
        request.velocities = {0.0};
        request.seed = seed;
        request.params.temperature = 300.0;
        request.md.steps = 2000;
        request.md.step_size = 0.01;
        return request;
    };

    SECTION("results equal a direct engine call") {
        Pilot pilot(real, durations, {}, 11, &system);
        for (int r = 0; r < 4; ++r) {
            TaskSpec task = md_task(r);
            task.request = make_request(1000 + static_cast<std::uint64_t>(r));
            pilot.submit(std::move(task));
        }
        std::map<int, EngineResult> results;
        while (pilot.busy()) {
            auto outcome = pilot.next_completion();
            results[outcome.spec.replica] = outcome.result;
        }
        for (int r = 0; r < 4; ++r) {
            auto direct = run_md_segment(system, make_request(1000 + static_cast<std::uint64_t>(r)));
            CHECK(results[r].configuration == direct.configuration);
            CHECK(results[r].energy == direct.energy);
        }
    }
    SECTION("logical event order matches the virtual backend") {
        Pilot real_pilot(real, durations, {}, 11, &system);
        Pilot virtual_instance(virtual_pilot(2), durations, {}, 11);
        for (int r = 0; r < 6; ++r) {
            TaskSpec task = md_task(r);
            task.request = make_request(static_cast<std::uint64_t>(r));
            real_pilot.submit(std::move(task));
            virtual_instance.submit(md_task(r));
        }
        while (real_pilot.busy()) real_pilot.next_completion();
        while (virtual_instance.busy()) virtual_instance.next_completion();
        CHECK(trace_string(real_pilot.events()) == trace_string(virtual_instance.events()));
    }
    SECTION("engine blow-ups surface as failed outcomes, not crashes") {
        FaultPolicy policy;
        policy.recovery = FaultPolicy::Recovery::Relaunch;
        policy.max_retries = 1;
        Pilot pilot(real, durations, policy, 11, &system);
        TaskSpec task = md_task(0);
        task.request = make_request(3);
        task.request.configuration = {3.0};
        task.request.md.step_size = 10.0;  // diverges
        pilot.submit(std::move(task));
        auto outcome = pilot.next_completion();
        CHECK(outcome.failed);
        CHECK(outcome.spec.attempt == 1);  // deterministic failure exhausts the retry
    }
}
