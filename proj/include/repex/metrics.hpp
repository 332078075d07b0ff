#pragma once

#include <cmath>

#include "repex/errors.hpp"

namespace repex {

// One simulation cycle decomposed into MD time, exchange time, data movement
// time, framework overhead, and task-launch overhead (all seconds, virtual or
// wall).
struct CycleTiming {
    double t_md = 0.0;
    double t_ex = 0.0;
    double t_data = 0.0;
    double t_framework_over = 0.0;
    double t_launch_over = 0.0;
};

inline double cycle_time(const CycleTiming& timing) {
    for (double component : {timing.t_md, timing.t_ex, timing.t_data, timing.t_framework_over,
                             timing.t_launch_over}) {
        if (!(component >= 0.0) || !std::isfinite(component))
            throw Error(ErrorCode::InvalidTiming, "cycle time components must be finite and >= 0");
    }
    return timing.t_md + timing.t_ex + timing.t_data + timing.t_framework_over + timing.t_launch_over;
}

// Weak scaling: T_1 at the minimal replica count, T_N at N replicas on N
// cores; 100% means cycle time did not grow with the replica count.
inline double weak_efficiency(double t_1, double t_n) {
    if (!(t_1 > 0.0) || !(t_n > 0.0))
        throw Error(ErrorCode::InvalidTiming, "efficiency needs positive cycle times");
    return t_1 / t_n * 100.0;
}

// Strong scaling: fixed replica count, cores scaled up by `core_scale` =
// M / N_min; 100% means cycle time dropped in proportion to the added cores.
inline double strong_efficiency(double t_1, double t_n, double core_scale) {
    if (!(t_1 > 0.0) || !(t_n > 0.0))
        throw Error(ErrorCode::InvalidTiming, "efficiency needs positive cycle times");
    if (!(core_scale >= 1.0))
        throw Error(ErrorCode::InvalidTiming, "core scale factor must be >= 1");
    return t_1 / (core_scale * t_n) * 100.0;
}

// Fraction of the allocation that did MD work. The ns/day-per-core-hour form
// reduces to this busy fraction here because simulated time per step is
// constant, so throughput is proportional to MD busy time.
inline double utilization_percent(double md_busy_core_seconds, int total_cores, double span_seconds) {
    if (total_cores < 1) throw Error(ErrorCode::InvalidConfig, "utilization needs >= 1 core");
    if (!(span_seconds > 0.0)) throw Error(ErrorCode::InvalidTiming, "utilization needs a positive span");
    if (md_busy_core_seconds < 0.0)
        throw Error(ErrorCode::InvalidTiming, "negative busy time");
    return md_busy_core_seconds / (total_cores * span_seconds) * 100.0;
}

}  // namespace repex
