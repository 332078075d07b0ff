#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "repex/errors.hpp"
#include "repex/exchange.hpp"
#include "repex/model.hpp"

namespace repex {

// ---------------------------------------------------------------------------
// Free-energy surfaces
// ---------------------------------------------------------------------------

struct HistogramAxis {
    double lo = 0.0;
    double hi = 1.0;
    int bins = 50;
};

// F_b = -kT ln p_b over occupied bins, min-shifted to zero. Unoccupied bins
// are flagged rather than set to zero; their F is NaN.
struct FreeEnergySurface {
    std::vector<HistogramAxis> axes;
    std::vector<double> f;        // flattened row-major, kcal/mol
    std::vector<long> counts;
    std::vector<bool> occupied;
    double temperature = 0.0;
    long total_samples = 0;

    std::size_t bin_count() const {
        std::size_t n = 1;
        for (const auto& axis : axes) n *= static_cast<std::size_t>(axis.bins);
        return n;
    }

    double bin_center(std::size_t flat, std::size_t axis_index) const {
        std::size_t stride = 1;
        for (std::size_t a = axes.size(); a-- > axis_index + 1;) stride *= static_cast<std::size_t>(axes[a].bins);
        const auto& axis = axes[axis_index];
        const std::size_t k = (flat / stride) % static_cast<std::size_t>(axis.bins);
        const double width = (axis.hi - axis.lo) / axis.bins;
        return axis.lo + (static_cast<double>(k) + 0.5) * width;
    }
};

inline FreeEnergySurface free_energy_histogram(const std::vector<std::vector<double>>& samples,
                                               const std::vector<HistogramAxis>& axes,
                                               double temperature_k) {
    if (samples.empty()) throw Error(ErrorCode::NoData, "no samples to histogram");
    if (axes.empty()) throw Error(ErrorCode::InvalidConfig, "histogram needs at least one axis");
    for (const auto& axis : axes) {
        if (axis.bins < 2) throw Error(ErrorCode::InvalidConfig, "histogram needs >= 2 bins per axis");
        if (!(axis.lo < axis.hi)) throw Error(ErrorCode::InvalidConfig, "histogram axis needs lo < hi");
    }
    if (!(temperature_k > 0.0)) throw Error(ErrorCode::InvalidValue, "histogram temperature must be > 0");

    FreeEnergySurface surface;
    surface.axes = axes;
    surface.temperature = temperature_k;
    surface.counts.assign(surface.bin_count(), 0);

    for (const auto& sample : samples) {
        if (sample.size() != axes.size())
            throw Error(ErrorCode::InvalidConfig, "sample dimensionality does not match axes");
        std::size_t flat = 0;
        bool inside = true;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& axis = axes[a];
            const double width = (axis.hi - axis.lo) / axis.bins;
            int k = static_cast<int>(std::floor((sample[a] - axis.lo) / width));
            if (sample[a] == axis.hi) k = axis.bins - 1;  // closed upper edge
            if (k < 0 || k >= axis.bins) {
                inside = false;
                break;
            }
            flat = flat * static_cast<std::size_t>(axis.bins) + static_cast<std::size_t>(k);
        }
        if (!inside) continue;
        surface.counts[flat] += 1;
        surface.total_samples += 1;
    }
    if (surface.total_samples == 0) throw Error(ErrorCode::NoData, "all samples fall outside the axes");

    const double kt = kBoltzmann * temperature_k;
    surface.f.assign(surface.counts.size(), std::numeric_limits<double>::quiet_NaN());
    surface.occupied.assign(surface.counts.size(), false);
    double f_min = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < surface.counts.size(); ++b) {
        if (surface.counts[b] == 0) continue;
        surface.occupied[b] = true;
        const double p = static_cast<double>(surface.counts[b]) / static_cast<double>(surface.total_samples);
        surface.f[b] = -kt * std::log(p);
        f_min = std::min(f_min, surface.f[b]);
    }
    for (std::size_t b = 0; b < surface.f.size(); ++b)
        if (surface.occupied[b]) surface.f[b] -= f_min;
    return surface;
}

// ---------------------------------------------------------------------------
// Exchange diagnostics
// ---------------------------------------------------------------------------

struct PairAcceptance {
    long attempts = 0;
    long accepted = 0;

    std::optional<double> fraction() const {
        if (attempts == 0) return std::nullopt;
        return static_cast<double>(accepted) / static_cast<double>(attempts);
    }
};

struct AcceptanceStats {
    PairAcceptance overall;
    // keyed by the lower ladder index of the adjacent pair (k, k+1)
    std::map<int, PairAcceptance> per_pair;
};

namespace detail {

// Records store replica ids; ladder positions at attempt time are recovered
// by replaying every swap from the initial grid coordinates.
template <typename Visit>
inline void replay_records(const ReplicaGrid& initial_grid, const std::vector<ExchangeRecord>& records,
                           Visit&& visit) {
    std::vector<std::vector<int>> coords;
    coords.reserve(initial_grid.size());
    for (const ReplicaState& replica : initial_grid.replicas) coords.push_back(replica.coords);

    for (const ExchangeRecord& record : records) {
        for (const ExchangePair& pair : record.pairs) {
            const std::size_t i = static_cast<std::size_t>(pair.replica_i);
            const std::size_t j = static_cast<std::size_t>(pair.replica_j);
            visit(record, pair, coords[i][static_cast<std::size_t>(record.dim)],
                  coords[j][static_cast<std::size_t>(record.dim)]);
            if (pair.accepted)
                std::swap(coords[i][static_cast<std::size_t>(record.dim)],
                          coords[j][static_cast<std::size_t>(record.dim)]);
        }
    }
}

}  // namespace detail

inline AcceptanceStats acceptance_stats(const std::vector<ExchangeRecord>& records,
                                        const ReplicaGrid& initial_grid, int dimension) {
    if (records.empty()) throw Error(ErrorCode::NoData, "no exchange records");
    AcceptanceStats stats;
    detail::replay_records(initial_grid, records,
                           [&](const ExchangeRecord& record, const ExchangePair& pair, int rung_i, int rung_j) {
                               if (record.dim != dimension) return;
                               const int lower = std::min(rung_i, rung_j);
                               stats.overall.attempts += 1;
                               stats.per_pair[lower].attempts += 1;
                               if (pair.accepted) {
                                   stats.overall.accepted += 1;
                                   stats.per_pair[lower].accepted += 1;
                               }
                           });
    return stats;
}

// Full bottom -> top -> bottom ladder traversals per replica in one chosen
// dimension, the standard mixing diagnostic.
inline std::vector<long> round_trips(const std::vector<ExchangeRecord>& records,
                                     const ReplicaGrid& initial_grid, int dimension) {
    if (dimension < 0 || dimension >= static_cast<int>(initial_grid.dimensions.size()))
        throw Error(ErrorCode::InvalidConfig, "round_trips: dimension out of range");
    const int top = static_cast<int>(initial_grid.dimensions[static_cast<std::size_t>(dimension)].ladder.size()) - 1;
    std::vector<long> trips(initial_grid.size(), 0);
    if (top == 0) return trips;

    enum class Leg { Unarmed, FromBottom, FromTop };
    std::vector<Leg> leg(initial_grid.size(), Leg::Unarmed);
    std::vector<int> rung(initial_grid.size(), 0);
    for (const ReplicaState& replica : initial_grid.replicas) {
        rung[static_cast<std::size_t>(replica.id)] = replica.coords[static_cast<std::size_t>(dimension)];
    }

    auto touch = [&](std::size_t r, int at) {
        rung[r] = at;
        if (at == 0) {
            if (leg[r] == Leg::FromTop) trips[r] += 1;
            leg[r] = Leg::FromBottom;
        } else if (at == top) {
            if (leg[r] == Leg::FromBottom) leg[r] = Leg::FromTop;
        }
    };
    for (std::size_t r = 0; r < initial_grid.size(); ++r) touch(r, rung[r]);

    detail::replay_records(initial_grid, records,
                           [&](const ExchangeRecord& record, const ExchangePair& pair, int rung_i, int rung_j) {
                               if (record.dim != dimension || !pair.accepted) return;
                               touch(static_cast<std::size_t>(pair.replica_i), rung_j);
                               touch(static_cast<std::size_t>(pair.replica_j), rung_i);
                           });
    return trips;
}

}  // namespace repex
