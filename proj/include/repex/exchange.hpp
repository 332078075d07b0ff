#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "repex/errors.hpp"
#include "repex/model.hpp"

namespace repex {

// ---------------------------------------------------------------------------
// Exchange records
// ---------------------------------------------------------------------------

struct ExchangePair {
    int replica_i = -1;
    int replica_j = -1;
    double delta = 0.0;  // dimensionless exponent of the Metropolis criterion
    double u = 0.0;      // the uniform draw deciding the pair
    bool accepted = false;
};

struct ExchangeRecord {
    long cycle = 0;
    int dim = 0;
    std::vector<ExchangePair> pairs;

    int accepted_count() const {
        int n = 0;
        for (const auto& p : pairs) n += p.accepted ? 1 : 0;
        return n;
    }
};

// Round-robin over the configured dimension ordering.
inline int active_dimension(long cycle, int num_dims) {
    if (num_dims < 1) throw Error(ErrorCode::InvalidConfig, "need at least one exchange dimension");
    if (cycle < 0) throw Error(ErrorCode::InvalidValue, "cycle must be >= 0");
    return static_cast<int>(cycle % num_dims);
}

// ---------------------------------------------------------------------------
// Grouping and pairing
// ---------------------------------------------------------------------------

struct GroupMember {
    int ladder_index = 0;  // position on the active dimension's ladder
    int replica_id = -1;
};

// Partitions replicas by their coordinates in all dimensions except the
// active one; members are ordered by active-dimension ladder index. Failed
// replicas are left out, so their ladder slot stays unpaired.
inline std::vector<std::vector<GroupMember>> group_by_inactive(const ReplicaGrid& grid, int active_dim) {
    if (active_dim < 0 || active_dim >= static_cast<int>(grid.dimensions.size()))
        throw Error(ErrorCode::InvalidConfig, "active dimension out of range");

    std::map<std::vector<int>, std::vector<GroupMember>> buckets;
    for (const ReplicaState& replica : grid.replicas) {
        if (replica.status == ReplicaStatus::Failed) continue;
        std::vector<int> key;
        key.reserve(replica.coords.size() - 1);
        for (std::size_t d = 0; d < replica.coords.size(); ++d)
            if (static_cast<int>(d) != active_dim) key.push_back(replica.coords[d]);
        buckets[key].push_back({replica.coords[static_cast<std::size_t>(active_dim)], replica.id});
    }

    std::vector<std::vector<GroupMember>> groups;
    groups.reserve(buckets.size());
    for (auto& [key, members] : buckets) {
        std::sort(members.begin(), members.end(),
                  [](const GroupMember& a, const GroupMember& b) { return a.ladder_index < b.ladder_index; });
        groups.push_back(std::move(members));
    }
    return groups;
}

enum class PairPhase { Even, Odd };

// Alternating nearest-neighbor pairing, anchored on ladder indices: Even
// pairs rungs (0,1),(2,3),..., Odd pairs (1,2),(3,4),... A pair forms only
// when both rungs are present in the group, so missing (failed or not yet
// arrived) replicas simply leave their partner unpaired.
inline std::vector<std::pair<int, int>> pair_neighbors(const std::vector<GroupMember>& group,
                                                       PairPhase phase) {
    std::vector<std::pair<int, int>> pairs;
    const int anchor = phase == PairPhase::Even ? 0 : 1;
    for (std::size_t k = 0; k + 1 < group.size(); ++k) {
        const GroupMember& lo = group[k];
        const GroupMember& hi = group[k + 1];
        if (hi.ladder_index == lo.ladder_index + 1 && (lo.ladder_index % 2) == anchor) {
            pairs.emplace_back(lo.replica_id, hi.replica_id);
            ++k;  // both consumed
        }
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Acceptance
// ---------------------------------------------------------------------------

// Generic replica-exchange criterion
//   delta = beta_i*[U_i(x_j) - U_i(x_i)] + beta_j*[U_j(x_i) - U_j(x_j)]
// with acceptance probability min(1, exp(-delta)). e_ab = U_a(x_b). For a
// temperature move the two potentials coincide, the cross terms cancel, and
// delta reduces to (beta_i - beta_j)*(U(x_j) - U(x_i)); callers need not
// supply cross energies in that case.
inline double acceptance_delta(DimensionKind kind, double temperature_i, double temperature_j,
                               double e_ii, double e_jj, double e_ij = 0.0, double e_ji = 0.0) {
    const double beta_i = beta_of(temperature_i);
    const double beta_j = beta_of(temperature_j);
    if (!std::isfinite(e_ii) || !std::isfinite(e_jj))
        throw Error(ErrorCode::InvalidEnergy, "non-finite own energy");
    if (kind == DimensionKind::Temperature) return (beta_i - beta_j) * (e_jj - e_ii);
    if (!std::isfinite(e_ij) || !std::isfinite(e_ji))
        throw Error(ErrorCode::InvalidEnergy, "non-finite cross energy");
    return beta_i * (e_ij - e_ii) + beta_j * (e_ji - e_jj);
}

inline double acceptance_probability(double delta) {
    if (!std::isfinite(delta)) throw Error(ErrorCode::InvalidEnergy, "non-finite delta");
    return delta <= 0.0 ? 1.0 : std::exp(-delta);
}

// ---------------------------------------------------------------------------
// Applying swaps
// ---------------------------------------------------------------------------

// Accepted pairs swap their active-dimension ladder indices; configurations
// stay put. Pairs must be disjoint and differ in exactly the active
// dimension.
inline void apply_swaps(ReplicaGrid& grid, const ExchangeRecord& record, int active_dim) {
    if (active_dim < 0 || active_dim >= static_cast<int>(grid.dimensions.size()))
        throw Error(ErrorCode::InvalidConfig, "active dimension out of range");

    std::vector<bool> seen(grid.size(), false);
    for (const ExchangePair& pair : record.pairs) {
        if (pair.replica_i < 0 || pair.replica_j < 0 ||
            pair.replica_i >= static_cast<int>(grid.size()) ||
            pair.replica_j >= static_cast<int>(grid.size()) || pair.replica_i == pair.replica_j)
            throw Error(ErrorCode::InvalidRecord, "bad replica ids in exchange pair");
        if (seen[static_cast<std::size_t>(pair.replica_i)] || seen[static_cast<std::size_t>(pair.replica_j)])
            throw Error(ErrorCode::InvalidRecord, "overlapping exchange pairs");
        seen[static_cast<std::size_t>(pair.replica_i)] = true;
        seen[static_cast<std::size_t>(pair.replica_j)] = true;

        ReplicaState& a = grid.at(pair.replica_i);
        ReplicaState& b = grid.at(pair.replica_j);
        for (std::size_t d = 0; d < a.coords.size(); ++d)
            if (static_cast<int>(d) != active_dim && a.coords[d] != b.coords[d])
                throw Error(ErrorCode::InvalidRecord, "pair differs outside the active dimension");
        if (pair.accepted)
            std::swap(a.coords[static_cast<std::size_t>(active_dim)],
                      b.coords[static_cast<std::size_t>(active_dim)]);
    }
}

}  // namespace repex
