#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "repex/exchange.hpp"
#include "repex/model.hpp"

using namespace repex;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DimensionSpec temperature_dim(int n, double lo = 273, double hi = 373) {
    return make_dimension(DimensionKind::Temperature,
                          build_ladder(DimensionKind::Temperature, lo, hi, n, Progression::Geometric));
}

DimensionSpec umbrella_dim(int n, int coordinate = 0) {
    auto dim = make_dimension(DimensionKind::Umbrella,
                              build_ladder(DimensionKind::Umbrella, 0, 360, n, Progression::Uniform, true));
    dim.force_constant = 0.02;
    dim.coordinate = coordinate;
    return dim;
}

DimensionSpec lambda_dim(int n) {
    return make_dimension(DimensionKind::HamiltonianScale,
                          build_ladder(DimensionKind::HamiltonianScale, 0, 1, n, Progression::Uniform));
}

std::vector<GroupMember> simple_group(int n) {
    std::vector<GroupMember> group;
    for (int k = 0; k < n; ++k) group.push_back({k, k});
    return group;
}

}  // namespace

TEST_CASE("active_dimension round-robin") {
    CHECK(active_dimension(0, 3) == 0);
    CHECK(active_dimension(5, 3) == 2);
    CHECK(active_dimension(7, 1) == 0);
    CHECK_THROWS_AS(active_dimension(1, 0), Error);
}

TEST_CASE("group_by_inactive") {
    SECTION("6x8x8, active dim 0 -> 64 groups of 6") {
        auto grid = build_grid({temperature_dim(6), umbrella_dim(8, 0), umbrella_dim(8, 1)}, 2, 1);
        auto groups = group_by_inactive(grid, 0);
        REQUIRE(groups.size() == 64);
        for (const auto& group : groups) {
            REQUIRE(group.size() == 6);
            for (std::size_t k = 0; k < group.size(); ++k)
                CHECK(group[k].ladder_index == static_cast<int>(k));
        }
    }
    SECTION("1-D grid of 8 -> one group of 8") {
        auto grid = build_grid({temperature_dim(8)}, 1, 1);
        auto groups = group_by_inactive(grid, 0);
        REQUIRE(groups.size() == 1);
        CHECK(groups[0].size() == 8);
    }
    SECTION("4x4, active dim 1 -> 4 groups sharing the dim-0 coordinate") {
        auto grid = build_grid({temperature_dim(4), lambda_dim(4)}, 1, 1);
        auto groups = group_by_inactive(grid, 1);
        REQUIRE(groups.size() == 4);
        for (const auto& group : groups) {
            REQUIRE(group.size() == 4);
            std::set<int> dim0;
            for (const auto& member : group) dim0.insert(grid.at(member.replica_id).coords[0]);
            CHECK(dim0.size() == 1);
        }
    }
    SECTION("failed replicas are excluded") {
        auto grid = build_grid({temperature_dim(4)}, 1, 1);
        grid.at(2).status = ReplicaStatus::Failed;
        auto groups = group_by_inactive(grid, 0);
        REQUIRE(groups.size() == 1);
        CHECK(groups[0].size() == 3);
    }
}

TEST_CASE("pair_neighbors") {
    SECTION("even phase") {
        auto pairs = pair_neighbors(simple_group(6), PairPhase::Even);
        REQUIRE(pairs == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}, {4, 5}});
    }
    SECTION("odd phase leaves the ends unpaired") {
        auto pairs = pair_neighbors(simple_group(6), PairPhase::Odd);
        REQUIRE(pairs == std::vector<std::pair<int, int>>{{1, 2}, {3, 4}});
    }
    SECTION("singleton group") {
        CHECK(pair_neighbors(simple_group(1), PairPhase::Even).empty());
        CHECK(pair_neighbors(simple_group(1), PairPhase::Odd).empty());
    }
    SECTION("gaps break pairs (missing rung leaves partner unpaired)") {
        std::vector<GroupMember> group = {{0, 10}, {1, 11}, {3, 13}, {4, 14}, {5, 15}};
        CHECK(pair_neighbors(group, PairPhase::Even) ==
              std::vector<std::pair<int, int>>{{10, 11}, {14, 15}});
        CHECK(pair_neighbors(group, PairPhase::Odd) == std::vector<std::pair<int, int>>{{13, 14}});
    }
}

TEST_CASE("acceptance_delta") {
    SECTION("identical ensembles accept with probability one") {
        const double delta =
            acceptance_delta(DimensionKind::Temperature, 300.0, 300.0, -4.2, -4.2, -4.2, -4.2);
        CHECK(delta == 0.0);
        CHECK(acceptance_probability(delta) == 1.0);
    }
    SECTION("temperature swap example") {
        // independent evaluation: delta = (beta_300 - beta_330) * (U_j - U_i)
        const double beta_300 = 1.0 / (oracle::kB * 300.0);
        const double beta_330 = 1.0 / (oracle::kB * 330.0);
        const double expected = (beta_300 - beta_330) * (-5.0 - -10.0);
        const double delta = acceptance_delta(DimensionKind::Temperature, 300.0, 330.0, -10.0, -5.0);
        CHECK_THAT(delta, WithinRel(expected, 1e-12));
        CHECK_THAT(delta, WithinAbs(0.76244, 5e-4));
        CHECK_THAT(acceptance_probability(delta), WithinAbs(0.4665, 5e-4));
    }
    SECTION("umbrella swap example: centers 0 and 45 at their own minima") {
        // cross restraints are each 0.5 * 0.02 * 45^2 = 20.25 kcal/mol
        const double beta = 1.0 / (oracle::kB * 300.0);
        const double delta = acceptance_delta(DimensionKind::Umbrella, 300.0, 300.0,
                                              /*e_ii=*/0.0, /*e_jj=*/0.0,
                                              /*e_ij=*/20.25, /*e_ji=*/20.25);
        CHECK_THAT(delta, WithinRel(beta * 40.5, 1e-12));
        CHECK_THAT(delta, WithinAbs(67.93, 0.01));
        CHECK_THAT(acceptance_probability(delta), WithinRel(std::exp(-delta), 1e-15));
    }
    SECTION("non-finite energies are rejected") {
        const double inf = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(acceptance_delta(DimensionKind::Temperature, 300, 330, inf, 0.0), Error);
        CHECK_THROWS_AS(acceptance_delta(DimensionKind::Umbrella, 300, 300, 0, 0, std::nan(""), 0),
                        Error);
        CHECK_THROWS_AS(acceptance_delta(DimensionKind::Temperature, -300, 330, 0, 0), Error);
    }
}

TEST_CASE("apply_swaps") {
    auto grid = build_grid({temperature_dim(4)}, 1, 1);

    SECTION("empty record leaves the grid unchanged") {
        auto before = grid.replicas;
        apply_swaps(grid, {}, 0);
        for (std::size_t r = 0; r < grid.size(); ++r) CHECK(grid.replicas[r].coords == before[r].coords);
    }
    SECTION("one accepted pair swaps ladder indices only") {
        ExchangeRecord record;
        record.pairs.push_back({0, 1, 0.0, 0.5, true});
        auto config_before = grid.at(0).configuration;
        apply_swaps(grid, record, 0);
        CHECK(grid.at(0).coords[0] == 1);
        CHECK(grid.at(1).coords[0] == 0);
        CHECK(grid.at(0).configuration == config_before);
    }
    SECTION("all-rejected record is a no-op") {
        ExchangeRecord record;
        record.pairs.push_back({0, 1, 5.0, 0.9, false});
        record.pairs.push_back({2, 3, 5.0, 0.9, false});
        apply_swaps(grid, record, 0);
        for (int r = 0; r < 4; ++r) CHECK(grid.at(r).coords[0] == r);
    }
    SECTION("overlapping pairs are rejected") {
        ExchangeRecord record;
        record.pairs.push_back({0, 1, 0.0, 0.5, true});
        record.pairs.push_back({1, 2, 0.0, 0.5, true});
        CHECK_THROWS_AS(apply_swaps(grid, record, 0), Error);
    }
    SECTION("pairs differing outside the active dimension are rejected") {
        auto grid2 = build_grid({temperature_dim(2), lambda_dim(2)}, 1, 1);
        ExchangeRecord record;
        record.pairs.push_back({0, 3, 0.0, 0.5, true});  // differs in both dims
        CHECK_THROWS_AS(apply_swaps(grid2, record, 0), Error);
    }
}

TEST_CASE("exchange phases only permute ladder indices within a group") {
    auto grid = build_grid({temperature_dim(4), lambda_dim(3)}, 1, 7);
    Rng rng(5);
    auto group_multisets = [&](int dim) {
        std::map<std::vector<int>, std::multiset<int>> sets;
        for (const auto& group : group_by_inactive(grid, dim)) {
            std::vector<int> key;
            for (std::size_t d = 0; d < grid.dimensions.size(); ++d)
                if (static_cast<int>(d) != dim)
                    key.push_back(grid.at(group.front().replica_id).coords[d]);
            for (const auto& member : group) sets[key].insert(member.ladder_index);
        }
        return sets;
    };

    for (int phase = 0; phase < 50; ++phase) {
        const int dim = phase % 2;
        const auto before = group_multisets(dim);
        ExchangeRecord record;
        record.dim = dim;
        for (const auto& group : group_by_inactive(grid, dim))
            for (auto [i, j] : pair_neighbors(group, phase % 4 < 2 ? PairPhase::Even : PairPhase::Odd))
                record.pairs.push_back({i, j, 0.0, rng.uniform(), rng.uniform() < 0.5});
        apply_swaps(grid, record, dim);
        REQUIRE(group_multisets(dim) == before);
    }
}

TEST_CASE("detailed balance smoke test on a two-temperature ladder", "[sampling]") {
    // Perfect per-slot sampling replaces MD; after a swap attempt the slot
    // marginals must still match the slot Boltzmann densities.
    const double t_lo = 300.0, t_hi = 330.0;
    auto u = [](double x) { return oracle::double_well(1.0, 2.0, x); };
    oracle::DirectSampler sampler_lo(u, t_lo, -3.0, 3.0);
    oracle::DirectSampler sampler_hi(u, t_hi, -3.0, 3.0);

    Rng rng(123);
    const int attempts = 20000;
    long accepted = 0;
    std::vector<double> slot_lo, slot_hi;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        double x_lo = sampler_lo.sample(rng.uniform());
        double x_hi = sampler_hi.sample(rng.uniform());
        const double delta = acceptance_delta(DimensionKind::Temperature, t_lo, t_hi, u(x_lo), u(x_hi));
        if (rng.uniform() < acceptance_probability(delta)) {
            std::swap(x_lo, x_hi);
            ++accepted;
        }
        slot_lo.push_back(x_lo);
        slot_hi.push_back(x_hi);
    }

    const double expected = oracle::expected_temperature_acceptance(u, t_lo, t_hi, -3.0, 3.0);
    CHECK_THAT(static_cast<double>(accepted) / attempts, WithinAbs(expected, 0.05));

    const auto prob_lo = oracle::bin_probabilities(u, t_lo, -3.0, 3.0, 50);
    const auto prob_hi = oracle::bin_probabilities(u, t_hi, -3.0, 3.0, 50);
    CHECK(oracle::l1_distance(oracle::histogram(slot_lo, -3, 3, 50), prob_lo) < 0.1);
    CHECK(oracle::l1_distance(oracle::histogram(slot_hi, -3, 3, 50), prob_hi) < 0.1);
}
