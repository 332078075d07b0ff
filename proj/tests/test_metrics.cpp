#include <catch2/catch_amalgamated.hpp>

#include "repex/metrics.hpp"
#include "repex/rng.hpp"

using namespace repex;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("cycle_time") {
    CHECK(cycle_time({0, 0, 0, 0, 0}) == 0.0);
    CHECK_THAT(cycle_time({139.6, 5.0, 6.3, 2.0, 10.0}), WithinAbs(162.9, 1e-12));
    CHECK(cycle_time({100, 0, 0, 0, 0}) == 100.0);
    CHECK_THROWS_AS(cycle_time({-1, 0, 0, 0, 0}), Error);
    CHECK_THROWS_AS(cycle_time({0, 0, std::nan(""), 0, 0}), Error);

    SECTION("linear in each component, order irrelevant") {
        Rng rng(3);
        for (int trial = 0; trial < 100; ++trial) {
            double c[5];
            for (double& x : c) x = rng.uniform(0.0, 50.0);
            const double total = cycle_time({c[0], c[1], c[2], c[3], c[4]});
            CHECK_THAT(cycle_time({c[4], c[3], c[2], c[1], c[0]}), WithinRel(total, 1e-12));
            CHECK_THAT(cycle_time({c[0] + 1.0, c[1], c[2], c[3], c[4]}), WithinRel(total + 1.0, 1e-12));
        }
    }
}

TEST_CASE("weak_efficiency") {
    CHECK(weak_efficiency(42.0, 42.0) == 100.0);
    CHECK_THAT(weak_efficiency(139.6, 155.1), WithinAbs(90.01, 0.005));
    CHECK(weak_efficiency(100.0, 200.0) == 50.0);
    CHECK_THROWS_AS(weak_efficiency(0.0, 1.0), Error);
    CHECK_THROWS_AS(weak_efficiency(1.0, -1.0), Error);

    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const double t = rng.uniform(0.1, 1000.0);
        CHECK(weak_efficiency(t, t) == 100.0);
    }
}

TEST_CASE("strong_efficiency") {
    CHECK(strong_efficiency(7.0, 7.0, 1.0) == 100.0);
    CHECK_THAT(strong_efficiency(1000.0, 520.0, 2.0), WithinAbs(96.15, 0.005));
    CHECK(strong_efficiency(1000.0, 1000.0, 2.0) == 50.0);
    CHECK_THROWS_AS(strong_efficiency(1.0, 1.0, 0.5), Error);

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const double t = rng.uniform(0.1, 1000.0);
        CHECK(strong_efficiency(t, t, 1.0) == 100.0);
    }
}

TEST_CASE("utilization") {
    CHECK(utilization_percent(400.0, 4, 100.0) == 100.0);
    CHECK(utilization_percent(360.0, 4, 100.0) == 90.0);
    CHECK_THROWS_AS(utilization_percent(1.0, 0, 100.0), Error);
    CHECK_THROWS_AS(utilization_percent(1.0, 4, 0.0), Error);
    CHECK_THROWS_AS(utilization_percent(-1.0, 4, 10.0), Error);
}
