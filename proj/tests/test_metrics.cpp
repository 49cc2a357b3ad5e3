#include <catch2/catch_amalgamated.hpp>

#include "tetrasim/metrics.hpp"
#include "tetrasim/rng.hpp"

using namespace tetrasim;
using namespace tetrasim::metrics;
using Catch::Approx;

TEST_CASE("first delivery initializes state without a sample") {
    AoiTracker t;
    auto s = t.record_delivery(1, 0.0, 3.0, 3.0);
    CHECK(!s.has_value());
    CHECK(t.samples().empty());
}

TEST_CASE("peak age arithmetic: d1=10, d2=16, S1=2 gives A2=8") {
    AoiTracker t;
    t.record_delivery(1, 8.0, 10.0, 2.0);
    auto s = t.record_delivery(1, 15.0, 16.0, 1.0);
    REQUIRE(s.has_value());
    CHECK(*s == Approx(8.0));
}

TEST_CASE("stale deliveries are counted, excluded and flagged") {
    AoiTracker t;
    t.record_delivery(1, 10.0, 11.0, 1.0);
    auto s = t.record_delivery(1, 9.0, 12.0, 3.0);  // older generation
    CHECK(!s.has_value());
    CHECK(t.stale_count() == 1);
    CHECK(t.samples().empty());
    // next in-order delivery still measures against the pre-stale state
    auto s2 = t.record_delivery(1, 12.0, 13.0, 1.0);
    REQUIRE(s2.has_value());
    CHECK(*s2 == Approx(3.0));
}

TEST_CASE("time inversion is a logic error") {
    AoiTracker t;
    CHECK_THROWS_AS(t.record_delivery(1, 5.0, 4.0, 1.0), std::logic_error);
}

TEST_CASE("inconsistent spans break the dual-route agreement") {
    AoiTracker t;
    t.record_delivery(1, 0.0, 2.0, 1.0);  // claimed span 1 != 2 - 0
    CHECK_THROWS_AS(t.record_delivery(1, 3.0, 4.0, 1.0), std::logic_error);
}

TEST_CASE("sources are tracked independently") {
    AoiTracker t;
    t.record_delivery(1, 0.0, 1.0, 1.0);
    t.record_delivery(2, 0.5, 2.0, 1.5);
    auto s1 = t.record_delivery(1, 2.0, 3.0, 1.0);
    auto s2 = t.record_delivery(2, 2.5, 4.0, 1.5);
    REQUIRE(s1.has_value());
    REQUIRE(s2.has_value());
    CHECK(*s1 == Approx(3.0));
    CHECK(*s2 == Approx(3.5));
    CHECK(t.per_source().at(1).size() == 1);
    CHECK(t.per_source().at(2).size() == 1);
}

TEST_CASE("summarize: constant samples give zero-width CI") {
    std::vector<double> v(3000, 4.2);
    auto s = summarize(v);
    CHECK(s.mean == Approx(4.2));
    CHECK(s.ci95_half == Approx(0.0).margin(1e-12));
    CHECK(!s.flagged);
}

TEST_CASE("summarize: too few samples is flagged, not fatal") {
    std::vector<double> v(29, 1.0);
    auto s = summarize(v, 30);
    CHECK(s.flagged);
    CHECK(s.mean == Approx(1.0));
    auto empty = summarize({}, 30);
    CHECK(empty.flagged);
}

TEST_CASE("summarize: iid exponential(1) mean lands near 1") {
    RngStream rng(31337, 0);
    std::vector<double> v;
    v.reserve(1'000'000);
    for (int i = 0; i < 1'000'000; ++i) v.push_back(exp_sample(rng, 1.0));
    auto s = summarize(v);
    CHECK(s.mean > 0.99);
    CHECK(s.mean < 1.01);
    CHECK(s.mean == Approx(1.0).margin(4 * s.se));
    CHECK(s.ci95_half > 0.0);
}

TEST_CASE("summarize mean equals the plain mean of all samples") {
    std::vector<double> v;
    for (int i = 0; i < 1234; ++i) v.push_back(i % 17);
    double acc = 0;
    for (double x : v) acc += x;
    auto s = summarize(v);
    CHECK(s.mean == Approx(acc / v.size()).epsilon(1e-12));
    CHECK(s.count == v.size());
}

TEST_CASE("loss counters add up and PLR decomposition is exact") {
    RunResult r;
    r.generated = 1000;
    r.delivered = 900;
    r.in_flight = 10;
    r.drops.channel = 40;
    r.drops.preempt = 30;
    r.drops.replace = 10;
    r.drops.busy = 8;
    r.drops.access_fail = 2;
    CHECK(r.drops.total() == 90);
    CHECK(r.generated == r.delivered + r.drops.total() + r.in_flight);
    CHECK(r.plr() == Approx(90.0 / 990.0));
    double sum = r.plr_fraction(r.drops.channel) + r.plr_fraction(r.drops.preempt) +
                 r.plr_fraction(r.drops.replace) + r.plr_fraction(r.drops.busy) +
                 r.plr_fraction(r.drops.access_fail);
    CHECK(sum == Approx(r.plr()).epsilon(1e-12));
}
