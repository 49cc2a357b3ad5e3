#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "tetrasim/tmo.hpp"

using namespace tetrasim;
using namespace tetrasim::tmo;
using Catch::Approx;

namespace {

struct Harness {
    proto::Engine eng;
    TmoCell cell;
    std::vector<std::pair<EntityId, Update>> pending;
    std::vector<std::pair<Ticks, Update>> deliveries;
    std::vector<std::pair<Update, DropCause>> drops;
    std::vector<std::pair<Ticks, EntityId>> access_txs;  // slot_start ticks
    std::vector<std::pair<Ticks, EntityId>> frag_txs;
    bool horizon_hit = false;

    explicit Harness(TmoParams prm, std::uint64_t seed = 1)
        : cell(eng, prm, TickClock{}, seed) {
        cell.on_uplink_delivered = [&](const Update& u, Ticks t) {
            deliveries.emplace_back(t, u);
        };
        cell.on_update_dropped = [&](const Update& u, DropCause c) {
            drops.emplace_back(u, c);
        };
        cell.on_uplink_tx = [&](Ticks slot_start, EntityId id, bool access) {
            (access ? access_txs : frag_txs).emplace_back(slot_start, id);
        };
    }

    void inject(Ticks t, EntityId id, const Update& u) {
        pending.emplace_back(id, u);
        eng.schedule(t, id,
                     proto::Ev{proto::EvKind::FrArrival, id,
                               static_cast<std::int64_t>(pending.size() - 1), 0, 0});
    }

    void run_to(Ticks horizon) {
        horizon_hit = false;
        eng.schedule(horizon, -1, proto::Ev{proto::EvKind::Horizon, -1, 0, 0, 0});
        eng.run_until([&] { return horizon_hit; },
                      [&](const proto::Engine::Event& ev) {
                          switch (ev.payload.kind) {
                              case proto::EvKind::FrArrival:
                                  cell.on_update_arrival(pending[ev.payload.a].first,
                                                         pending[ev.payload.a].second);
                                  break;
                              case proto::EvKind::Horizon:
                                  horizon_hit = true;
                                  break;
                              default:
                                  cell.handle(ev);
                          }
                      });
    }
};

Update up(EntityId src, Ticks gen_tick, int frags = 1) {
    Update u;
    u.source_id = src;
    u.gen_time = TickClock{}.to_seconds(gen_tick);
    u.n_fragments = frags;
    u.uid = gen_tick;
    return u;
}

TmoParams clean_params() {
    TmoParams p;
    p.alpha_ch = 0.0;
    p.access_randomize = false;  // deterministic slot schedules for hand traces
    p.access_subslots = 1;
    return p;
}

} // namespace

TEST_CASE("single-fragment transaction follows the hand-computed slot schedule") {
    Harness h(clean_params());
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 1);
    h.inject(100, 10, up(10, 100));
    h.run_to(5000);

    // arrival in frame 0 -> MAC-ACCESS in slot 0 of frame 1 (burst ends at
    // tick 320) -> MAC-RESOURCE in frame 2 -> fragment in the reserved slot
    // of frame 3 (ends 832) -> ACK in frame 4 (ends 1088) completes it
    REQUIRE(h.access_txs.size() == 1);
    CHECK(h.access_txs[0].first == 4 * kTicksPerSlot);
    REQUIRE(h.frag_txs.size() == 1);
    CHECK(h.frag_txs[0].first == 3 * kTicksPerFrame);
    REQUIRE(h.deliveries.size() == 1);
    CHECK(h.deliveries[0].first == 17 * kTicksPerSlot);
    CHECK(h.cell.phase(10) == Phase::Idle);
    CHECK(h.cell.stats().procedures_ok == 1);
    CHECK(h.cell.stats().emergent_alpha() == 0.0);
}

TEST_CASE("an arrival in frame 16 accesses in frame 18, never the control frame") {
    Harness h(clean_params());
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 1);
    h.inject(16 * kTicksPerFrame + 10, 10, up(10, 16 * kTicksPerFrame + 10));
    h.run_to(30 * kTicksPerFrame);
    REQUIRE(h.access_txs.size() == 1);
    CHECK(h.access_txs[0].first == 18 * kTicksPerFrame);  // frame 18 slot 0
}

TEST_CASE("multi-fragment grant reserves non-overlapping future slots") {
    Harness h(clean_params());
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 1);
    h.inject(100, 10, up(10, 100, 3));
    h.run_to(40 * kTicksPerFrame);

    // access at frame 1, grant at frame 2, fragments in frames 3-5,
    // ACK in frame 6: delivery at tick 1600
    REQUIRE(h.frag_txs.size() == 3);
    CHECK(h.frag_txs[0].first == 3 * kTicksPerFrame);
    CHECK(h.frag_txs[1].first == 4 * kTicksPerFrame);
    CHECK(h.frag_txs[2].first == 5 * kTicksPerFrame);
    REQUIRE(h.deliveries.size() == 1);
    CHECK(h.deliveries[0].first == 25 * kTicksPerSlot);
}

TEST_CASE("two simultaneous accesses collide and both eventually deliver") {
    Harness h(clean_params());
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 1);
    h.cell.add_ms(11, MsRole::FirstResponder, Discipline::Npr, 1);
    h.inject(10, 10, up(10, 10));
    h.inject(20, 11, up(11, 20));
    h.run_to(400 * kTicksPerFrame);

    CHECK(h.cell.stats().collision_slots >= 1);
    CHECK(h.cell.stats().collision_bursts >= 2);
    REQUIRE(h.deliveries.size() == 2);
    CHECK(h.drops.empty());
    // the collided slot is the same for both
    CHECK(h.access_txs[0].first == h.access_txs[1].first);
}

TEST_CASE("alpha_ch = 1 exhausts Nu and the message fails as access_fail") {
    TmoParams p = clean_params();
    p.alpha_ch = 1.0;
    p.nu = 3;
    Harness h(p);
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 1);
    h.inject(10, 10, up(10, 10));
    h.run_to(2000 * kTicksPerFrame);

    CHECK(h.deliveries.empty());
    REQUIRE(h.drops.size() == 1);
    CHECK(h.drops[0].second == DropCause::AccessFail);
    CHECK(h.cell.stats().access_bursts == 3);  // exactly Nu attempts
}

TEST_CASE("PRRT spends its retransmission budget before giving up") {
    TmoParams p = clean_params();
    p.alpha_ch = 1.0;
    p.nu = 2;
    p.sds_retx_limit = 2;
    Harness h(p);
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Prrt, 1);
    h.inject(10, 10, up(10, 10));
    h.run_to(4000 * kTicksPerFrame);

    REQUIRE(h.drops.size() == 1);
    // 3 procedures (initial + 2 retransmissions), Nu = 2 attempts each
    CHECK(h.cell.stats().access_bursts == 6);
    CHECK(h.cell.stats().procedures_failed == 3);
}

TEST_CASE("disciplines govern arrivals while busy") {
    SECTION("NPR drops the newcomer") {
        Harness h(clean_params());
        h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 1);
        h.inject(10, 10, up(10, 10));
        h.inject(100, 10, up(10, 100));
        h.run_to(50 * kTicksPerFrame);
        REQUIRE(h.drops.size() == 1);
        CHECK(h.drops[0].second == DropCause::Busy);
        CHECK(h.drops[0].first.uid == 100);       // the new update was dropped
        REQUIRE(h.deliveries.size() == 1);
        CHECK(h.deliveries[0].second.uid == 10);  // the old one went through
    }
    SECTION("PR preempts the transaction in progress") {
        Harness h(clean_params());
        h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Pr, 1);
        h.inject(10, 10, up(10, 10));
        h.inject(400, 10, up(10, 400));  // mid-transaction (before grant at 576)
        h.run_to(50 * kTicksPerFrame);
        REQUIRE(h.drops.size() == 1);
        CHECK(h.drops[0].second == DropCause::Preempt);
        CHECK(h.drops[0].first.uid == 10);
        REQUIRE(h.deliveries.size() == 1);
        CHECK(h.deliveries[0].second.uid == 400);
    }
    SECTION("FCFS queues and preserves generation order") {
        Harness h(clean_params());
        h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Fcfs, 1);
        for (int i = 0; i < 5; ++i) h.inject(10 + i, 10, up(10, 10 + i));
        h.run_to(200 * kTicksPerFrame);
        REQUIRE(h.deliveries.size() == 5);
        for (int i = 1; i < 5; ++i) {
            CHECK(h.deliveries[i].second.gen_time > h.deliveries[i - 1].second.gen_time);
        }
        CHECK(h.drops.empty());
    }
    SECTION("REPLACE2 swaps only the waiting update") {
        Harness h(clean_params());
        h.cell.add_ms(10, MsRole::Gateway, Discipline::Replace2, 1);
        h.inject(10, 10, up(10, 10));
        h.inject(20, 10, up(10, 20));   // waits
        h.inject(30, 10, up(10, 30));   // replaces 20
        h.run_to(100 * kTicksPerFrame);
        REQUIRE(h.drops.size() == 1);
        CHECK(h.drops[0].second == DropCause::Replace);
        CHECK(h.drops[0].first.uid == 20);
        REQUIRE(h.deliveries.size() == 2);
        CHECK(h.deliveries[0].second.uid == 10);
        CHECK(h.deliveries[1].second.uid == 30);
    }
}

TEST_CASE("no MS ever transmits in the control frame; every update resolves") {
    TmoParams p = clean_params();
    p.alpha_ch = 0.3;
    p.nu = 4;
    Harness h(p, 7);
    for (EntityId id = 10; id < 16; ++id)
        h.cell.add_ms(id, MsRole::FirstResponder, Discipline::Prrt, 7);
    RngStream gen(99, 0);
    Ticks t = 0;
    for (int i = 0; i < 400; ++i) {
        t += 1 + static_cast<Ticks>(gen.uniform_below(3 * kTicksPerFrame));
        EntityId id = 10 + static_cast<EntityId>(gen.uniform_below(6));
        h.inject(t, id, up(id, t));
    }
    h.run_to(t + 3000 * kTicksPerFrame);

    for (auto& [slot_start, id] : h.access_txs) {
        REQUIRE(!TickClock::is_control_frame(TickClock::frame_of(slot_start)));
    }
    for (auto& [slot_start, id] : h.frag_txs) {
        REQUIRE(!TickClock::is_control_frame(TickClock::frame_of(slot_start)));
    }
    // all generated updates are resolved one way or the other
    CHECK(h.deliveries.size() + h.drops.size() == 400);
}

TEST_CASE("reserved fragment slots never overlap between MSs") {
    TmoParams p = clean_params();
    Harness h(p, 3);
    for (EntityId id = 10; id < 14; ++id)
        h.cell.add_ms(id, MsRole::FirstResponder, Discipline::Fcfs, 3);
    RngStream gen(5, 0);
    Ticks t = 0;
    for (int i = 0; i < 120; ++i) {
        t += 1 + static_cast<Ticks>(gen.uniform_below(2 * kTicksPerFrame));
        EntityId id = 10 + static_cast<EntityId>(gen.uniform_below(4));
        h.inject(t, id, up(id, t, 4));  // 4 fragments -> 4 reserved slots each
    }
    h.run_to(t + 8000 * kTicksPerFrame);

    std::set<Ticks> frag_slots;
    for (auto& [slot_start, id] : h.frag_txs) {
        REQUIRE(!frag_slots.count(slot_start));  // one transmitter per slot
        frag_slots.insert(slot_start);
    }
    // under this contention an occasional message dies of ACK-timeout behind
    // the downlink backlog; every update still resolves
    CHECK(h.deliveries.size() + h.drops.size() == 120);
    CHECK(h.deliveries.size() >= 118);
}

TEST_CASE("WT = 1 retry uses the single next opportunity") {
    TmoParams p = clean_params();
    p.wt = 1;
    Harness h(p);
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 1);
    RngStream rng(1, 0);
    // from mid-frame 4, the only candidate in a 1-frame window is frame 5
    auto slot = h.cell.draw_retry_access_slot(4 * kTicksPerFrame + 3, rng);
    CHECK(slot == 5 * kSlotsPerFrame);
    // from frame 16 the window holds only the control frame, so it grows
    auto slot2 = h.cell.draw_retry_access_slot(16 * kTicksPerFrame + 3, rng);
    CHECK(slot2 == 18 * kSlotsPerFrame);
}

TEST_CASE("retry draw is reproducible and lands inside the WT window") {
    TmoParams p = clean_params();
    p.wt = 15;
    Harness h(p);
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 1);
    RngStream a(42, 1), b(42, 1);
    for (int i = 0; i < 200; ++i) {
        auto s1 = h.cell.draw_retry_access_slot(1000, a);
        auto s2 = h.cell.draw_retry_access_slot(1000, b);
        REQUIRE(s1 == s2);
        auto frame = s1 / kSlotsPerFrame;
        REQUIRE(frame >= TickClock::frame_of(1000) + 1);
        REQUIRE(frame < TickClock::frame_of(1000) + 1 + 15);
        REQUIRE(!TickClock::is_control_frame(frame));
    }
}

TEST_CASE("grant loss is recovered by the WT timer") {
    TmoParams p = clean_params();
    p.alpha_ch = 0.35;   // bursts fail often, including MAC-RESOURCE
    p.sds_retx_limit = 8;
    Harness h(p, 11);
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Prrt, 11);
    // spacing greater than the worst-case retransmission cycle, so no preempts
    for (int i = 0; i < 60; ++i)
        h.inject(i * 400 * kTicksPerFrame + 5, 10, up(10, i * 400 * kTicksPerFrame + 5));
    h.run_to(61 * 400 * kTicksPerFrame);
    // widely spaced arrivals and a generous budget: nearly everything lands
    CHECK(h.deliveries.size() + h.drops.size() == 60);
    CHECK(h.deliveries.size() >= 55);
}

TEST_CASE("feedback rides the reserved downlink and survives burst errors") {
    TmoParams p = clean_params();
    p.alpha_ch = 0.4;
    Harness h(p, 13);
    h.cell.add_ms(10, MsRole::FirstResponder, Discipline::Npr, 13);
    std::vector<std::pair<EntityId, Ticks>> fb;
    h.cell.on_downlink_delivered = [&](EntityId target, const Update&, Ticks t) {
        fb.emplace_back(target, t);
    };
    Update u;
    u.kind = UpdateKind::DownlinkFeedback;
    u.source_id = 1;
    for (int i = 0; i < 50; ++i) h.cell.enqueue_feedback(10, u);
    h.run_to(4000 * kTicksPerFrame);
    REQUIRE(fb.size() == 50);  // blind per-burst retries make delivery certain
    CHECK(h.cell.stats().dl_failures > 0);
}

TEST_CASE("voice setup is one access exchange") {
    Harness h(clean_params());
    h.cell.add_ms(20, MsRole::Background, Discipline::Fcfs, 1);
    int established = 0;
    h.cell.on_voice_established = [&](EntityId) { ++established; };
    h.eng.schedule(10, 20, proto::Ev{proto::EvKind::VoiceArrival, 20, 0, 0, 0});
    bool done = false;
    h.eng.schedule(50 * kTicksPerFrame, -1, proto::Ev{proto::EvKind::Horizon, -1, 0, 0, 0});
    h.eng.run_until([&] { return done; },
                    [&](const proto::Engine::Event& ev) {
                        if (ev.payload.kind == proto::EvKind::VoiceArrival)
                            h.cell.on_voice_arrival(ev.payload.who);
                        else if (ev.payload.kind == proto::EvKind::Horizon)
                            done = true;
                        else
                            h.cell.handle(ev);
                    });
    CHECK(established == 1);
    CHECK(h.cell.stats().access_bursts == 1);
    CHECK(h.deliveries.empty());  // a call setup is not an update delivery
}
