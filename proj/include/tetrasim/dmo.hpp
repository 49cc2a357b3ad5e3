#pragma once

// Direct-mode SDS over one shared channel: DSB synchronization establishing
// the master role (first fragment rides the DSB), remaining fragments in
// slot 1 of subsequent frames, dual-copy ACK in slots 1 and 3 of the next
// frame, DT316 ACK-wait timer with up to DN316 whole-message retransmissions.
//
// Stations sense the channel at frame boundaries; two DSB starts on the same
// boundary collide and neither becomes master. Deferred and retried starts
// are drawn uniformly over a short frame window so contending stations
// de-synchronize.

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tetrasim/event.hpp"
#include "tetrasim/metrics.hpp"
#include "tetrasim/rng.hpp"
#include "tetrasim/time.hpp"
#include "tetrasim/tmo.hpp"
#include "tetrasim/types.hpp"

namespace tetrasim::dmo {

using tmo::DropCause;

struct DmoParams {
    int dsb_frames = 2;        // synchronization frames, 1..4
    int dt316_frames = 2;      // ACK-wait timer
    int dn316 = 3;             // max SDS retransmissions
    int retry_window = 4;      // frames for the deferred/retry start draw
    double alpha_ch_dmo = 0.0;

    void validate() const {
        if (dsb_frames < 1 || dsb_frames > 4) throw ParamError("dsb_frames must be in [1,4]");
        if (dt316_frames < 1) throw ParamError("dt316_frames must be >= 1");
        if (dn316 < 0) throw ParamError("dn316 must be >= 0");
        if (retry_window < 1) throw ParamError("retry_window must be >= 1");
        if (!(alpha_ch_dmo >= 0.0 && alpha_ch_dmo <= 1.0))
            throw ParamError("alpha_ch_dmo must be in [0,1]");
    }
};

enum class StationPhase : std::uint8_t { Idle, WaitStart, Transmitting };

struct DmoStats {
    std::uint64_t starts = 0;
    std::uint64_t collision_bursts = 0;
    std::uint64_t collision_events = 0;
    std::uint64_t rounds_ok = 0;
    std::uint64_t rounds_failed = 0;

    double collision_rate() const {
        return starts ? static_cast<double>(collision_bursts) / starts : 0.0;
    }
    double emergent_alpha() const {
        auto n = rounds_ok + rounds_failed;
        return n ? static_cast<double>(rounds_failed) / n : 0.0;
    }
};

class DmoLink {
public:
    DmoLink(proto::Engine& eng, DmoParams prm) : eng_(&eng), prm_(prm) { prm_.validate(); }

    /// to_gateway: true for first-responder uplink stations, false for the
    /// gateway's own downlink (feedback) transmitter.
    void add_station(EntityId id, Discipline disc, bool to_gateway, std::uint64_t seed) {
        auto [it, fresh] = st_.try_emplace(id);
        if (!fresh) throw ParamError("duplicate station id");
        Station& s = it->second;
        s.id = id;
        s.disc = disc;
        s.to_gateway = to_gateway;
        s.rng_retry = RngStream(seed, static_cast<std::uint64_t>(id) * 8 + 1);
        s.rng_chan = RngStream(seed, static_cast<std::uint64_t>(id) * 8 + 2);
    }

    /// New update at a station; discipline semantics mirror the TMO buffer.
    /// `target` names the receiving entity (gateway id for uplink, FR id for
    /// relayed feedback).
    void on_update_arrival(EntityId id, const Update& u, EntityId target) {
        Station& s = st(id);
        if (!s.job) {
            accept(s, u, target);
            return;
        }
        switch (s.disc) {
            case Discipline::Pr:
            case Discipline::Prrt:
                report_drop(s.job->u, DropCause::Preempt);
                abandon(s);
                accept(s, u, target);
                break;
            case Discipline::Npr:
                report_drop(u, DropCause::Busy);
                break;
            case Discipline::Fcfs:
                s.queue.push_back({u, target});
                break;
            case Discipline::Replace2:
                if (s.waiting2) report_drop(s.waiting2->first, DropCause::Replace);
                s.waiting2 = {u, target};
                break;
        }
    }

    bool handle(const proto::Engine::Event& ev) {
        switch (ev.payload.kind) {
            case proto::EvKind::DmoStart: on_start(ev.payload); return true;
            case proto::EvKind::DmoArbitrate: on_arbitrate(ev.payload); return true;
            case proto::EvKind::DmoRxDone: on_rx_done(ev.payload); return true;
            case proto::EvKind::DmoAckCopy: on_ack_copy(ev.payload); return true;
            case proto::EvKind::DmoDt316: on_dt316(ev.payload); return true;
            default: return false;
        }
    }

    std::function<void(const Update&, Ticks)> on_gateway_received;
    std::function<void(EntityId, const Update&, Ticks)> on_fr_received;
    std::function<void(const Update&, DropCause)> on_update_dropped;
    /// Audit: every arbitration with its transmission window and outcome.
    std::function<void(Ticks start, Ticks end, EntityId owner, bool collided)> on_transaction;
    std::function<void(Ticks, const char*, EntityId)> trace;

    const DmoStats& stats() const { return stats_; }
    StationPhase phase(EntityId id) const { return st(id).phase; }
    bool busy_station(EntityId id) const { return st(id).job.has_value(); }
    Ticks busy_until() const { return busy_until_; }

    void for_each_held_update(const std::function<void(const Update&)>& fn) const {
        for (const auto& [id, s] : st_) {
            if (s.job) fn(s.job->u);
            for (const auto& q : s.queue) fn(q.first);
            if (s.waiting2) fn(s.waiting2->first);
        }
    }

private:
    struct Job {
        Update u;
        EntityId target = -1;
        std::int64_t serial = 0;
        int frags = 1;
        int dn = 0;           // retransmissions used
        int backoff_exp = 0;  // doubles the draw window per defer/timeout
    };

    struct Station {
        EntityId id = -1;
        Discipline disc = Discipline::Prrt;
        bool to_gateway = true;
        StationPhase phase = StationPhase::Idle;
        std::optional<Job> job;
        std::deque<std::pair<Update, EntityId>> queue;
        std::optional<std::pair<Update, EntityId>> waiting2;
        RngStream rng_retry, rng_chan;
        des::Handle h_start{}, h_dt316{}, h_ack0{}, h_ack1{};
    };

    Station& st(EntityId id) {
        auto it = st_.find(id);
        if (it == st_.end()) throw std::logic_error("unknown dmo station");
        return it->second;
    }
    const Station& st(EntityId id) const {
        auto it = st_.find(id);
        if (it == st_.end()) throw std::logic_error("unknown dmo station");
        return it->second;
    }

    Ticks now() const { return eng_->now(); }

    void emit_trace(const char* kind, EntityId who) {
        if (trace) trace(now(), kind, who);
    }

    void report_drop(const Update& u, DropCause cause) {
        emit_trace("FAIL", u.source_id);
        if (on_update_dropped) on_update_dropped(u, cause);
    }

    void accept(Station& s, const Update& u, EntityId target) {
        Job j;
        j.u = u;
        j.target = target;
        j.serial = serial_seq_++;
        j.frags = std::max(1, u.n_fragments);
        s.job = j;
        s.phase = StationPhase::WaitStart;
        schedule_start(s, next_boundary(now()));
    }

    static Ticks next_boundary(Ticks from) {
        return ((from + kTicksPerFrame - 1) / kTicksPerFrame) * kTicksPerFrame;
    }

    void schedule_start(Station& s, Ticks boundary) {
        s.h_start = eng_->schedule(boundary, s.id,
                                   proto::Ev{proto::EvKind::DmoStart, s.id, 0,
                                             s.job->serial, 0});
    }

    /// Uniform draw over a frame-boundary window starting at the first
    /// boundary >= `from`. The window is retry_window frames, doubled per
    /// consecutive defer/timeout of the current job (capped), so persistent
    /// contenders spread out instead of regrinding the same boundaries.
    Ticks draw_start(Station& s, Ticks from) {
        std::int64_t f0 = (from + kTicksPerFrame - 1) / kTicksPerFrame;
        int exp = std::min(s.job->backoff_exp, 5);
        auto window = static_cast<std::uint32_t>(prm_.retry_window) << exp;
        auto pick = f0 + s.rng_retry.uniform_below(window);
        return pick * kTicksPerFrame;
    }

    void abandon(Station& s) {
        eng_->cancel(s.h_start);
        eng_->cancel(s.h_dt316);
        eng_->cancel(s.h_ack0);
        eng_->cancel(s.h_ack1);
        if (owner_serial_ == s.job->serial) {
            // stealing mid-transaction releases the channel
            busy_until_ = std::min(busy_until_, now());
            if (owned_pending_) {
                if (on_transaction) on_transaction(owned_start_, now(), s.id, false);
                owned_pending_ = false;
            }
            owner_serial_ = -1;
        }
        s.job.reset();
        s.phase = StationPhase::Idle;
    }

    void finish(Station& s) {
        eng_->cancel(s.h_start);
        eng_->cancel(s.h_dt316);
        eng_->cancel(s.h_ack0);
        eng_->cancel(s.h_ack1);
        s.job.reset();
        s.phase = StationPhase::Idle;
        if (s.waiting2) {
            auto [u, tgt] = *s.waiting2;
            s.waiting2.reset();
            accept(s, u, tgt);
        } else if (!s.queue.empty()) {
            auto [u, tgt] = s.queue.front();
            s.queue.pop_front();
            accept(s, u, tgt);
        }
    }

    void on_start(const proto::Ev& e) {
        Station& s = st(e.who);
        if (!s.job || s.job->serial != e.b || s.phase != StationPhase::WaitStart) return;
        if (busy_until_ > now()) {
            // channel occupied: re-sense at a randomized later boundary
            ++s.job->backoff_exp;
            schedule_start(s, draw_start(s, busy_until_));
            return;
        }
        auto& list = starts_[now()];
        list.push_back({s.id, s.job->serial});
        if (list.size() == 1) {
            eng_->schedule(now(), -1, proto::Ev{proto::EvKind::DmoArbitrate, -1, now(), 0, 0});
        }
    }

    void on_arbitrate(const proto::Ev& e) {
        auto it = starts_.find(e.a);
        if (it == starts_.end()) return;
        auto txs = std::move(it->second);
        starts_.erase(it);
        Ticks start = e.a;
        Ticks latest_end = start;
        bool collided = txs.size() >= 2;
        for (auto [id, serial] : txs) {
            Station& s = st(id);
            if (!s.job || s.job->serial != serial) continue;
            ++stats_.starts;
            Ticks tx_end = start +
                static_cast<Ticks>(prm_.dsb_frames + s.job->frags - 1) * kTicksPerFrame;
            latest_end = std::max(latest_end, tx_end);
            s.phase = StationPhase::Transmitting;
            emit_trace("DSB", s.id);
            s.h_dt316 = eng_->schedule(
                tx_end + static_cast<Ticks>(prm_.dt316_frames) * kTicksPerFrame, s.id,
                proto::Ev{proto::EvKind::DmoDt316, s.id, 0, serial, s.job->dn});
            if (!collided) {
                s.job->backoff_exp = 0;  // held the channel alone
                owner_serial_ = serial;
                owned_start_ = start;
                owned_pending_ = true;
                eng_->schedule(tx_end, s.id,
                               proto::Ev{proto::EvKind::DmoRxDone, s.id, 0, serial, 0});
            } else {
                ++stats_.collision_bursts;
                ++stats_.rounds_failed;
            }
        }
        if (collided) {
            ++stats_.collision_events;
            owner_serial_ = -1;
            if (on_transaction && !txs.empty()) on_transaction(start, latest_end, -1, true);
        }
        busy_until_ = std::max(busy_until_, latest_end);
    }

    void on_rx_done(const proto::Ev& e) {
        Station& s = st(e.who);
        if (!s.job || s.job->serial != e.b) return;
        if (owned_pending_ && owner_serial_ == e.b) {
            if (on_transaction) on_transaction(owned_start_, now(), s.id, false);
            owned_pending_ = false;
        }
        bool error = false;
        for (int i = 0; i < s.job->frags; ++i) {
            if (prm_.alpha_ch_dmo > 0.0 && s.rng_chan.bernoulli(prm_.alpha_ch_dmo)) error = true;
        }
        if (error) {
            ++stats_.rounds_failed;
            return;  // no ACK; DT316 recovers
        }
        emit_trace("FRAG", s.id);
        // receiver has the whole message; duplicates from lost ACKs are
        // forwarded only once
        if (last_rx_[s.id] != s.job->serial) {
            last_rx_[s.id] = s.job->serial;
            if (s.to_gateway) {
                if (on_gateway_received) on_gateway_received(s.job->u, now());
                emit_trace("RELAY", s.id);
            } else {
                if (on_fr_received) on_fr_received(s.job->target, s.job->u, now());
            }
        }
        // dual-copy ACK in slots 1 and 3 of the next frame
        Ticks ack_frame_start = now();
        busy_until_ = std::max(busy_until_, ack_frame_start + kTicksPerFrame);
        s.h_ack0 = eng_->schedule(ack_frame_start + kTicksPerSlot, s.id,
                                  proto::Ev{proto::EvKind::DmoAckCopy, s.id, 0, e.b, 0});
        s.h_ack1 = eng_->schedule(ack_frame_start + 3 * kTicksPerSlot, s.id,
                                  proto::Ev{proto::EvKind::DmoAckCopy, s.id, 0, e.b, 1});
    }

    void on_ack_copy(const proto::Ev& e) {
        Station& s = st(e.who);
        if (!s.job || s.job->serial != e.b) return;
        if (prm_.alpha_ch_dmo > 0.0 && s.rng_chan.bernoulli(prm_.alpha_ch_dmo)) {
            if (e.c == 1) ++stats_.rounds_failed;  // both copies lost
            return;
        }
        emit_trace(e.c == 0 ? "ACK1" : "ACK3", s.id);
        ++stats_.rounds_ok;
        if (owner_serial_ == s.job->serial) owner_serial_ = -1;
        finish(s);
    }

    void on_dt316(const proto::Ev& e) {
        Station& s = st(e.who);
        if (!s.job || s.job->serial != e.b || s.job->dn != e.c) return;
        ++s.job->dn;
        if (owner_serial_ == s.job->serial) owner_serial_ = -1;
        if (s.job->dn > prm_.dn316) {
            report_drop(s.job->u, DropCause::Channel);
            finish(s);
            return;
        }
        s.phase = StationPhase::WaitStart;
        ++s.job->backoff_exp;
        schedule_start(s, draw_start(s, now()));
    }

    proto::Engine* eng_;
    DmoParams prm_;
    std::map<EntityId, Station> st_;
    std::map<Ticks, std::vector<std::pair<EntityId, std::int64_t>>> starts_;
    std::map<EntityId, std::int64_t> last_rx_;
    Ticks busy_until_ = 0;
    std::int64_t owner_serial_ = -1;
    Ticks owned_start_ = 0;
    bool owned_pending_ = false;
    std::int64_t serial_seq_ = 1;
    DmoStats stats_;
};

} // namespace tetrasim::dmo
