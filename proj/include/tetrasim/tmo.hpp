#pragma once

// Trunked-mode SDS over the MCCH: invitation-based slotted ALOHA with WT/Nu
// retry logic, reserved-capacity grants, ACK and whole-message retransmission,
// and stealing-flag preemption at the MS buffer.
//
// Slotting model: uplink access opportunities and reserved fragment slots are
// slot 0 (the MCCH) of non-control frames; a frame's slot 0 is an opportunity
// exactly when the BS has not reserved it. The BS transmits one downlink PDU
// (MAC-RESOURCE, ACK or feedback) per frame in slot 0 of any frame. Burst
// events fire at slot end. An SDS transaction is access -> MAC-RESOURCE ->
// one reserved slot per fragment -> ACK; it completes at the MS when the ACK
// lands, and the update is handed to the remote agent at that instant. A
// voice setup completes at the MAC-RESOURCE.

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
#include "tetrasim/types.hpp"

namespace tetrasim::tmo {

struct TmoParams {
    int wt = 4;                  // frames to wait for MAC-RESOURCE before an access retry
    int nu = 5;                  // max random-access attempts per procedure
    int sds_retx_limit = 3;      // whole-message retransmissions (NACK/ACK-timeout)
    int ack_timeout_frames = 4;
    double alpha_ch = 0.0;       // per-burst channel error probability
    // randomize the first access over the next wt frames' opportunities, as
    // the broadcast access parameters prescribe; false pins the first attempt
    // to the immediately next opportunity (deterministic, collision-prone)
    bool access_randomize = true;
    // MAC-ACCESS bursts are subslot-sized; two bursts collide only when they
    // pick the same subslot of the same opportunity slot
    int access_subslots = 2;
    static constexpr int first_fragment_bits = 86;

    void validate() const {
        if (wt < 1 || wt > 15) throw ParamError("wt must be in [1,15]");
        if (nu < 1 || nu > 15) throw ParamError("nu must be in [1,15]");
        if (sds_retx_limit < 0) throw ParamError("sds_retx_limit must be >= 0");
        if (ack_timeout_frames < 1) throw ParamError("ack_timeout_frames must be >= 1");
        if (!(alpha_ch >= 0.0 && alpha_ch <= 1.0)) throw ParamError("alpha_ch must be in [0,1]");
        if (access_subslots < 1 || access_subslots > 4)
            throw ParamError("access_subslots must be in [1,4]");
    }
};

enum class Phase : std::uint8_t { Idle, AwaitOpp, AwaitGrant, Reserved, AwaitAck };
enum class MsRole : std::uint8_t { FirstResponder, Background, Gateway };
enum class JobKind : std::uint8_t { Sds, Voice };
enum class DropCause : std::uint8_t { Channel, Preempt, Replace, Busy, AccessFail };

struct TmoStats {
    std::uint64_t access_bursts = 0;
    std::uint64_t collision_bursts = 0;
    std::uint64_t collision_slots = 0;
    std::uint64_t burst_channel_failures = 0;
    std::uint64_t frag_bursts = 0;
    std::uint64_t dl_bursts = 0;
    std::uint64_t dl_failures = 0;
    std::uint64_t procedures_ok = 0;
    std::uint64_t procedures_failed = 0;
    std::uint64_t voice_established = 0;
    std::uint64_t voice_blocked = 0;

    double collision_rate() const {
        return access_bursts ? static_cast<double>(collision_bursts) / access_bursts : 0.0;
    }
    double emergent_alpha() const {
        auto n = procedures_ok + procedures_failed;
        return n ? static_cast<double>(procedures_failed) / n : 0.0;
    }
};

class TmoCell {
public:
    TmoCell(proto::Engine& eng, TmoParams prm, TickClock clk, std::uint64_t seed)
        : eng_(&eng), prm_(prm), clk_(clk), rng_dl_(seed, 0 * 8 + 2) {
        prm_.validate();
    }

    /// Register an MS; ids are assigned by the caller and must be unique.
    void add_ms(EntityId id, MsRole role, Discipline disc, std::uint64_t seed) {
        auto [it, fresh] = ms_.try_emplace(id);
        if (!fresh) throw ParamError("duplicate ms id");
        Ms& m = it->second;
        m.id = id;
        m.role = role;
        m.disc = disc;
        m.rng_retry = RngStream(seed, static_cast<std::uint64_t>(id) * 8 + 1);
        m.rng_chan = RngStream(seed, static_cast<std::uint64_t>(id) * 8 + 2);
    }

    // -- scenario-facing operations -------------------------------------

    /// New update at an MS; the discipline decides what happens when the
    /// transmitter is busy (stealing-flag preemption, discard, enqueue, or
    /// waiting-slot replacement).
    void on_update_arrival(EntityId id, const Update& u) {
        Ms& m = ms(id);
        if (!m.job) {
            accept(m, JobKind::Sds, u);
            return;
        }
        switch (m.disc) {
            case Discipline::Pr:
            case Discipline::Prrt:
                report_drop(m.job->u, DropCause::Preempt);
                abandon_job(m);
                accept(m, JobKind::Sds, u);
                break;
            case Discipline::Npr:
                report_drop(u, DropCause::Busy);
                break;
            case Discipline::Fcfs:
                m.queue.push_back(QItem{JobKind::Sds, u});
                break;
            case Discipline::Replace2:
                if (m.waiting2) report_drop(*m.waiting2, DropCause::Replace);
                m.waiting2 = u;
                break;
        }
    }

    /// Voice call setup: one random-access exchange on the MCCH. Busy
    /// non-FCFS transmitters skip the setup (counted, no retry).
    void on_voice_arrival(EntityId id) {
        Ms& m = ms(id);
        if (!m.job) {
            accept(m, JobKind::Voice, Update{});
        } else if (m.disc == Discipline::Fcfs) {
            m.queue.push_back(QItem{JobKind::Voice, Update{}});
        } else {
            ++stats_.voice_blocked;
        }
    }

    /// Reserved-access downlink transfer (remote-agent feedback, or the
    /// BS-to-gateway leg in the DMO topology). Retried per burst until clean.
    void enqueue_feedback(EntityId target, const Update& u) {
        dl_push(DlPdu{DlKind::Feedback, target, 0, 0, u});
    }

    // -- event dispatch ---------------------------------------------------

    /// Returns false for events the cell does not own.
    bool handle(const proto::Engine::Event& ev) {
        switch (ev.payload.kind) {
            case proto::EvKind::TmoAccessTx: on_access_tx(ev.payload); return true;
            case proto::EvKind::TmoArbitrate: on_arbitrate(ev.payload); return true;
            case proto::EvKind::TmoGrantTimeout: on_grant_timeout(ev.payload); return true;
            case proto::EvKind::TmoFragTx: on_frag_tx(ev.payload); return true;
            case proto::EvKind::TmoAckTimeout: on_ack_timeout(ev.payload); return true;
            case proto::EvKind::TmoDownlinkTx: on_downlink_tx(); return true;
            default: return false;
        }
    }

    // -- opportunity scans (also exercised directly by tests) -------------

    /// First MCCH access opportunity at or after `from`: slot 0 of the next
    /// non-control frame the BS has not reserved.
    std::int64_t first_open_access_slot(Ticks from) const {
        std::int64_t f = (from + kTicksPerFrame - 1) / kTicksPerFrame;
        while (TickClock::is_control_frame(f) || reserved_.count(f)) ++f;
        return f * kSlotsPerFrame;
    }

    /// Retry opportunity drawn uniformly over the open opportunities in the
    /// next `wt` frames (window grows until it contains at least one).
    std::int64_t draw_retry_access_slot(Ticks from, RngStream& rng) const {
        std::int64_t f0 = TickClock::frame_of(from) + 1;
        int window = prm_.wt;
        std::vector<std::int64_t> cand;
        while (cand.empty()) {
            for (std::int64_t f = f0; f < f0 + window; ++f) {
                if (!TickClock::is_control_frame(f) && !reserved_.count(f)) cand.push_back(f);
            }
            ++window;
        }
        return cand[rng.uniform_below(static_cast<std::uint32_t>(cand.size()))] * kSlotsPerFrame;
    }

    // -- callbacks (set by the scenario / tests) --------------------------

    std::function<void(const Update&, Ticks)> on_uplink_delivered;
    std::function<void(EntityId, const Update&, Ticks)> on_downlink_delivered;
    std::function<void(const Update&, DropCause)> on_update_dropped;
    std::function<void(EntityId)> on_voice_established;
    std::function<void(Ticks slot_start, EntityId, bool is_access)> on_uplink_tx;  // audit
    std::function<void(Ticks, const char*, EntityId)> trace;

    const TmoStats& stats() const { return stats_; }
    const TmoParams& params() const { return prm_; }

    Phase phase(EntityId id) const { return ms(id).phase; }
    bool busy(EntityId id) const { return ms(id).job.has_value(); }
    std::size_t queue_len(EntityId id) const { return ms(id).queue.size(); }

    /// Walk every uplink update currently held somewhere in the cell.
    void for_each_held_update(const std::function<void(const Update&)>& fn) const {
        for (const auto& [id, m] : ms_) {
            if (m.job && m.job->kind == JobKind::Sds) fn(m.job->u);
            for (const auto& q : m.queue)
                if (q.kind == JobKind::Sds) fn(q.u);
            if (m.waiting2) fn(*m.waiting2);
        }
    }

private:
    enum class DlKind : std::uint8_t { GrantComplete, GrantReserve, Ack, Feedback };

    struct DlPdu {
        DlKind kind;
        EntityId target;
        std::int64_t serial;
        int nslots;
        Update u;
    };

    struct QItem {
        JobKind kind;
        Update u;
    };

    struct Job {
        JobKind kind = JobKind::Sds;
        Update u;
        std::int64_t serial = 0;
        int frags = 1;
        int attempts = 0;
        int retx = 0;
        std::vector<std::int64_t> frag_slots;
        int frags_tx = 0;
    };

    struct Ms {
        EntityId id = -1;
        MsRole role = MsRole::Background;
        Discipline disc = Discipline::Fcfs;
        Phase phase = Phase::Idle;
        std::optional<Job> job;
        std::deque<QItem> queue;
        std::optional<Update> waiting2;
        RngStream rng_retry, rng_chan;
        des::Handle h_tx{}, h_grant_to{}, h_ack_to{};
        std::vector<des::Handle> h_frags;
    };

    struct RxRecord {
        EntityId ms;
        int expected;
        int received = 0;
        bool error = false;
    };

    static bool retx_allowed(Discipline d) {
        // PR and NPR are the "no retransmission" schemes; the others use the
        // protocol's whole-message retransmission budget.
        return d == Discipline::Prrt || d == Discipline::Fcfs || d == Discipline::Replace2;
    }

    Ms& ms(EntityId id) {
        auto it = ms_.find(id);
        if (it == ms_.end()) throw std::logic_error("unknown ms id");
        return it->second;
    }
    const Ms& ms(EntityId id) const {
        auto it = ms_.find(id);
        if (it == ms_.end()) throw std::logic_error("unknown ms id");
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

    void accept(Ms& m, JobKind kind, const Update& u) {
        Job j;
        j.kind = kind;
        j.u = u;
        j.serial = serial_seq_++;
        j.frags = (kind == JobKind::Voice) ? 1 : std::max(1, u.n_fragments);
        m.job = j;
        m.phase = Phase::AwaitOpp;
        schedule_access(m, now());
    }

    void schedule_access(Ms& m, Ticks from) {
        std::int64_t slot = prm_.access_randomize ? draw_retry_access_slot(from, m.rng_retry)
                                                  : first_open_access_slot(from);
        m.h_tx = eng_->schedule(TickClock::slot_end(slot), m.id,
                                proto::Ev{proto::EvKind::TmoAccessTx, m.id, slot,
                                          m.job->serial, 0});
    }

    /// Cancel everything pending for the current job and forget the BS-side
    /// fragment record. Used by preemption.
    void abandon_job(Ms& m) {
        eng_->cancel(m.h_tx);
        eng_->cancel(m.h_grant_to);
        eng_->cancel(m.h_ack_to);
        for (auto h : m.h_frags) eng_->cancel(h);
        m.h_frags.clear();
        rx_.erase(m.job->serial);
        m.job.reset();
        m.phase = Phase::Idle;
    }

    void complete_job(Ms& m) {
        eng_->cancel(m.h_tx);
        eng_->cancel(m.h_grant_to);
        eng_->cancel(m.h_ack_to);
        for (auto h : m.h_frags) eng_->cancel(h);
        m.h_frags.clear();
        m.job.reset();
        m.phase = Phase::Idle;
        if (m.waiting2) {
            Update next = *m.waiting2;
            m.waiting2.reset();
            accept(m, JobKind::Sds, next);
        } else if (!m.queue.empty()) {
            QItem q = m.queue.front();
            m.queue.pop_front();
            accept(m, q.kind, q.u);
        }
    }

    /// One full access->...->outcome cycle failed (Nu exhausted, fragment
    /// error, or ACK timeout). Retransmitting disciplines restart the whole
    /// random-access procedure while budget remains.
    void procedure_failed(Ms& m, DropCause cause) {
        ++stats_.procedures_failed;
        if (retx_allowed(m.disc) && m.job->retx < prm_.sds_retx_limit) {
            ++m.job->retx;
            m.job->attempts = 0;
            m.job->frag_slots.clear();
            m.job->frags_tx = 0;
            m.phase = Phase::AwaitOpp;
            schedule_access(m, now());
            return;
        }
        if (m.job->kind == JobKind::Sds) report_drop(m.job->u, cause);
        complete_job(m);
    }

    // -- uplink ------------------------------------------------------------

    void on_access_tx(const proto::Ev& e) {
        Ms& m = ms(e.who);
        if (!m.job || m.job->serial != e.b || m.phase != Phase::AwaitOpp) return;
        std::int64_t slot = e.a;
        std::int64_t frame = slot / kSlotsPerFrame;
        if (reserved_.count(frame)) {
            // the BS granted this slot to someone after we picked it; slide
            schedule_access(m, TickClock::frame_start(frame + 1));
            return;
        }
        ++m.job->attempts;
        ++stats_.access_bursts;
        m.phase = Phase::AwaitGrant;
        if (on_uplink_tx) on_uplink_tx(TickClock::slot_start(slot), m.id, true);
        emit_trace("ACCESS", m.id);
        std::int64_t sub = (prm_.access_subslots > 1)
            ? static_cast<std::int64_t>(
                  m.rng_retry.uniform_below(static_cast<std::uint32_t>(prm_.access_subslots)))
            : 0;
        std::int64_t key = slot * prm_.access_subslots + sub;
        auto& list = slot_bursts_[key];
        list.push_back({m.id, m.job->serial});
        if (list.size() == 1) {
            eng_->schedule(now(), -1, proto::Ev{proto::EvKind::TmoArbitrate, -1, key, 0, 0});
        }
        m.h_grant_to = eng_->schedule(
            now() + static_cast<Ticks>(prm_.wt) * kTicksPerFrame, m.id,
            proto::Ev{proto::EvKind::TmoGrantTimeout, m.id, 0, m.job->serial,
                      m.job->attempts});
    }

    void on_arbitrate(const proto::Ev& e) {
        auto it = slot_bursts_.find(e.a);
        if (it == slot_bursts_.end()) return;
        auto txs = std::move(it->second);
        slot_bursts_.erase(it);
        if (txs.size() >= 2) {
            stats_.collision_bursts += txs.size();
            ++stats_.collision_slots;
            return;  // everyone times out and retries
        }
        auto [id, serial] = txs.front();
        Ms& m = ms(id);
        if (prm_.alpha_ch > 0.0 && m.rng_chan.bernoulli(prm_.alpha_ch)) {
            ++stats_.burst_channel_failures;
            return;
        }
        if (!m.job || m.job->serial != serial) return;  // preempted at this very tick
        // MAC-ACCESS decoded; voice setup needs nothing beyond the response,
        // an SDS gets reserved slots for its fragments
        if (m.job->kind == JobKind::Voice) {
            dl_push(DlPdu{DlKind::GrantComplete, m.id, m.job->serial, 0, {}});
        } else {
            dl_push(DlPdu{DlKind::GrantReserve, m.id, m.job->serial, m.job->frags, {}});
        }
    }

    void on_grant_timeout(const proto::Ev& e) {
        Ms& m = ms(e.who);
        if (!m.job || m.job->serial != e.b || m.phase != Phase::AwaitGrant) return;
        if (m.job->attempts != e.c) return;  // stale timer from an earlier attempt
        if (m.job->attempts >= prm_.nu) {
            procedure_failed(m, DropCause::AccessFail);
            return;
        }
        std::int64_t slot = draw_retry_access_slot(now(), m.rng_retry);
        m.phase = Phase::AwaitOpp;
        m.h_tx = eng_->schedule(TickClock::slot_end(slot), m.id,
                                proto::Ev{proto::EvKind::TmoAccessTx, m.id, slot,
                                          m.job->serial, 0});
    }

    void on_frag_tx(const proto::Ev& e) {
        Ms& m = ms(e.who);
        if (!m.job || m.job->serial != e.b || m.phase != Phase::Reserved) return;
        ++stats_.frag_bursts;
        if (on_uplink_tx) on_uplink_tx(TickClock::slot_start(e.a), m.id, false);
        emit_trace("FRAG", m.id);
        auto rec = rx_.find(e.b);
        if (rec == rx_.end()) throw std::logic_error("fragment without BS record");
        if (prm_.alpha_ch > 0.0 && m.rng_chan.bernoulli(prm_.alpha_ch)) rec->second.error = true;
        ++rec->second.received;
        ++m.job->frags_tx;
        if (m.job->frags_tx == static_cast<int>(m.job->frag_slots.size())) {
            m.phase = Phase::AwaitAck;
            m.h_ack_to = eng_->schedule(
                now() + static_cast<Ticks>(prm_.ack_timeout_frames) * kTicksPerFrame, m.id,
                proto::Ev{proto::EvKind::TmoAckTimeout, m.id, 0, m.job->serial, m.job->retx});
            bool clean = !rec->second.error;
            rx_.erase(rec);
            if (clean) dl_push(DlPdu{DlKind::Ack, m.id, m.job->serial, 0, {}});
        }
    }

    void on_ack_timeout(const proto::Ev& e) {
        Ms& m = ms(e.who);
        if (!m.job || m.job->serial != e.b || m.phase != Phase::AwaitAck) return;
        if (m.job->retx != e.c) return;
        procedure_failed(m, DropCause::Channel);
    }

    // -- downlink -----------------------------------------------------------

    void dl_push(DlPdu pdu) {
        dl_queue_.push_back(std::move(pdu));
        if (dl_queue_.size() == 1) schedule_dl_tx();
    }

    void schedule_dl_tx() {
        std::int64_t f = std::max(TickClock::frame_of(now()) + 1, next_dl_frame_);
        next_dl_frame_ = f + 1;
        eng_->schedule(TickClock::slot_end(f * kSlotsPerFrame), -1,
                       proto::Ev{proto::EvKind::TmoDownlinkTx, -1, 0, 0, 0});
    }

    void on_downlink_tx() {
        if (dl_queue_.empty()) throw std::logic_error("downlink tx with empty queue");
        DlPdu pdu = std::move(dl_queue_.front());
        dl_queue_.pop_front();
        ++stats_.dl_bursts;
        bool lost = prm_.alpha_ch > 0.0 && rng_dl_.bernoulli(prm_.alpha_ch);
        if (lost) {
            ++stats_.dl_failures;
            if (pdu.kind == DlKind::Feedback) dl_queue_.push_back(std::move(pdu));
            // lost grants/ACKs are recovered by the MS timers
        } else {
            deliver_dl(pdu);
        }
        if (!dl_queue_.empty()) schedule_dl_tx();
    }

    void deliver_dl(const DlPdu& pdu) {
        switch (pdu.kind) {
            case DlKind::GrantComplete: {
                Ms& m = ms(pdu.target);
                if (!m.job || m.job->serial != pdu.serial || m.phase != Phase::AwaitGrant) return;
                emit_trace("RESOURCE", m.id);
                ++stats_.voice_established;
                if (on_voice_established) on_voice_established(m.id);
                complete_job(m);
                break;
            }
            case DlKind::GrantReserve: {
                Ms& m = ms(pdu.target);
                if (!m.job || m.job->serial != pdu.serial || m.phase != Phase::AwaitGrant) return;
                emit_trace("RESOURCE", m.id);
                eng_->cancel(m.h_grant_to);
                m.job->frag_slots = allocate_reserved(m.id, pdu.nslots);
                m.job->frags_tx = 0;
                m.phase = Phase::Reserved;
                rx_[m.job->serial] = RxRecord{m.id, pdu.nslots};
                m.h_frags.clear();
                for (int i = 0; i < pdu.nslots; ++i) {
                    std::int64_t slot = m.job->frag_slots[i];
                    m.h_frags.push_back(eng_->schedule(
                        TickClock::slot_end(slot), m.id,
                        proto::Ev{proto::EvKind::TmoFragTx, m.id, slot, m.job->serial, i}));
                }
                break;
            }
            case DlKind::Ack: {
                Ms& m = ms(pdu.target);
                if (!m.job || m.job->serial != pdu.serial || m.phase != Phase::AwaitAck) return;
                emit_trace("ACK", m.id);
                ++stats_.procedures_ok;
                if (on_uplink_delivered) on_uplink_delivered(m.job->u, now());
                complete_job(m);
                break;
            }
            case DlKind::Feedback:
                if (on_downlink_delivered) on_downlink_delivered(pdu.target, pdu.u, now());
                break;
        }
    }

    /// Reserve the next n free non-control MCCH slots, starting the frame
    /// after the grant. Reservations never overlap between MSs.
    std::vector<std::int64_t> allocate_reserved(EntityId id, int n) {
        while (!reserved_.empty() && reserved_.begin()->first < TickClock::frame_of(now()))
            reserved_.erase(reserved_.begin());
        std::vector<std::int64_t> slots;
        std::int64_t f = TickClock::frame_of(now()) + 1;
        while (static_cast<int>(slots.size()) < n) {
            if (!TickClock::is_control_frame(f) && !reserved_.count(f)) {
                reserved_[f] = id;
                slots.push_back(f * kSlotsPerFrame);
            }
            ++f;
        }
        return slots;
    }

    proto::Engine* eng_;
    TmoParams prm_;
    TickClock clk_;
    RngStream rng_dl_;
    std::map<EntityId, Ms> ms_;
    std::map<std::int64_t, std::vector<std::pair<EntityId, std::int64_t>>> slot_bursts_;
    std::map<std::int64_t, EntityId> reserved_;   // frame -> ms
    std::map<std::int64_t, RxRecord> rx_;         // serial -> fragment record
    std::deque<DlPdu> dl_queue_;
    std::int64_t next_dl_frame_ = 0;
    std::int64_t serial_seq_ = 1;
    TmoStats stats_;
};

} // namespace tetrasim::tmo
