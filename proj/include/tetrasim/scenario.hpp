#pragma once

// Builds the two evaluation topologies and runs them to a horizon.
//
// TMO: N_C background MSs (Poisson SDS + voice setups) and N_F first
// responders contend on one MCCH; completed uplink updates reach the remote
// agent through the BS. DMO: the first responders transmit over a shared
// direct-mode channel to a DM-gateway, which relays them over its own TMO
// uplink; remote-agent feedback travels BS -> gateway -> DMO -> FR.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tetrasim/dmo.hpp"
#include "tetrasim/event.hpp"
#include "tetrasim/metrics.hpp"
#include "tetrasim/rng.hpp"
#include "tetrasim/time.hpp"
#include "tetrasim/tmo.hpp"
#include "tetrasim/types.hpp"

namespace tetrasim::scenario {

/// Configuration error; the message starts with the offending key path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Mode : std::uint8_t { Tmo, Dmo };

struct ScenarioConfig {
    Mode mode = Mode::Tmo;
    int n_c = 500;                        // background MS count (Table defaults)
    int n_f = 10;                         // first responders
    double lambda_f = 0.1;                // msg/s per first responder
    double lambda_c = 10.0 / 3600.0;      // msg/s per background MS
    double lambda_voice = 3.0 / 3600.0;   // calls/s per background MS
    double call_dur_lo = 20.0, call_dur_hi = 40.0;
    double feedback_rate = -1.0;          // aggregate msg/s; < 0 derives n_f / 60
    int setting = 0;                      // 1..3, DMO only
    std::optional<Discipline> fr_discipline;
    std::optional<Discipline> gw_discipline;
    Discipline bg_discipline = Discipline::Fcfs;
    double alpha_ch = 0.1;
    double alpha_ch_dmo = 0.1;
    double frame_dur_ms = kDefaultFrameDurMs;
    int n_fragments = 1;
    int wt = 4, nu = 5, sds_retx_limit = 3, ack_timeout_frames = 4;
    bool access_randomize = true;
    int access_subslots = 2;
    int dsb_frames = 2, dt316 = 2, dn316 = 3, dmo_retry_window = 4;
    int dmo_channels = 1;
    std::uint64_t seed = 1;
    double horizon_s = 3600.0;
    double warmup_s = 60.0;

    void validate() const {
        if (n_c < 0) throw ConfigError("n_c: must be >= 0");
        if (n_f < 1) throw ConfigError("n_f: must be >= 1");
        if (!(lambda_f > 0.0)) throw ConfigError("lambda_f: must be > 0");
        if (lambda_c < 0.0) throw ConfigError("lambda_c: must be >= 0");
        if (lambda_voice < 0.0) throw ConfigError("lambda_voice: must be >= 0");
        if (!(call_dur_lo >= 0.0 && call_dur_hi >= call_dur_lo))
            throw ConfigError("call_dur: need 0 <= lo <= hi");
        if (mode == Mode::Tmo && setting != 0)
            throw ConfigError("setting: only valid when mode = dmo");
        if (mode == Mode::Dmo && (resolved_setting() < 1 || resolved_setting() > 3))
            throw ConfigError("setting: must be 1, 2 or 3");
        if (!(alpha_ch >= 0.0 && alpha_ch <= 1.0)) throw ConfigError("alpha_ch: must be in [0,1]");
        if (!(alpha_ch_dmo >= 0.0 && alpha_ch_dmo <= 1.0))
            throw ConfigError("alpha_ch_dmo: must be in [0,1]");
        if (!(frame_dur_ms > 0.0)) throw ConfigError("frame_dur_ms: must be > 0");
        if (n_fragments < 1) throw ConfigError("n_fragments: must be >= 1");
        if (dmo_channels < 1) throw ConfigError("dmo_channels: must be >= 1");
        if (!(horizon_s > 0.0)) throw ConfigError("horizon: must be > 0");
        if (!(warmup_s >= 0.0 && warmup_s < horizon_s))
            throw ConfigError("warmup: must be in [0, horizon)");
        if (fr_discipline && *fr_discipline == Discipline::Replace2)
            throw ConfigError("fr_discipline: replace2 applies to the gateway only");
        if (gw_discipline && *gw_discipline != Discipline::Fcfs &&
            *gw_discipline != Discipline::Replace2)
            throw ConfigError("gw_discipline: must be fcfs or replace2");
        try {
            tmo_params().validate();
            dmo_params().validate();
        } catch (const ParamError& e) {
            throw ConfigError(e.what());
        }
    }

    int resolved_setting() const { return (mode == Mode::Dmo && setting == 0) ? 1 : setting; }

    double resolved_feedback_rate() const {
        return feedback_rate < 0.0 ? static_cast<double>(n_f) / 60.0 : feedback_rate;
    }

    /// Per-setting disciplines; the standard FCFS buffer is the TMO default.
    Discipline resolved_fr_discipline() const {
        if (fr_discipline) return *fr_discipline;
        if (mode == Mode::Tmo) return Discipline::Fcfs;
        return resolved_setting() == 2 ? Discipline::Fcfs : Discipline::Prrt;
    }

    Discipline resolved_gw_discipline() const {
        if (gw_discipline) return *gw_discipline;
        return resolved_setting() == 3 ? Discipline::Replace2 : Discipline::Fcfs;
    }

    tmo::TmoParams tmo_params() const {
        tmo::TmoParams p;
        p.wt = wt;
        p.nu = nu;
        p.sds_retx_limit = sds_retx_limit;
        p.ack_timeout_frames = ack_timeout_frames;
        p.alpha_ch = alpha_ch;
        p.access_randomize = access_randomize;
        p.access_subslots = access_subslots;
        return p;
    }

    dmo::DmoParams dmo_params() const {
        dmo::DmoParams p;
        p.dsb_frames = dsb_frames;
        p.dt316_frames = dt316;
        p.dn316 = dn316;
        p.retry_window = dmo_retry_window;
        p.alpha_ch_dmo = alpha_ch_dmo;
        return p;
    }
};

// entity id layout
inline constexpr EntityId kBsId = 0;
inline constexpr EntityId kAgentId = 1;
inline constexpr EntityId kGatewayTmoId = 2;
inline constexpr EntityId kGatewayDmoTxBase = 3;  // one per DMO channel
inline constexpr EntityId kMsBase = 10;

class ScenarioSim {
public:
    explicit ScenarioSim(const ScenarioConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        clk_.frame_dur_ms = cfg_.frame_dur_ms;
        build();
    }

    /// Total user terminals: N_C + N_F + remote agent (+ gateway in DMO).
    int entity_count() const {
        return cfg_.n_c + cfg_.n_f + 1 + (cfg_.mode == Mode::Dmo ? 1 : 0);
    }

    void set_trace(std::ostream* os) {
        trace_ = os;
        wire_trace();
    }

    metrics::RunResult run(std::uint64_t max_events = UINT64_MAX) {
        const Ticks horizon = clk_.from_seconds_ceil(cfg_.horizon_s);
        eng_.schedule(horizon, -1, proto::Ev{proto::EvKind::Horizon, -1, 0, 0, 0});
        auto stats = eng_.run_until([&] { return horizon_hit_; },
                                    [&](const proto::Engine::Event& ev) { dispatch(ev); },
                                    max_events);

        metrics::RunResult res;
        res.events = stats.events_processed;
        res.truncated = (stats.reason == des::StopReason::Budget);
        res.paoi = metrics::summarize(uplink_.samples());
        for (const auto& [src, v] : uplink_.per_source())
            res.per_source[src] = metrics::summarize(v);
        res.downlink_paoi = metrics::summarize(downlink_.samples());
        res.generated = fr_generated_;
        res.delivered = fr_delivered_;
        res.drops = fr_drops_;
        res.in_flight = fr_generated_ - fr_delivered_ - fr_drops_.total();
        res.stale = uplink_.stale_count() + downlink_.stale_count();
        res.mean_service_s = span_count_ ? span_sum_ / static_cast<double>(span_count_) : 0.0;
        res.collision_rate_tmo = cell_->stats().collision_rate();
        res.emergent_alpha_tmo = cell_->stats().emergent_alpha();
        if (!links_.empty()) {
            dmo::DmoStats merged;
            for (auto& l : links_) {
                merged.starts += l->stats().starts;
                merged.collision_bursts += l->stats().collision_bursts;
                merged.collision_events += l->stats().collision_events;
                merged.rounds_ok += l->stats().rounds_ok;
                merged.rounds_failed += l->stats().rounds_failed;
            }
            res.collision_rate_dmo = merged.collision_rate();
            res.emergent_alpha_dmo = merged.emergent_alpha();
        }
        audit_in_flight(res.in_flight);
        return res;
    }

    const tmo::TmoStats& tmo_stats() const { return cell_->stats(); }
    Discipline fr_discipline() const { return cfg_.resolved_fr_discipline(); }
    Discipline gw_discipline() const { return cfg_.resolved_gw_discipline(); }
    std::uint64_t feedback_generated() const { return fb_generated_; }
    std::uint64_t feedback_delivered() const { return fb_delivered_; }
    std::uint64_t background_generated() const { return bg_generated_; }
    std::uint64_t background_delivered() const { return bg_delivered_; }
    std::uint64_t voice_calls() const { return voice_calls_; }

private:
    void build() {
        cell_ = std::make_unique<tmo::TmoCell>(eng_, cfg_.tmo_params(), clk_, cfg_.seed);
        cell_->on_uplink_delivered = [&](const Update& u, Ticks t) { uplink_delivered(u, t); };
        cell_->on_update_dropped = [&](const Update& u, tmo::DropCause c) { dropped(u, c); };
        cell_->on_downlink_delivered = [&](EntityId target, const Update& u, Ticks t) {
            downlink_delivered(target, u, t);
        };
        cell_->on_voice_established = [&](EntityId ms) { voice_established(ms); };

        const bool dmo_mode = (cfg_.mode == Mode::Dmo);
        if (dmo_mode) {
            cell_->add_ms(kGatewayTmoId, tmo::MsRole::Gateway, cfg_.resolved_gw_discipline(),
                          cfg_.seed);
            for (int ch = 0; ch < cfg_.dmo_channels; ++ch) {
                auto link = std::make_unique<dmo::DmoLink>(eng_, cfg_.dmo_params());
                link->on_gateway_received = [&](const Update& u, Ticks) {
                    cell_->on_update_arrival(kGatewayTmoId, u);
                };
                link->on_fr_received = [&](EntityId fr, const Update& u, Ticks t) {
                    feedback_arrived_at_fr(fr, u, t);
                };
                link->on_update_dropped = [&](const Update& u, tmo::DropCause c) {
                    dropped(u, c);
                };
                link->add_station(kGatewayDmoTxBase + ch, Discipline::Fcfs, false, cfg_.seed);
                links_.push_back(std::move(link));
            }
        }

        // first responders
        for (int i = 0; i < cfg_.n_f; ++i) {
            EntityId id = kMsBase + i;
            if (dmo_mode) {
                fr_link(id).add_station(id, cfg_.resolved_fr_discipline(), true, cfg_.seed);
            } else {
                cell_->add_ms(id, tmo::MsRole::FirstResponder, cfg_.resolved_fr_discipline(),
                              cfg_.seed);
            }
            auto& st = streams_[id];
            st.arrival = RngStream(cfg_.seed, sid(id, 0));
            st.cursor = 0.0;
            schedule_arrival(id, proto::EvKind::FrArrival, cfg_.lambda_f);
        }

        // background MSs live in the TMO cell in both modes
        for (int i = 0; i < cfg_.n_c; ++i) {
            EntityId id = kMsBase + cfg_.n_f + i;
            cell_->add_ms(id, tmo::MsRole::Background, cfg_.bg_discipline, cfg_.seed);
            auto& st = streams_[id];
            st.arrival = RngStream(cfg_.seed, sid(id, 0));
            st.voice = RngStream(cfg_.seed, sid(id, 3));
            st.call_dur = RngStream(cfg_.seed, sid(id, 4));
            if (cfg_.lambda_c > 0.0) schedule_arrival(id, proto::EvKind::BgArrival, cfg_.lambda_c);
            if (cfg_.lambda_voice > 0.0)
                schedule_voice(id);
        }

        // remote-agent feedback
        fb_rng_ = RngStream(cfg_.seed, sid(kAgentId, 0));
        fb_target_rng_ = RngStream(cfg_.seed, sid(kAgentId, 1));
        if (cfg_.resolved_feedback_rate() > 0.0) {
            fb_cursor_ += exp_sample(fb_rng_, cfg_.resolved_feedback_rate());
            eng_.schedule(clk_.from_seconds_ceil(fb_cursor_), kAgentId,
                          proto::Ev{proto::EvKind::FeedbackArrival, kAgentId, 0, 0, 0});
        }
    }

    static std::uint64_t sid(EntityId id, int purpose) {
        return static_cast<std::uint64_t>(id) * 8 + static_cast<std::uint64_t>(purpose);
    }

    dmo::DmoLink& fr_link(EntityId fr) {
        return *links_[static_cast<std::size_t>(fr - kMsBase) % links_.size()];
    }

    void wire_trace() {
        auto sink = [this](Ticks t, const char* kind, EntityId who) {
            if (trace_) {
                (*trace_) << clk_.to_seconds(t) << ' ' << who << ' ' << kind << '\n';
            }
        };
        cell_->trace = sink;
        for (auto& l : links_) l->trace = sink;
    }

    struct Streams {
        RngStream arrival, voice, call_dur;
        double cursor = 0.0;
        double voice_cursor = 0.0;
    };

    void schedule_arrival(EntityId id, proto::EvKind kind, double rate) {
        auto& st = streams_[id];
        st.cursor += exp_sample(st.arrival, rate);
        eng_.schedule(clk_.from_seconds_ceil(st.cursor), id, proto::Ev{kind, id, 0, 0, 0});
    }

    void schedule_voice(EntityId id) {
        auto& st = streams_[id];
        st.voice_cursor += exp_sample(st.voice, cfg_.lambda_voice);
        eng_.schedule(clk_.from_seconds_ceil(st.voice_cursor), id,
                      proto::Ev{proto::EvKind::VoiceArrival, id, 0, 0, 0});
    }

    void dispatch(const proto::Engine::Event& ev) {
        switch (ev.payload.kind) {
            case proto::EvKind::FrArrival: {
                EntityId id = ev.payload.who;
                Update u;
                u.source_id = id;
                u.gen_time = clk_.to_seconds(eng_.now());
                u.n_fragments = cfg_.n_fragments;
                u.uid = next_uid_++;
                ++fr_generated_;
                status_[u.uid] = Status::InFlight;
                if (cfg_.mode == Mode::Dmo) {
                    fr_link(id).on_update_arrival(id, u, kGatewayTmoId);
                } else {
                    cell_->on_update_arrival(id, u);
                }
                schedule_arrival(id, proto::EvKind::FrArrival, cfg_.lambda_f);
                break;
            }
            case proto::EvKind::BgArrival: {
                EntityId id = ev.payload.who;
                Update u;
                u.source_id = id;
                u.gen_time = clk_.to_seconds(eng_.now());
                u.n_fragments = cfg_.n_fragments;
                ++bg_generated_;
                cell_->on_update_arrival(id, u);
                schedule_arrival(id, proto::EvKind::BgArrival, cfg_.lambda_c);
                break;
            }
            case proto::EvKind::VoiceArrival: {
                cell_->on_voice_arrival(ev.payload.who);
                schedule_voice(ev.payload.who);
                break;
            }
            case proto::EvKind::FeedbackArrival: {
                EntityId target = kMsBase + static_cast<EntityId>(
                    fb_target_rng_.uniform_below(static_cast<std::uint32_t>(cfg_.n_f)));
                Update u;
                u.source_id = target;  // keyed by the destination FR
                u.gen_time = clk_.to_seconds(eng_.now());
                u.kind = UpdateKind::DownlinkFeedback;
                ++fb_generated_;
                if (cfg_.mode == Mode::Dmo) {
                    cell_->enqueue_feedback(kGatewayTmoId, u);
                } else {
                    cell_->enqueue_feedback(target, u);
                }
                fb_cursor_ += exp_sample(fb_rng_, cfg_.resolved_feedback_rate());
                eng_.schedule(clk_.from_seconds_ceil(fb_cursor_), kAgentId,
                              proto::Ev{proto::EvKind::FeedbackArrival, kAgentId, 0, 0, 0});
                break;
            }
            case proto::EvKind::CallEnd:
                --active_calls_;
                break;
            case proto::EvKind::Horizon:
                horizon_hit_ = true;
                break;
            default: {
                if (cell_->handle(ev)) return;
                for (auto& l : links_) {
                    if (l->handle(ev)) return;
                }
                throw std::logic_error("unhandled event kind");
            }
        }
    }

    void maybe_end_warmup(Ticks t) {
        if (!warmup_done_ && clk_.to_seconds(t) >= cfg_.warmup_s) {
            uplink_.discard_samples();
            downlink_.discard_samples();
            span_sum_ = 0.0;
            span_count_ = 0;
            warmup_done_ = true;
        }
    }

    void uplink_delivered(const Update& u, Ticks t) {
        if (u.uid < 0) {
            ++bg_delivered_;
            return;
        }
        maybe_end_warmup(t);
        auto it = status_.find(u.uid);
        if (it == status_.end() || it->second != Status::InFlight) return;
        it->second = Status::Delivered;
        ++fr_delivered_;
        double now_s = clk_.to_seconds(t);
        uplink_.record_delivery(u.source_id, u.gen_time, now_s, now_s - u.gen_time);
        span_sum_ += now_s - u.gen_time;
        ++span_count_;
    }

    void dropped(const Update& u, tmo::DropCause c) {
        if (u.kind == UpdateKind::DownlinkFeedback) {
            ++fb_dropped_;
            return;
        }
        if (u.uid < 0) {
            ++bg_dropped_;
            return;
        }
        auto it = status_.find(u.uid);
        if (it == status_.end() || it->second != Status::InFlight) return;
        it->second = Status::Dropped;
        switch (c) {
            case tmo::DropCause::Channel: ++fr_drops_.channel; break;
            case tmo::DropCause::Preempt: ++fr_drops_.preempt; break;
            case tmo::DropCause::Replace: ++fr_drops_.replace; break;
            case tmo::DropCause::Busy: ++fr_drops_.busy; break;
            case tmo::DropCause::AccessFail: ++fr_drops_.access_fail; break;
        }
    }

    /// TMO mode: feedback PDU landed at the FR. DMO mode: it landed at the
    /// gateway, which relays it over the direct channel.
    void downlink_delivered(EntityId target, const Update& u, Ticks t) {
        if (cfg_.mode == Mode::Dmo && target == kGatewayTmoId) {
            fr_link(u.source_id).on_update_arrival(
                kGatewayDmoTxBase +
                    static_cast<EntityId>((u.source_id - kMsBase) % links_.size()),
                u, u.source_id);
            return;
        }
        feedback_arrived_at_fr(target, u, t);
    }

    void feedback_arrived_at_fr(EntityId fr, const Update& u, Ticks t) {
        maybe_end_warmup(t);
        ++fb_delivered_;
        double now_s = clk_.to_seconds(t);
        downlink_.record_delivery(fr, u.gen_time, now_s, now_s - u.gen_time);
    }

    void voice_established(EntityId ms) {
        ++voice_calls_;
        ++active_calls_;
        auto& st = streams_[ms];
        double dur = cfg_.call_dur_lo +
                     st.call_dur.uniform01() * (cfg_.call_dur_hi - cfg_.call_dur_lo);
        eng_.schedule(eng_.now() + clk_.from_seconds_ceil(dur), ms,
                      proto::Ev{proto::EvKind::CallEnd, ms, 0, 0, 0});
    }

    /// Independent count of updates still held in buffers; must equal the
    /// counter-derived in-flight number.
    void audit_in_flight(std::uint64_t expected) const {
        std::set<std::int64_t> seen;
        auto collect = [&](const Update& u) {
            if (u.uid < 0 || u.kind != UpdateKind::UplinkStatus) return;
            auto it = status_.find(u.uid);
            if (it != status_.end() && it->second == Status::InFlight) seen.insert(u.uid);
        };
        cell_->for_each_held_update(collect);
        for (const auto& l : links_) l->for_each_held_update(collect);
        if (seen.size() != expected) {
            throw std::logic_error("in-flight audit mismatch: scanned " +
                                   std::to_string(seen.size()) + " vs derived " +
                                   std::to_string(expected));
        }
    }

    enum class Status : std::uint8_t { InFlight, Delivered, Dropped };

    ScenarioConfig cfg_;
    TickClock clk_;
    proto::Engine eng_;
    std::unique_ptr<tmo::TmoCell> cell_;
    std::vector<std::unique_ptr<dmo::DmoLink>> links_;
    std::map<EntityId, Streams> streams_;
    RngStream fb_rng_, fb_target_rng_;
    double fb_cursor_ = 0.0;
    std::ostream* trace_ = nullptr;

    metrics::AoiTracker uplink_, downlink_;
    std::map<std::int64_t, Status> status_;
    std::int64_t next_uid_ = 0;
    std::uint64_t fr_generated_ = 0, fr_delivered_ = 0;
    metrics::LossCounters fr_drops_;
    std::uint64_t bg_generated_ = 0, bg_delivered_ = 0, bg_dropped_ = 0;
    std::uint64_t fb_generated_ = 0, fb_delivered_ = 0, fb_dropped_ = 0;
    std::uint64_t voice_calls_ = 0;
    std::int64_t active_calls_ = 0;
    double span_sum_ = 0.0;
    std::uint64_t span_count_ = 0;
    bool warmup_done_ = false;
    bool horizon_hit_ = false;
};

} // namespace tetrasim::scenario
