#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>

#include "tetrasim/des.hpp"
#include "tetrasim/metrics.hpp"
#include "tetrasim/rng.hpp"
#include "tetrasim/types.hpp"

namespace tetrasim::abstract_queue {

/// Single-server buffer state under one packet-management discipline.
/// Buffer capacity: 1 for NPR/PR/PR-RT (the in-service update only),
/// 2 for REPLACE2 (in service + one waiting), unbounded for FCFS.
struct QueueState {
    struct Serving {
        Update update;
        double service_start = 0.0;
        double service_end_time = 0.0;
        int attempts = 1;
    };

    std::optional<Serving> serving;
    std::deque<Update> waiting;
    metrics::LossCounters drops;
    std::uint64_t arrivals = 0;
    std::uint64_t deliveries = 0;

    std::uint64_t in_system() const { return (serving ? 1 : 0) + waiting.size(); }
};

enum class ArrivalOutcome : std::uint8_t {
    StartedService,    // server was idle
    Enqueued,          // FCFS, or REPLACE2 with a free waiting slot
    ReplacedWaiting,   // REPLACE2 swap
    PreemptedServer,   // PR / PR-RT stealing
    DroppedBusy        // NPR discard
};

/// Apply one arrival. When the result is StartedService or PreemptedServer
/// the caller must (re)schedule the service completion; on PreemptedServer it
/// must also cancel the completion of the update that was in service.
inline ArrivalOutcome step_arrival(QueueState& q, const Update& u, Discipline d) {
    ++q.arrivals;
    if (!q.serving) {
        q.serving = QueueState::Serving{u, u.gen_time, 0.0, 1};
        return ArrivalOutcome::StartedService;
    }
    switch (d) {
        case Discipline::Pr:
        case Discipline::Prrt:
            ++q.drops.preempt;
            q.serving = QueueState::Serving{u, u.gen_time, 0.0, 1};
            return ArrivalOutcome::PreemptedServer;
        case Discipline::Npr:
            ++q.drops.busy;
            return ArrivalOutcome::DroppedBusy;
        case Discipline::Fcfs:
            q.waiting.push_back(u);
            return ArrivalOutcome::Enqueued;
        case Discipline::Replace2:
            if (q.waiting.empty()) {
                q.waiting.push_back(u);
                return ArrivalOutcome::Enqueued;
            }
            ++q.drops.replace;
            q.waiting.back() = u;
            return ArrivalOutcome::ReplacedWaiting;
    }
    throw std::logic_error("unreachable discipline");
}

struct ServiceEndAction {
    std::optional<Update> delivery;   // emitted with probability 1 - alpha
    double delivered_span = 0.0;      // now - gen_time of the delivered update
    bool restart_same = false;        // PR-RT retransmission of the same update
    bool start_next = false;          // an update was admitted from the waiting room
};

/// Resolve a service completion at time `now`. The caller schedules the next
/// completion when restart_same or start_next is set.
inline ServiceEndAction step_service_end(QueueState& q, RngStream& rng, double alpha,
                                         Discipline d, double now) {
    if (!q.serving) throw std::logic_error("step_service_end called while idle");
    ServiceEndAction act;
    bool failed = alpha > 0.0 && rng.bernoulli(alpha);
    if (failed && d == Discipline::Prrt) {
        ++q.serving->attempts;
        act.restart_same = true;
        return act;
    }
    if (failed) {
        ++q.drops.channel;
    } else {
        ++q.deliveries;
        act.delivery = q.serving->update;
        act.delivered_span = now - q.serving->update.gen_time;
        // single-buffer disciplines serve an update from the instant it arrives
        if (d == Discipline::Pr || d == Discipline::Prrt || d == Discipline::Npr) {
            if (q.serving->service_start != q.serving->update.gen_time)
                throw std::logic_error("service did not start at generation");
        }
    }
    q.serving.reset();
    if (!q.waiting.empty()) {
        Update next = q.waiting.front();
        q.waiting.pop_front();
        q.serving = QueueState::Serving{next, now, 0.0, 1};
        act.start_next = true;
    }
    return act;
}

struct SimOptions {
    std::uint64_t n_deliveries = 1'000'000;
    std::uint64_t seed = 1;
    std::uint64_t max_events = 0;   // 0: derived from n_deliveries
    int n_batches = 30;
};

/// Event-driven Monte-Carlo run of the abstract model: Poisson arrivals,
/// deterministic service mu, i.i.d. failure alpha. Runs until n_deliveries
/// successes (the first max(100, 1%) are warm-up and excluded from the
/// statistics) or until the event budget trips, which flags truncation.
inline metrics::RunResult simulate_abstract(const ModelParams& p, const SimOptions& opt) {
    p.validate();
    if (opt.n_deliveries < 1) throw ParamError("n_deliveries must be >= 1");

    enum class Kind : std::uint8_t { Arrival, ServiceEnd };
    struct Payload {
        Kind kind;
    };
    using Eng = des::Engine<double, Payload>;

    Eng eng;
    QueueState q;
    metrics::AoiTracker tracker;
    RngStream arrivals_rng(opt.seed, 0);
    RngStream failures_rng(opt.seed, 1);

    const std::uint64_t warmup =
        std::max<std::uint64_t>(100, opt.n_deliveries / 100);
    std::uint64_t max_events = opt.max_events
        ? opt.max_events
        : std::max<std::uint64_t>(10'000'000, 400 * opt.n_deliveries);

    double sum_span = 0.0;
    std::uint64_t span_count = 0;
    bool warmup_done = false;
    des::Handle service_handle{};

    auto schedule_service_end = [&](double at) {
        q.serving->service_end_time = at;
        service_handle = eng.schedule(at, 0, Payload{Kind::ServiceEnd});
    };

    eng.schedule(exp_sample(arrivals_rng, p.lambda_f), 0, Payload{Kind::Arrival});

    auto dispatch = [&](const Eng::Event& ev) {
        double now = ev.time;
        switch (ev.payload.kind) {
            case Kind::Arrival: {
                Update u;
                u.source_id = 0;
                u.gen_time = now;
                auto outcome = step_arrival(q, u, p.discipline);
                if (outcome == ArrivalOutcome::PreemptedServer) eng.cancel(service_handle);
                if (outcome == ArrivalOutcome::StartedService ||
                    outcome == ArrivalOutcome::PreemptedServer) {
                    schedule_service_end(now + p.mu);
                }
                eng.schedule(now + exp_sample(arrivals_rng, p.lambda_f), 0,
                             Payload{Kind::Arrival});
                break;
            }
            case Kind::ServiceEnd: {
                auto act = step_service_end(q, failures_rng, p.alpha, p.discipline, now);
                if (act.restart_same || act.start_next) schedule_service_end(now + p.mu);
                if (act.delivery) {
                    tracker.record_delivery(act.delivery->source_id, act.delivery->gen_time,
                                            now, act.delivered_span);
                    if (!warmup_done && q.deliveries >= warmup) {
                        tracker.discard_samples();
                        warmup_done = true;
                    }
                    if (warmup_done) {
                        sum_span += act.delivered_span;
                        ++span_count;
                    }
                }
                break;
            }
        }
    };

    metrics::RunResult res;
    auto stats = eng.run_until([&] { return q.deliveries >= opt.n_deliveries; }, dispatch,
                               max_events);
    res.truncated = (stats.reason == des::StopReason::Budget);
    res.events = stats.events_processed;

    res.paoi = metrics::summarize(tracker.samples(), opt.n_batches);
    for (const auto& [src, v] : tracker.per_source())
        res.per_source[src] = metrics::summarize(v, opt.n_batches);
    res.generated = q.arrivals;
    res.delivered = q.deliveries;
    res.in_flight = q.in_system();
    res.drops = q.drops;
    res.stale = tracker.stale_count();
    res.mean_service_s = span_count ? sum_span / static_cast<double>(span_count) : 0.0;

    if (q.arrivals != q.deliveries + q.drops.total() + q.in_system()) {
        throw std::logic_error("abstract queue: conservation violated");
    }
    return res;
}

} // namespace tetrasim::abstract_queue
