#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace tetrasim::des {

class StarvationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cancellation handle. Index + generation so handles to recycled slots
/// become stale instead of cancelling an unrelated event.
struct Handle {
    std::uint32_t index = 0;
    std::uint32_t generation = 0;
};

enum class StopReason { Condition, Budget };

struct RunStats {
    std::uint64_t events_processed = 0;
    StopReason reason = StopReason::Condition;
};

/// Deterministic event scheduler. Events carry a POD payload and dequeue in
/// (time, seq) order; seq is assigned at scheduling time, so equal-time events
/// run FIFO. Cancellation is lazy: a cancelled slot is skipped on pop.
///
/// Time is either integer ticks (protocol runs) or double seconds (abstract
/// model runs); a single run uses exactly one domain.
template <class Time, class Payload>
class Engine {
public:
    using EntityIdT = std::int32_t;

    struct Event {
        Time time{};
        std::uint64_t seq = 0;
        EntityIdT target = -1;
        Payload payload{};
    };

    Time now() const { return now_; }
    std::size_t pending() const { return live_; }

    Handle schedule(Time time, EntityIdT target, const Payload& payload) {
        if (time < now_) throw std::logic_error("des: scheduling into the past");
        std::uint32_t idx;
        if (!free_.empty()) {
            idx = free_.back();
            free_.pop_back();
        } else {
            idx = static_cast<std::uint32_t>(slots_.size());
            slots_.push_back(Slot{});
        }
        Slot& s = slots_[idx];
        s.alive = true;
        s.time = time;
        s.target = target;
        s.payload = payload;
        heap_.push(HeapEntry{time, seq_++, idx, s.generation});
        ++live_;
        return Handle{idx, s.generation};
    }

    /// Idempotent: cancelling a fired or already-cancelled event is a no-op.
    void cancel(Handle h) {
        if (h.index >= slots_.size()) return;
        Slot& s = slots_[h.index];
        if (s.generation != h.generation || !s.alive) return;
        s.alive = false;
        --live_;
        // slot is recycled when its heap entry surfaces
    }

    /// Per-event debug hook, invoked before dispatch.
    std::function<void(const Event&)> on_event;

    /// Process events in order until stop() returns true (checked after each
    /// event) or the event budget is exhausted. Throws StarvationError if the
    /// queue drains with the condition still false.
    template <class Stop, class Dispatch>
    RunStats run_until(Stop&& stop, Dispatch&& dispatch,
                       std::uint64_t max_events = UINT64_MAX) {
        RunStats stats;
        if (stop()) return stats;
        for (;;) {
            Event ev;
            if (!pop_next(ev)) {
                throw StarvationError("des: event queue empty before stop condition");
            }
            now_ = ev.time;
            if (on_event) on_event(ev);
            dispatch(ev);
            ++stats.events_processed;
            if (stop()) {
                stats.reason = StopReason::Condition;
                return stats;
            }
            if (stats.events_processed >= max_events) {
                stats.reason = StopReason::Budget;
                return stats;
            }
        }
    }

private:
    struct Slot {
        Payload payload{};
        Time time{};
        EntityIdT target = -1;
        std::uint32_t generation = 0;
        bool alive = false;
    };

    struct HeapEntry {
        Time time;
        std::uint64_t seq;
        std::uint32_t index;
        std::uint32_t generation;
        bool operator>(const HeapEntry& o) const {
            if (time != o.time) return time > o.time;
            return seq > o.seq;
        }
    };

    bool pop_next(Event& out) {
        while (!heap_.empty()) {
            HeapEntry e = heap_.top();
            heap_.pop();
            Slot& s = slots_[e.index];
            bool current = (s.generation == e.generation);
            if (current) {
                ++s.generation;
                free_.push_back(e.index);
            }
            if (!current || !s.alive) continue;
            s.alive = false;
            --live_;
            out.time = e.time;
            out.seq = e.seq;
            out.target = s.target;
            out.payload = s.payload;
            return true;
        }
        return false;
    }

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> heap_;
    std::vector<Slot> slots_;
    std::vector<std::uint32_t> free_;
    std::uint64_t seq_ = 0;
    std::size_t live_ = 0;
    Time now_{};
};

} // namespace tetrasim::des
