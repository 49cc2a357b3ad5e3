#pragma once

#include <cstdint>

#include "tetrasim/rng.hpp"

namespace tetrasim {

/// Integer tick count. Protocol simulations run entirely on this domain so
/// event ordering never depends on float rounding; seconds are derived views.
using Ticks = std::int64_t;

inline constexpr int kSlotsPerFrame = 4;
inline constexpr int kFramesPerMultiframe = 18;
inline constexpr int kControlFrame = 17;      // 18th frame, signalling only
inline constexpr Ticks kTicksPerSlot = 64;    // sub-slot resolution for arrivals
inline constexpr Ticks kTicksPerFrame = kTicksPerSlot * kSlotsPerFrame;
inline constexpr double kDefaultFrameDurMs = 57.67;

/// TDMA time base: multiframe / frame / slot coordinates over a monotone
/// absolute slot counter.
struct SlotClock {
    std::int64_t abs_slot = 0;
    double frame_dur_ms = kDefaultFrameDurMs;

    std::int64_t frame() const { return abs_slot / kSlotsPerFrame; }
    int slot_in_frame() const { return static_cast<int>(abs_slot % kSlotsPerFrame); }
    int frame_in_multiframe() const { return static_cast<int>(frame() % kFramesPerMultiframe); }
    bool in_control_frame() const { return frame_in_multiframe() == kControlFrame; }

    double seconds() const { return static_cast<double>(abs_slot) * frame_dur_ms / kSlotsPerFrame / 1000.0; }
};

inline double slot_to_seconds(const SlotClock& clock, std::int64_t abs_slot) {
    if (abs_slot < 0) throw ParamError("slot_to_seconds: abs_slot must be >= 0");
    return static_cast<double>(abs_slot) * clock.frame_dur_ms / kSlotsPerFrame / 1000.0;
}

/// Tick-domain helpers used by the protocol simulations.
struct TickClock {
    double frame_dur_ms = kDefaultFrameDurMs;

    double seconds_per_tick() const { return frame_dur_ms / kSlotsPerFrame / kTicksPerSlot / 1000.0; }
    double to_seconds(Ticks t) const { return static_cast<double>(t) * seconds_per_tick(); }

    /// Smallest tick >= the given wall-clock time.
    Ticks from_seconds_ceil(double s) const {
        auto t = static_cast<Ticks>(s / seconds_per_tick());
        while (to_seconds(t) < s) ++t;
        return t;
    }

    static std::int64_t slot_of(Ticks t) { return t / kTicksPerSlot; }
    static std::int64_t frame_of(Ticks t) { return t / kTicksPerFrame; }
    static int frame_in_multiframe(std::int64_t frame) { return static_cast<int>(frame % kFramesPerMultiframe); }
    static bool is_control_frame(std::int64_t frame) { return frame_in_multiframe(frame) == kControlFrame; }

    static Ticks frame_start(std::int64_t frame) { return frame * kTicksPerFrame; }
    static Ticks slot_start(std::int64_t abs_slot) { return abs_slot * kTicksPerSlot; }
    static Ticks slot_end(std::int64_t abs_slot) { return (abs_slot + 1) * kTicksPerSlot; }
};

} // namespace tetrasim
