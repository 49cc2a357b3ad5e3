#pragma once

#include <cstdint>

#include "tetrasim/des.hpp"
#include "tetrasim/time.hpp"
#include "tetrasim/types.hpp"

namespace tetrasim::proto {

/// Event kinds shared by the protocol simulations. Scenario-level kinds drive
/// traffic generation; the rest belong to the TMO cell and the DMO link.
enum class EvKind : std::uint8_t {
    // scenario
    FrArrival,
    BgArrival,
    VoiceArrival,
    FeedbackArrival,
    CallEnd,
    Horizon,
    // TMO
    TmoAccessTx,
    TmoArbitrate,
    TmoGrantTimeout,
    TmoFragTx,
    TmoAckTimeout,
    TmoDownlinkTx,
    // DMO
    DmoStart,
    DmoArbitrate,
    DmoRxDone,
    DmoAckCopy,
    DmoDt316,
};

struct Ev {
    EvKind kind{};
    EntityId who = -1;      // acting entity, when any
    std::int64_t a = 0;     // slot / frame index
    std::int64_t b = 0;     // job serial
    std::int32_t c = 0;     // attempt / retx / copy token
};

using Engine = des::Engine<Ticks, Ev>;

} // namespace tetrasim::proto
