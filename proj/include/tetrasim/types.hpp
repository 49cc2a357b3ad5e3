#pragma once

#include <cstdint>
#include <string>

#include "tetrasim/rng.hpp"

namespace tetrasim {

using EntityId = std::int32_t;

enum class UpdateKind : std::uint8_t { UplinkStatus, DownlinkFeedback };

/// One status message. gen_time is immutable; every relayed copy carries it
/// so age is always measured from the original generation instant.
struct Update {
    EntityId source_id = -1;
    double gen_time = 0.0;   // wall-clock seconds
    int n_fragments = 1;
    int bytes = 1;
    UpdateKind kind = UpdateKind::UplinkStatus;
    std::int64_t uid = -1;   // correlation id for loss accounting (-1: untracked)
};

/// Packet-management policy at a transmitter's buffer.
enum class Discipline : std::uint8_t { Fcfs, Npr, Pr, Prrt, Replace2 };

inline const char* to_string(Discipline d) {
    switch (d) {
        case Discipline::Fcfs: return "fcfs";
        case Discipline::Npr: return "npr";
        case Discipline::Pr: return "pr";
        case Discipline::Prrt: return "prrt";
        case Discipline::Replace2: return "replace2";
    }
    return "?";
}

inline Discipline discipline_from_string(const std::string& s) {
    if (s == "fcfs") return Discipline::Fcfs;
    if (s == "npr") return Discipline::Npr;
    if (s == "pr") return Discipline::Pr;
    if (s == "prrt") return Discipline::Prrt;
    if (s == "replace2") return Discipline::Replace2;
    throw ParamError("unknown discipline: " + s);
}

/// Parameters of the abstract single-source model: Poisson arrivals at
/// lambda_f, deterministic fragment service mu, i.i.d. failure alpha.
struct ModelParams {
    double lambda_f = 0.1;   // updates/s
    double mu = 1.0;         // fragment service time, s
    double alpha = 0.0;      // per-transmission failure probability
    Discipline discipline = Discipline::Pr;

    void validate() const {
        if (!(lambda_f > 0.0)) throw ParamError("lambda_f must be > 0");
        if (!(mu > 0.0)) throw ParamError("mu must be > 0");
        if (!(alpha >= 0.0 && alpha < 1.0)) throw ParamError("alpha must be in [0, 1)");
    }
};

} // namespace tetrasim
