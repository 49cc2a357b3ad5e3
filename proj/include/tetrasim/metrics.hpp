#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tetrasim/types.hpp"

namespace tetrasim::metrics {

/// Drop counters by cause. `access_fail` is protocol-only (random-access
/// attempt budget exhausted); the abstract model uses the first four.
struct LossCounters {
    std::uint64_t channel = 0;
    std::uint64_t preempt = 0;
    std::uint64_t replace = 0;
    std::uint64_t busy = 0;
    std::uint64_t access_fail = 0;

    std::uint64_t total() const { return channel + preempt + replace + busy + access_fail; }

    LossCounters& operator+=(const LossCounters& o) {
        channel += o.channel;
        preempt += o.preempt;
        replace += o.replace;
        busy += o.busy;
        access_fail += o.access_fail;
        return *this;
    }
};

struct Summary {
    double mean = 0.0;
    double se = 0.0;          // batch-means standard error
    double ci95_half = 0.0;   // t-based 95% half-width
    std::uint64_t count = 0;
    bool flagged = false;     // too few samples for the requested batching
};

namespace detail {

/// Two-sided 97.5% Student-t quantile; linear use of a short table, 1.96
/// beyond. Only small dfs occur (batch count - 1).
inline double t975(int df) {
    static constexpr double tab[] = {
        12.706, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060, 2.2622, 2.2281,
        2.2010, 2.1788, 2.1604, 2.1448, 2.1314, 2.1199, 2.1098, 2.1009, 2.0930, 2.0860,
        2.0796, 2.0739, 2.0687, 2.0639, 2.0595, 2.0555, 2.0518, 2.0484, 2.0452, 2.0423,
        2.0395, 2.0369, 2.0345, 2.0322, 2.0301, 2.0281, 2.0262, 2.0244, 2.0227, 2.0211
    };
    if (df < 1) return std::numeric_limits<double>::infinity();
    if (df <= 40) return tab[df - 1];
    return 1.96;
}

} // namespace detail

/// Batch-means summary: overall mean is the plain arithmetic mean of all
/// samples; the standard error comes from n_batches contiguous batch means,
/// which absorbs serial correlation between consecutive PAoI samples.
inline Summary summarize(const std::vector<double>& samples, int n_batches = 30) {
    Summary s;
    s.count = samples.size();
    if (samples.empty()) {
        s.flagged = true;
        return s;
    }
    double acc = 0.0;
    for (double v : samples) acc += v;
    s.mean = acc / static_cast<double>(samples.size());
    if (static_cast<int>(samples.size()) < n_batches) {
        s.flagged = true;
        s.se = std::numeric_limits<double>::infinity();
        s.ci95_half = std::numeric_limits<double>::infinity();
        return s;
    }
    std::size_t n = samples.size();
    std::size_t base = n / n_batches;
    std::size_t extra = n % n_batches;  // first `extra` batches take one more
    std::vector<double> bm;
    bm.reserve(n_batches);
    std::size_t pos = 0;
    for (int b = 0; b < n_batches; ++b) {
        std::size_t len = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
        double ba = 0.0;
        for (std::size_t i = 0; i < len; ++i) ba += samples[pos + i];
        pos += len;
        bm.push_back(ba / static_cast<double>(len));
    }
    double bmean = 0.0;
    for (double v : bm) bmean += v;
    bmean /= n_batches;
    double var = 0.0;
    for (double v : bm) var += (v - bmean) * (v - bmean);
    var /= (n_batches - 1);
    s.se = std::sqrt(var / n_batches);
    s.ci95_half = detail::t975(n_batches - 1) * s.se;
    return s;
}

/// Per-source AoI bookkeeping at the receiving endpoint. Each delivery i
/// yields the peak age A_i computed two ways -- interdeparture plus previous
/// realized span, and age of the predecessor at this delivery instant -- and
/// both must agree on every sample path.
class AoiTracker {
public:
    /// service_span: realized span from generation to delivery of the update
    /// being recorded (for the single-buffer disciplines this is the realized
    /// service time, since service starts at generation).
    /// Returns the PAoI sample, or nullopt for a source's first delivery and
    /// for stale deliveries.
    std::optional<double> record_delivery(EntityId source, double gen_time, double now,
                                          double service_span) {
        if (now < gen_time) throw std::logic_error("AoiTracker: delivery before generation");
        auto it = last_.find(source);
        if (it == last_.end()) {
            last_.emplace(source, Last{gen_time, now, service_span});
            return std::nullopt;
        }
        Last& prev = it->second;
        if (gen_time < prev.gen_time) {
            ++stale_;
            return std::nullopt;  // counted, excluded, flagged
        }
        double via_interdeparture = (now - prev.delivery_time) + prev.service_span;
        double via_predecessor_age = now - prev.gen_time;
        double tol = 1e-9 * std::max(1.0, std::abs(via_predecessor_age));
        if (std::abs(via_interdeparture - via_predecessor_age) > tol) {
            throw std::logic_error("AoiTracker: PAoI bookkeeping mismatch between routes");
        }
        prev = Last{gen_time, now, service_span};
        samples_.push_back(via_predecessor_age);
        per_source_[source].push_back(via_predecessor_age);
        return via_predecessor_age;
    }

    const std::vector<double>& samples() const { return samples_; }
    const std::map<EntityId, std::vector<double>>& per_source() const { return per_source_; }
    std::uint64_t stale_count() const { return stale_; }

    /// Drop samples recorded so far (warm-up removal); per-delivery state is kept.
    void discard_samples() {
        samples_.clear();
        per_source_.clear();
    }

private:
    struct Last {
        double gen_time;
        double delivery_time;
        double service_span;
    };
    std::map<EntityId, Last> last_;
    std::vector<double> samples_;
    std::map<EntityId, std::vector<double>> per_source_;
    std::uint64_t stale_ = 0;
};

/// Result of one simulation run. All counters are integers so conservation
/// and the PLR decomposition can be checked exactly.
struct RunResult {
    Summary paoi;
    Summary downlink_paoi;                 // protocol scenarios only
    std::map<EntityId, Summary> per_source;

    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t in_flight = 0;           // still in-system at the horizon
    LossCounters drops;
    std::uint64_t stale = 0;

    double mean_service_s = 0.0;           // mean realized span of delivered updates
    double collision_rate_tmo = 0.0;
    double collision_rate_dmo = 0.0;
    double emergent_alpha_tmo = 0.0;
    double emergent_alpha_dmo = 0.0;

    std::uint64_t events = 0;
    bool truncated = false;

    std::uint64_t plr_denominator() const { return generated - in_flight; }
    double plr() const {
        auto d = plr_denominator();
        return d == 0 ? 0.0 : static_cast<double>(drops.total()) / static_cast<double>(d);
    }
    double plr_fraction(std::uint64_t cause_count) const {
        auto d = plr_denominator();
        return d == 0 ? 0.0 : static_cast<double>(cause_count) / static_cast<double>(d);
    }
};

} // namespace tetrasim::metrics
