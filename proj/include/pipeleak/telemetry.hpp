#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pipeleak/hydraulics.hpp"
#include "pipeleak/network.hpp"

namespace pipeleak {

enum class Quality { good, suspect, missing };

std::string_view to_string(Quality q);

struct Reading {
    std::string instrument_id;
    std::optional<double> value;  // empty iff quality == missing
    Quality quality = Quality::good;

    bool is_good() const noexcept { return quality == Quality::good && value.has_value(); }
};

/// One SCADA poll: exactly one reading per configured instrument, in configuration order.
struct TelemetryFrame {
    double poll_time = 0.0;
    std::vector<Reading> readings;

    const Reading* find(std::string_view id) const;
    /// Value of a good reading, empty otherwise.
    std::optional<double> good_value(std::string_view id) const;
};

/// Per-instrument sigma, bias and dropout live on InstrumentPlacement; the seed selects the stream.
struct NoiseSpec {
    std::uint64_t rng_seed = 0;
};

/// Noise-free value the instrument would read from a state.
double true_reading(const HydraulicModel& model, const GridState& state,
                    const InstrumentPlacement& instrument);

/// reading = true value + bias + N(0, sigma) truncated at 6 sigma; missing with dropout_prob.
/// The random stream is a function of (seed, instrument index, poll_time) only, so frames are
/// reproducible and independent of call order. DomainError if an instrument is off-node.
TelemetryFrame sample(const HydraulicModel& model, const GridState& state,
                      std::span<const InstrumentPlacement> instruments, const NoiseSpec& noise,
                      double poll_time);

struct PlausibilityLimits {
    double range_min = -1e300;
    double range_max = 1e300;
    double max_rate = 1e300;  // instrument units per second
    int flatline_polls = 0;   // 0 disables the flatline check
};

struct PlausibilityConfig {
    std::map<InstrumentKind, PlausibilityLimits> by_kind;

    /// Generic wide limits: pressure [0, 1e8] Pa and 1e6 Pa/s; flow +-1e5 kg/s and 1e4 kg/s2;
    /// temperature [150, 600] K and 5 K/s; flatline check off.
    static PlausibilityConfig defaults();
    const PlausibilityLimits& limits_for(InstrumentKind kind) const;
};

/// Per-instrument memory used by the rate-of-change and flatline rules.
struct PlausibilityHistory {
    struct Track {
        std::optional<double> last_good_value;
        double last_good_time = 0.0;
        std::optional<double> last_value;
        int repeat_count = 0;
    };
    std::map<std::string, Track, std::less<>> tracks;
};

/// Flags out-of-range, too-fast and flatlined readings as suspect. Values are never altered.
/// `history` is updated with this frame.
TelemetryFrame plausibility_filter(const TelemetryFrame& frame,
                                   std::span<const InstrumentPlacement> instruments,
                                   PlausibilityHistory& history, const PlausibilityConfig& limits);

}  // namespace pipeleak
