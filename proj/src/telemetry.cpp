#include "pipeleak/telemetry.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "pipeleak/errors.hpp"

namespace pipeleak {

std::string_view to_string(Quality q) {
    switch (q) {
        case Quality::good: return "good";
        case Quality::suspect: return "suspect";
        case Quality::missing: return "missing";
    }
    return "unknown";
}

const Reading* TelemetryFrame::find(std::string_view id) const {
    for (const auto& r : readings) {
        if (r.instrument_id == id) return &r;
    }
    return nullptr;
}

std::optional<double> TelemetryFrame::good_value(std::string_view id) const {
    const Reading* r = find(id);
    if (r && r->is_good()) return r->value;
    return std::nullopt;
}

namespace {

std::size_t instrument_node(const HydraulicModel& model, const InstrumentPlacement& ins) {
    const auto& grid = model.grid();
    const std::size_t node = grid.nearest_node(ins.position);
    const double tol = 1e-9 * model.pipeline().length();
    if (std::abs(grid.node_positions[node] - ins.position) > tol) {
        std::ostringstream msg;
        msg << "instrument " << ins.id << " at " << ins.position << " m is not on a grid node";
        throw DomainError(msg.str());
    }
    return node;
}

std::mt19937_64 reading_engine(std::uint64_t seed, std::size_t index, double poll_time) {
    const auto t = std::bit_cast<std::uint64_t>(poll_time);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(t),
                      static_cast<std::uint32_t>(t >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

double true_reading(const HydraulicModel& model, const GridState& state,
                    const InstrumentPlacement& instrument) {
    const std::size_t node = instrument_node(model, instrument);
    switch (instrument.kind) {
        case InstrumentKind::flow: return mass_flow_at(model, state, node);
        case InstrumentKind::pressure:
        case InstrumentKind::acoustic: return state.p[node];
        case InstrumentKind::temperature: return state.temp[node];
    }
    return 0.0;
}

TelemetryFrame sample(const HydraulicModel& model, const GridState& state,
                      std::span<const InstrumentPlacement> instruments, const NoiseSpec& noise,
                      double poll_time) {
    TelemetryFrame frame;
    frame.poll_time = poll_time;
    frame.readings.reserve(instruments.size());
    for (std::size_t i = 0; i < instruments.size(); ++i) {
        const auto& ins = instruments[i];
        const double truth = true_reading(model, state, ins);
        Reading r;
        r.instrument_id = ins.id;

        auto engine = reading_engine(noise.rng_seed, i, poll_time);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        if (ins.dropout_prob > 0.0 && uniform(engine) < ins.dropout_prob) {
            r.quality = Quality::missing;
            frame.readings.push_back(std::move(r));
            continue;
        }
        double z = 0.0;
        if (ins.noise_sigma > 0.0) {
            std::normal_distribution<double> normal(0.0, 1.0);
            do {
                z = normal(engine);
            } while (std::abs(z) > 6.0);
        }
        r.value = truth + ins.bias + ins.noise_sigma * z;
        r.quality = Quality::good;
        frame.readings.push_back(std::move(r));
    }
    return frame;
}

PlausibilityConfig PlausibilityConfig::defaults() {
    PlausibilityConfig cfg;
    cfg.by_kind[InstrumentKind::pressure] = {0.0, 1e8, 1e6, 0};
    cfg.by_kind[InstrumentKind::acoustic] = {0.0, 1e8, 1e6, 0};
    cfg.by_kind[InstrumentKind::flow] = {-1e5, 1e5, 1e4, 0};
    cfg.by_kind[InstrumentKind::temperature] = {150.0, 600.0, 5.0, 0};
    return cfg;
}

const PlausibilityLimits& PlausibilityConfig::limits_for(InstrumentKind kind) const {
    static const PlausibilityLimits open{};
    auto it = by_kind.find(kind);
    return it == by_kind.end() ? open : it->second;
}

TelemetryFrame plausibility_filter(const TelemetryFrame& frame,
                                   std::span<const InstrumentPlacement> instruments,
                                   PlausibilityHistory& history, const PlausibilityConfig& limits) {
    TelemetryFrame out = frame;
    for (auto& r : out.readings) {
        if (!r.value) continue;
        const InstrumentPlacement* ins = nullptr;
        for (const auto& candidate : instruments) {
            if (candidate.id == r.instrument_id) ins = &candidate;
        }
        if (!ins) continue;
        const auto& lim = limits.limits_for(ins->kind);
        auto& track = history.tracks[r.instrument_id];
        const double v = *r.value;

        track.repeat_count = (track.last_value && *track.last_value == v) ? track.repeat_count + 1 : 1;
        track.last_value = v;

        bool suspect = r.quality == Quality::suspect;
        if (v < lim.range_min || v > lim.range_max) suspect = true;
        if (track.last_good_value && frame.poll_time > track.last_good_time) {
            const double rate =
                std::abs(v - *track.last_good_value) / (frame.poll_time - track.last_good_time);
            if (rate > lim.max_rate) suspect = true;
        }
        if (lim.flatline_polls > 0 && track.repeat_count >= lim.flatline_polls) suspect = true;

        if (suspect) {
            r.quality = Quality::suspect;
        } else {
            track.last_good_value = v;
            track.last_good_time = frame.poll_time;
        }
    }
    return out;
}

}  // namespace pipeleak
