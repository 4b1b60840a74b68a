#include "pipeleak/acoustic_detect.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pipeleak/errors.hpp"

namespace pipeleak {

void AcousticSensor::validate(double line_length) const {
    if (position < 0.0 || position > line_length) {
        std::ostringstream msg;
        msg << "acoustic sensor " << id << " at " << position << " m is off the line";
        throw DomainError(msg.str());
    }
    if (!(trigger_threshold > 0.0))
        throw ParameterDomainError("acoustic sensor " + id + ": trigger threshold must be positive");
    if (timestamp_resolution < 0.0)
        throw ParameterDomainError("acoustic sensor " + id + ": negative timestamp resolution");
}

void WaveModel::validate() const {
    if (!(speed > 0.0)) throw ParameterDomainError("wave speed must be positive");
    if (!(attenuation >= 0.0)) throw ParameterDomainError("wave attenuation must be non-negative");
}

namespace {

double quantize(double t, double resolution) {
    if (resolution <= 0.0) return t;
    return std::round(t / resolution) * resolution;
}

}  // namespace

std::vector<AcousticEvent> propagate(const LeakEvent& leak, double initial_amplitude,
                                     std::span<const AcousticSensor> sensors,
                                     const WaveModel& wave) {
    wave.validate();
    if (!(initial_amplitude > 0.0)) throw ParameterDomainError("wave amplitude must be positive");
    std::vector<AcousticEvent> events;
    events.reserve(sensors.size());
    for (const auto& s : sensors) {
        const double d = std::abs(s.position - leak.position);
        AcousticEvent e;
        e.sensor_id = s.id;
        e.position = s.position;
        e.arrival_time = quantize(leak.start_time + d / wave.speed, s.timestamp_resolution);
        e.amplitude = initial_amplitude * std::exp(-wave.attenuation * d);
        e.triggered = e.amplitude >= s.trigger_threshold;
        events.push_back(std::move(e));
    }
    return events;
}

Localization localize(double x1, double t1, double x2, double t2, double speed) {
    if (!(speed > 0.0)) throw ParameterDomainError("wave speed must be positive");
    if (!(x1 < x2)) throw DomainError("localize needs two sensors with x1 < x2");
    Localization loc;
    loc.raw_position = 0.5 * (x1 + x2) + 0.5 * speed * (t1 - t2);
    loc.position = std::clamp(loc.raw_position, x1, x2);
    loc.out_of_bracket = loc.position != loc.raw_position;
    return loc;
}

std::optional<double> detection_latency(const LeakEvent& leak,
                                        std::span<const AcousticEvent> events) {
    std::optional<double> best;
    for (const auto& e : events) {
        if (!e.triggered) continue;
        const double delay = e.arrival_time - leak.start_time;
        if (!best || delay < *best) best = delay;
    }
    return best;
}

AcousticResult analyze_leak(const LeakEvent& leak, double initial_amplitude,
                            std::span<const AcousticSensor> sensors, const WaveModel& wave) {
    AcousticResult r;
    r.events = propagate(leak, initial_amplitude, sensors, wave);
    r.latency = detection_latency(leak, r.events);

    std::vector<const AcousticEvent*> hits;
    for (const auto& e : r.events) {
        if (e.triggered) hits.push_back(&e);
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const auto* a, const auto* b) { return a->position < b->position; });
    if (hits.size() < 2) return r;

    // The leak sits between the first-hit sensor and one of its triggered neighbours.
    std::size_t first = 0;
    for (std::size_t i = 1; i < hits.size(); ++i) {
        if (hits[i]->arrival_time < hits[first]->arrival_time) first = i;
    }
    auto try_pair = [&](std::size_t lo, std::size_t hi) -> std::optional<Localization> {
        if (hits[lo]->position == hits[hi]->position) return std::nullopt;
        return localize(hits[lo]->position, hits[lo]->arrival_time, hits[hi]->position,
                        hits[hi]->arrival_time, wave.speed);
    };
    std::optional<Localization> left, right;
    if (first > 0) left = try_pair(first - 1, first);
    if (first + 1 < hits.size()) right = try_pair(first, first + 1);
    // Seen from the wrong side the wave passes the first-hit sensor on its way to the
    // neighbour, so that pair's fix collapses onto the first-hit sensor itself. Prefer the
    // in-bracket fix lying farther from it.
    const double x_first = hits[first]->position;
    auto score = [&](const std::optional<Localization>& l) {
        if (!l) return -2.0;
        if (l->out_of_bracket) return -1.0;
        return std::abs(l->raw_position - x_first);
    };
    const bool use_right = score(right) > score(left);
    if (use_right) {
        r.location = right;
        r.sensor_pair = std::make_pair(hits[first]->sensor_id, hits[first + 1]->sensor_id);
    } else if (left) {
        r.location = left;
        r.sensor_pair = std::make_pair(hits[first - 1]->sensor_id, hits[first]->sensor_id);
    }
    return r;
}

std::vector<AcousticSensor> acoustic_sensors(const PipelineModel& pipeline) {
    std::vector<AcousticSensor> out;
    for (const auto& ins : pipeline.instruments()) {
        if (ins.kind != InstrumentKind::acoustic) continue;
        AcousticSensor s;
        s.id = ins.id;
        s.position = ins.position;
        s.trigger_threshold = ins.trigger_threshold;
        s.timestamp_resolution = ins.timestamp_resolution;
        s.validate(pipeline.length());
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace pipeleak
