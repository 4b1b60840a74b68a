#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pipeleak/hydraulics.hpp"
#include "pipeleak/network.hpp"

namespace pipeleak {

struct AcousticSensor {
    std::string id;
    double position = 0.0;             // m
    double trigger_threshold = 1.0;    // Pa amplitude
    double timestamp_resolution = 0.0; // s, 0 = exact clock

    void validate(double line_length) const;
};

/// Kinematic pressure-wave channel: fronts travel at `speed` and decay as exp(-attenuation * d).
struct WaveModel {
    double speed = 1000.0;     // m/s
    double attenuation = 0.0;  // 1/m

    void validate() const;
};

struct AcousticEvent {
    std::string sensor_id;
    double position = 0.0;
    double arrival_time = 0.0;  // absolute, quantized to the sensor clock
    double amplitude = 0.0;     // Pa
    bool triggered = false;
};

/// Arrival time, amplitude and trigger state of the leak's rarefaction front at every sensor.
std::vector<AcousticEvent> propagate(const LeakEvent& leak, double initial_amplitude,
                                     std::span<const AcousticSensor> sensors,
                                     const WaveModel& wave);

struct Localization {
    double position = 0.0;      // clamped into [x1, x2]
    double raw_position = 0.0;  // before clamping
    bool out_of_bracket = false;
};

/// Arrival-time difference fix between two sensors at x1 < x2.
Localization localize(double x1, double t1, double x2, double t2, double speed);

/// Smallest arrival delay among triggered sensors; empty when nothing triggers.
std::optional<double> detection_latency(const LeakEvent& leak,
                                        std::span<const AcousticEvent> events);

struct AcousticResult {
    std::vector<AcousticEvent> events;
    std::optional<double> latency;
    std::optional<Localization> location;
    std::optional<std::pair<std::string, std::string>> sensor_pair;
};

/// Full acoustic pass for one leak: propagation, latency, and a fix from the first-hit sensor
/// paired with whichever triggered neighbour brackets the leak.
AcousticResult analyze_leak(const LeakEvent& leak, double initial_amplitude,
                            std::span<const AcousticSensor> sensors, const WaveModel& wave);

/// Acoustic sensors from the pipeline's acoustic instruments.
std::vector<AcousticSensor> acoustic_sensors(const PipelineModel& pipeline);

}  // namespace pipeleak
