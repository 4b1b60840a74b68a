#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pipeleak {

inline constexpr double kGravity = 9.80665;  // m/s2
inline constexpr double kPi = 3.14159265358979323846;

enum class InstrumentKind { flow, pressure, temperature, acoustic };

std::string_view to_string(InstrumentKind kind);
std::optional<InstrumentKind> instrument_kind_from_string(std::string_view name);

/// A field instrument. Readings are mass flow (kg/s), pressure (Pa) or temperature (K);
/// acoustic sensors read line pressure and additionally carry trigger settings.
struct InstrumentPlacement {
    std::string id;
    InstrumentKind kind = InstrumentKind::pressure;
    double position = 0.0;       // m from inlet
    double noise_sigma = 0.0;    // instrument units
    double bias = 0.0;           // instrument units
    double dropout_prob = 0.0;
    double range_min = 0.0;      // span, used for thresholds and plausibility limits
    double range_max = 1.0;
    double trigger_threshold = 0.0;      // acoustic only, Pa
    double timestamp_resolution = 0.0;   // acoustic only, s

    double span() const noexcept { return range_max - range_min; }
};

struct ElevationPoint {
    double x;  // m
    double h;  // m
};

/// One run of pipe with uniform properties.
struct Segment {
    double start = 0.0;
    double end = 0.0;
    double diameter = 0.3;              // m
    double friction_factor = 0.02;      // Darcy
    double heat_transfer_u = 0.0;       // W/(m2 K)
    double ground_temperature = 288.15; // K

    double area() const noexcept { return kPi * diameter * diameter / 4.0; }
};

/// Partial property override applied to [start, end).
struct SegmentOverride {
    double start = 0.0;
    double end = 0.0;
    std::optional<double> diameter;
    std::optional<double> friction_factor;
    std::optional<double> heat_transfer_u;
    std::optional<double> ground_temperature;
};

struct PipelineSpec {
    double length = 10000.0;
    Segment defaults;                         // start/end ignored
    std::vector<SegmentOverride> overrides;
    std::vector<ElevationPoint> elevation;    // empty means flat at H = 0
    std::vector<InstrumentPlacement> instruments;
};

/// Immutable single-trunk pipeline. All cross-section areas come from here.
class PipelineModel {
public:
    explicit PipelineModel(PipelineSpec spec);

    double length() const noexcept { return length_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }
    const std::vector<ElevationPoint>& elevation_profile() const noexcept { return elevation_; }
    const std::vector<InstrumentPlacement>& instruments() const noexcept { return instruments_; }

    /// Segment containing x; a boundary point belongs to the segment to its right
    /// (the last segment owns x == length).
    const Segment& segment_at(double x) const;
    double area_at(double x) const { return segment_at(x).area(); }

    const InstrumentPlacement* find_instrument(std::string_view id) const;

private:
    double length_;
    std::vector<Segment> segments_;
    std::vector<ElevationPoint> elevation_;
    std::vector<InstrumentPlacement> instruments_;
};

/// Piecewise-linear elevation. DomainError outside [0, length].
double elevation_at(const PipelineModel& pipeline, double x);

/// Solver discretization. Cell i spans nodes i and i+1.
struct Grid {
    std::vector<double> node_positions;
    double dx = 0.0;  // largest cell length

    std::size_t node_count() const noexcept { return node_positions.size(); }
    std::size_t cell_count() const noexcept { return node_positions.size() - 1; }
    double cell_length(std::size_t cell) const {
        return node_positions[cell + 1] - node_positions[cell];
    }
    std::size_t nearest_node(double x) const;
};

/// Every spacing is <= target_dx. Line ends, segment boundaries and instrument positions
/// are nodes; the stretch between two consecutive such points is divided uniformly.
/// Two distinct instrument positions closer than target_dx raise ConfigError.
Grid discretize(const PipelineModel& pipeline, double target_dx);

/// Grid with additional required node positions (e.g. leak sites of a scenario).
Grid discretize(const PipelineModel& pipeline, double target_dx,
                const std::vector<double>& extra_nodes);

}  // namespace pipeleak
