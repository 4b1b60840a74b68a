#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeleak/acoustic_detect.hpp"
#include "pipeleak/availability.hpp"
#include "pipeleak/balance_detect.hpp"
#include "pipeleak/fluid.hpp"
#include "pipeleak/hydraulics.hpp"
#include "pipeleak/network.hpp"
#include "pipeleak/rtm_detect.hpp"
#include "pipeleak/telemetry.hpp"

namespace pipeleak {

struct DetectorSettings {
    bool enabled = true;
    ShadowConfig shadow;
    std::optional<double> flow_threshold;      // explicit thresholds override the defaults
    std::optional<double> pressure_threshold;
    double k_sigma = 4.0;
    double floor_fraction = 1e-4;
    int consecutive_required = 3;
    int min_indicators = 2;
    bool signed_indicators = true;
    int characterization_polls = 36;
};

struct BalanceSettings {
    bool enabled = true;
    std::string inlet_flow_id;
    std::string outlet_flow_id;
    double window = 3600.0;
    std::optional<double> threshold;  // kg; default k_sigma x windowed meter noise
    double k_sigma = 3.0;
    double floor_fraction = 1e-4;     // of inlet meter span x window, kg
    double max_missing_fraction = 0.1;
    InventoryMode mode = InventoryMode::shadow_linepack;
};

struct AcousticSettings {
    bool enabled = true;
    std::optional<double> speed;  // m/s; fluid sound speed when absent
    double attenuation = 0.0;     // 1/m
    double amplitude = 1.0e4;     // Pa, initial rarefaction amplitude
};

struct OutputSettings {
    double state_dump_interval = 0.0;  // s; 0 disables the state dump
    bool trace = true;                 // per-poll indicator trace in the report
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    double horizon = 3600.0;
    double poll_interval = 5.0;
    double grid_dx = 250.0;
    PipelineSpec pipeline;
    FluidModel fluid{LiquidEos{}, 4180.0, 1414.0};
    SolverSettings solver;
    BoundaryConditions boundary;
    std::vector<LeakEvent> leaks;
    PlausibilityConfig plausibility = PlausibilityConfig::defaults();
    DetectorSettings detector;
    BalanceSettings balance;
    AcousticSettings acoustic;
    std::optional<double> availability_unit;       // uniform availability for the reference chains
    std::vector<ComponentChain> availability_chains;
    OutputSettings outputs;

    nlohmann::json source;    // configuration as parsed
    std::string config_hash;  // FNV-1a over the canonical form of `source`
};

struct AvailabilityConfig {
    std::optional<double> unit_availability;  // adds the three reference chains
    std::vector<ComponentChain> chains;
};

/// {"unit_availability": a, "chains": [{"name", "elements": [{kind, count, availability,
/// redundancy}]}]}; errors are reported under `path`.
AvailabilityConfig parse_availability(const nlohmann::json& block, const std::string& path);

/// Parses a configuration file: JSON with // and /* */ comments allowed.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Builds and validates a scenario. ConfigError carries the JSON pointer of the bad field.
Scenario load_scenario(const nlohmann::json& config);
Scenario load_scenario_file(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a 64 over the canonical (sorted, compact) dump.
std::string config_hash(const nlohmann::json& config);

struct RunSinks {
    std::ostream* telemetry_csv = nullptr;  // filtered frames, one row per reading
    std::ostream* state_csv = nullptr;      // plant profiles every state_dump_interval
};

struct RunReport {
    bool ok = true;  // false when the plant or a detector failed part way
    nlohmann::ordered_json json;
    // tables also written as CSV
    std::vector<BalanceWindow> balance_windows;
    std::vector<AcousticEvent> acoustic_events;
    std::vector<RankedChain> availability;
};

/// Plant simulation, telemetry, plausibility filter and all three detectors.
/// Deterministic given the scenario. A solver failure yields a partial report with ok == false.
RunReport run_scenario(const Scenario& scenario, const RunSinks& sinks = {});

struct SweepParameter {
    std::string pointer;  // JSON pointer into the scenario template
    std::vector<nlohmann::json> values;
};

struct SweepRow {
    std::size_t index = 0;
    std::vector<nlohmann::json> values;
    std::string status;  // "ok", "partial" or "error"
    std::string error;
    nlohmann::ordered_json summary;
};

struct SweepResult {
    std::string template_hash;
    std::vector<std::string> pointers;
    std::vector<SweepRow> rows;
    std::optional<double> median_location_error;
    std::optional<double> median_latency;
    std::size_t failures = 0;
};

/// Reads {"parameters": [{"pointer": ..., "values": [...]}, ...]}.
std::vector<SweepParameter> parse_sweep_grid(const nlohmann::json& grid);

/// Cartesian product over the grid (first parameter varies slowest). Each cell is patched,
/// loaded and run independently; failures are captured per row. An empty grid runs the
/// template once. Rows are ordered by cell index whatever the number of jobs.
SweepResult sweep(const nlohmann::json& scenario_template, const std::vector<SweepParameter>& grid,
                  int jobs = 1);

}  // namespace pipeleak
