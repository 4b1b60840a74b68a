#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "pipeleak/fluid.hpp"
#include "pipeleak/network.hpp"

namespace pipeleak {

/// Snapshot of the line: per-node pressure, velocity, temperature and density.
struct GridState {
    double t = 0.0;
    std::vector<double> p;    // Pa
    std::vector<double> v;    // m/s, positive from inlet to outlet
    std::vector<double> temp; // K
    std::vector<double> rho;  // kg/m3

    std::size_t size() const noexcept { return p.size(); }
};

/// Piecewise-linear schedule; constant beyond its first and last points.
class TimeSeries {
public:
    TimeSeries() = default;
    TimeSeries(double constant);  // NOLINT: a constant is the common case
    explicit TimeSeries(std::vector<std::pair<double, double>> points);

    double at(double t) const;
    double horizon() const noexcept { return points_.empty() ? 0.0 : points_.back().first; }

private:
    std::vector<std::pair<double, double>> points_;
};

enum class EndKind {
    pressure,   // Pa
    mass_flow,  // kg/s, positive into the pipe at the inlet and out of it at the outlet
    valve,      // m = cv * sign(dP) * sqrt(|dP|) against an external pressure
};

/// One end of the line at one instant.
struct EndCondition {
    EndKind kind = EndKind::pressure;
    double value = 0.0;          // pressure (Pa) or mass flow (kg/s); valve: external pressure
    double valve_cv = 0.0;       // kg/s per sqrt(Pa), valve only

    static EndCondition pressure(double p) { return {EndKind::pressure, p, 0.0}; }
    static EndCondition mass_flow(double m) { return {EndKind::mass_flow, m, 0.0}; }
    static EndCondition valve(double external_pressure, double cv) {
        return {EndKind::valve, external_pressure, cv};
    }
};

struct BoundaryValues {
    EndCondition inlet;
    EndCondition outlet;
    double supply_temperature = 288.15;  // K, applied at whichever end is upstream
};

struct EndSchedule {
    EndKind kind = EndKind::pressure;
    TimeSeries value;
    double valve_cv = 0.0;
};

/// Boundary schedules for a simulation horizon.
struct BoundaryConditions {
    EndSchedule inlet;
    EndSchedule outlet;
    TimeSeries supply_temperature{288.15};

    BoundaryValues at(double t) const;
    static BoundaryConditions constant(const BoundaryValues& values);
};

/// Constant mass-rate sink switched on at start_time.
struct LeakEvent {
    double position = 0.0;    // m
    double start_time = 0.0;  // s
    double mass_rate = 0.0;   // kg/s
};

struct SolverSettings {
    double dt = 1.0;            // s
    double theta = 0.6;
    double newton_tol = 1e-10;  // scaled update norm
    int newton_max_iter = 25;

    void validate() const;
};

/// Immutable discretized problem: pipeline, fluid and the grid they are solved on.
class HydraulicModel {
public:
    HydraulicModel(PipelineModel pipeline, FluidModel fluid, Grid grid);

    const PipelineModel& pipeline() const noexcept { return pipeline_; }
    const FluidModel& fluid() const noexcept { return fluid_; }
    const Grid& grid() const noexcept { return grid_; }

    std::size_t node_count() const noexcept { return grid_.node_count(); }
    /// Cross-section used for the mass flux through node i (mean of adjacent cells).
    double node_area(std::size_t i) const { return node_area_[i]; }
    double cell_area(std::size_t c) const { return cells_[c].area; }
    const Segment& cell_segment(std::size_t c) const {
        return pipeline_.segments()[cells_[c].segment];
    }
    double node_elevation(std::size_t i) const { return elevation_[i]; }

private:
    struct Cell {
        std::size_t segment;
        double area;
    };

    PipelineModel pipeline_;
    FluidModel fluid_;
    Grid grid_;
    std::vector<Cell> cells_;
    std::vector<double> node_area_;
    std::vector<double> elevation_;
};

/// Mass audit of one step. residual = mass_in - mass_out - leak_mass - (linepack_after - linepack_before).
struct MassLedgerEntry {
    double mass_in = 0.0;
    double mass_out = 0.0;
    double leak_mass = 0.0;
    double linepack_before = 0.0;
    double linepack_after = 0.0;

    double residual() const noexcept {
        return mass_in - mass_out - leak_mass - (linepack_after - linepack_before);
    }
};

struct StepResult {
    GridState state;
    MassLedgerEntry ledger;
    int newton_iterations = 0;
};

/// Time-independent solution of the discretized equations. All leaks are treated as active.
/// InfeasibleStateError when the solution has P <= 0 or no pressure anchor exists.
GridState steady_state(const HydraulicModel& model, const BoundaryValues& bc,
                       std::span<const LeakEvent> leaks = {}, const SolverSettings& settings = {});

/// One implicit theta-weighted box-scheme step from state.t to state.t + settings.dt.
GridState advance(const HydraulicModel& model, const GridState& state,
                  const BoundaryConditions& bc, std::span<const LeakEvent> leaks,
                  const SolverSettings& settings);

/// As advance(), also returning the step's mass audit.
StepResult advance_with_ledger(const HydraulicModel& model, const GridState& state,
                               const BoundaryConditions& bc, std::span<const LeakEvent> leaks,
                               const SolverSettings& settings);

/// Trapezoidal integral of rho * A along the line, kg.
double linepack(const HydraulicModel& model, const GridState& state);

struct ModeledProfile {
    std::vector<double> p;          // Pa
    std::vector<double> mass_flow;  // kg/s
};

ModeledProfile modeled_profile(const HydraulicModel& model, const GridState& state);

double mass_flow_at(const HydraulicModel& model, const GridState& state, std::size_t node);

}  // namespace pipeleak
