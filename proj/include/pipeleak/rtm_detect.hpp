#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pipeleak/balance_detect.hpp"
#include "pipeleak/hydraulics.hpp"
#include "pipeleak/telemetry.hpp"

namespace pipeleak {

/// A measured-minus-modeled channel at an instrument not used as a boundary condition.
struct IndicatorSpec {
    std::string instrument_id;
    InstrumentKind kind = InstrumentKind::flow;  // flow or pressure
    std::size_t node = 0;
    /// Direction a leak drives the discrepancy: measured flows exceed the model (+1),
    /// measured pressures fall below it (-1).
    int leak_sign = 1;
};

struct VotingPolicy {
    double flow_threshold = 0.1;        // kg/s
    double pressure_threshold = 1000.0; // Pa
    int consecutive_required = 3;       // M
    int min_indicators = 2;             // K
    bool signed_indicators = true;      // count only leak-direction excursions

    double threshold_for(InstrumentKind kind) const {
        return kind == InstrumentKind::flow ? flow_threshold : pressure_threshold;
    }
    void validate() const;
};

/// Shadow-model output for one poll.
struct Discrepancy {
    double poll_time = 0.0;
    bool available = false;      // false while initializing, spinning up or suspended
    std::string status;          // "ok", "initializing", "spin-up", "detection unavailable: ..."
    std::vector<std::optional<double>> delta;      // raw measured - modeled, per indicator
    std::vector<std::optional<double>> indicator;  // moving average of delta
    std::vector<std::optional<double>> normalized; // indicator / threshold
    std::vector<std::optional<double>> modeled;    // model value at each indicator
    std::vector<std::optional<double>> measured;
    std::optional<double> imbalance;  // measured inlet - measured outlet flow - modeled linepack rate
    double modeled_linepack = 0.0;
    double modeled_linepack_rate = 0.0;
    BoundaryValues applied_bc;        // boundary values driving the model at this poll
};

struct ShadowConfig {
    std::string inlet_pressure_id;              // drives the model inlet (pressure)
    std::string outlet_flow_id;                 // drives the model outlet (mass flow)
    std::optional<std::string> supply_temperature_id;
    double default_supply_temperature = 288.15;
    std::optional<std::string> inlet_flow_id;   // used for sizing
    int boundary_filter_polls = 12;
    int indicator_filter_polls = 48;
    int staleness_polls = 3;
    int spin_up_polls = 60;
    SolverSettings solver;
};

/// Parallel model driven by measured boundary values: inlet pressure and outlet flow.
class ShadowModel {
public:
    ShadowModel(HydraulicModel model, ShadowConfig config, VotingPolicy policy);

    /// Advances the model to frame.poll_time and computes discrepancies at every indicator.
    /// Stale boundaries (no good reading for more than staleness_polls polls) suspend detection;
    /// the returned record then carries available == false and a "detection unavailable" status.
    Discrepancy step(const TelemetryFrame& frame);

    const HydraulicModel& model() const noexcept { return model_; }
    const std::vector<IndicatorSpec>& indicators() const noexcept { return indicators_; }
    const std::optional<GridState>& state() const noexcept { return state_; }
    const VotingPolicy& policy() const noexcept { return policy_; }

private:
    struct BoundaryFilter {
        std::deque<double> values;
        int stale_polls = 0;
    };
    static std::optional<double> update_filter(BoundaryFilter& f, std::optional<double> reading,
                                               int window);

    HydraulicModel model_;
    ShadowConfig config_;
    VotingPolicy policy_;
    std::vector<IndicatorSpec> indicators_;
    std::optional<GridState> state_;
    BoundaryValues last_bc_;
    BoundaryFilter inlet_p_, outlet_m_, supply_t_;
    std::vector<std::deque<double>> indicator_buffers_;
    int polls_since_start_ = 0;
    bool suspended_ = false;
};

/// Indicators for an instrument set: every flow or pressure instrument except the boundary ones.
std::vector<IndicatorSpec> make_indicators(const HydraulicModel& model, const ShadowConfig& config);

/// True iff at least K indicators exceed their threshold in each of the last M polls.
/// Unavailable polls break every streak.
bool vote(std::span<const Discrepancy> history, std::span<const IndicatorSpec> indicators,
          const VotingPolicy& policy);

/// Per-indicator exceedance at one poll (the quantity vote() counts).
bool exceeds(const Discrepancy& d, std::size_t indicator, const IndicatorSpec& spec,
             const VotingPolicy& policy);

/// Mean imbalance over the window; empty if no poll in the window had both end flows.
std::optional<double> size_leak(std::span<const Discrepancy> window);

struct LocationResult {
    std::size_t node = 0;
    double position = 0.0;
    bool ambiguous = false;
    std::vector<double> candidate_positions;
    std::vector<double> residuals;  // sum of squared normalized residuals per candidate
};

/// Steady-state superposition search: for each candidate node the sized leak is added to the
/// model under the window-mean boundary values, and the predicted change at every indicator is
/// compared with the window-mean discrepancy. Exhaustive over interior grid nodes.
LocationResult locate_leak(const HydraulicModel& model, std::span<const Discrepancy> window,
                           std::span<const IndicatorSpec> indicators, const VotingPolicy& policy,
                           double leak_size, const SolverSettings& settings = {});

struct LeakVerdict {
    bool declared = false;
    double declared_time = 0.0;
    std::optional<double> size_at_alarm;      // mean over the M voting polls
    std::optional<double> size_estimate;      // mean over the characterization window
    std::optional<double> location_estimate;  // m
    bool location_ambiguous = false;
    std::vector<std::string> notes;
};

struct RtmConfig {
    ShadowConfig shadow;
    VotingPolicy policy;
    int characterization_polls = 36;  // polls after the alarm used for sizing and location
};

/// Sequential detector over the poll stream: shadow model, voting, sizing and location.
class RtmDetector {
public:
    RtmDetector(HydraulicModel model, RtmConfig config);

    const Discrepancy& process(const TelemetryFrame& frame);
    /// Sizes and locates with whatever post-alarm polls exist (end of run).
    void finalize();

    const LeakVerdict& verdict() const noexcept { return verdict_; }
    const std::vector<Discrepancy>& history() const noexcept { return history_; }
    const std::vector<bool>& alarm_trace() const noexcept { return alarm_trace_; }
    const ShadowModel& shadow() const noexcept { return shadow_; }
    const std::optional<LocationResult>& location() const noexcept { return location_; }

private:
    void characterize(std::size_t first, std::size_t last);

    RtmConfig config_;
    ShadowModel shadow_;
    std::vector<Discrepancy> history_;
    std::vector<bool> alarm_trace_;
    LeakVerdict verdict_;
    std::optional<std::size_t> alarm_index_;
    bool characterized_ = false;
    std::optional<LocationResult> location_;
};

/// Default thresholds: k_sigma x the expected standard deviation of a filtered indicator,
/// sigma_instr * sqrt(3 / W) (measured side plus two model-side noise paths), floored at
/// floor_fraction of the instrument span so that noiseless runs keep a positive threshold.
VotingPolicy default_policy(const HydraulicModel& model, const ShadowConfig& config,
                            double k_sigma = 4.0, double floor_fraction = 1e-4);

/// The real-time model verdict joined with the back-up line balance.
struct CombinedVerdict {
    bool declared = false;
    std::optional<double> first_alarm_time;
    std::string first_source;            // "rtm" or "balance"
    bool rtm_declared = false;
    std::optional<double> balance_alarm_time;
    bool confirmed = false;              // both methods alarmed
};

CombinedVerdict combine_verdicts(const LeakVerdict& rtm, std::span<const BalanceWindow> windows);

}  // namespace pipeleak
