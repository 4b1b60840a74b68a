#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pipeleak/hydraulics.hpp"
#include "pipeleak/telemetry.hpp"

namespace pipeleak {

/// One line-balance window. All masses in kg.
struct BalanceWindow {
    double start = 0.0;
    double end = 0.0;
    double v_in = 0.0;           // integrated inlet meter
    double v_out = 0.0;          // integrated outlet meter
    double delta_linepack = 0.0; // inventory change over the window
    double imbalance = 0.0;      // v_in - v_out - delta_linepack
    bool indeterminate = false;  // voided: too many missing meter readings
    bool alarm = false;
    int polls = 0;
    int missing_in = 0;
    int missing_out = 0;

    double duration() const noexcept { return end - start; }
};

/// Integrates the two end meters over the frames (trapezoid rule; bad or missing readings are
/// bridged linearly between the neighbouring good ones and held flat at the window edges).
/// The window is voided when either meter lacks a good reading in more than
/// max_missing_fraction of the polls. Frames must be in time order; at least two are needed.
BalanceWindow accumulate(std::span<const TelemetryFrame> frames, const std::string& inlet_flow_id,
                         const std::string& outlet_flow_id, double linepack_start,
                         double linepack_end, double max_missing_fraction = 0.1);

/// alarm iff the window is valid and imbalance > threshold. Never carries a location.
bool balance_alarm(const BalanceWindow& window, double threshold);

/// Standard deviation of the integrated imbalance caused by independent meter noise,
/// for n_polls polls spaced poll_interval apart under the trapezoid rule.
double windowed_noise_sigma(double sigma_in, double sigma_out, double poll_interval, int n_polls);

/// The simple inventory estimate: density at the mean of the end pressures and temperatures
/// times the line volume.
double average_state_linepack(const HydraulicModel& model, double p_in, double p_out, double t_in,
                              double t_out);

/// Least-squares slope of window imbalance against window end time, kg per second of
/// elapsed time. Steadily diverging meters show up as a non-zero slope. Empty with < 2 windows.
std::optional<double> imbalance_trend(std::span<const BalanceWindow> windows);

enum class InventoryMode {
    shadow_linepack,  // linepack of the real-time model
    average_state,    // density at averaged end conditions
};

struct BalanceConfig {
    std::string inlet_flow_id;
    std::string outlet_flow_id;
    double window = 3600.0;          // s
    double threshold = 0.0;          // kg
    double max_missing_fraction = 0.1;
    InventoryMode mode = InventoryMode::shadow_linepack;
};

/// Back-to-back windows over a poll stream. Adjacent windows share their boundary poll.
class BalanceMonitor {
public:
    explicit BalanceMonitor(BalanceConfig config);

    /// Feeds one filtered frame with the inventory estimate at that poll (empty when no
    /// estimate exists yet; windows start at the first poll that has one).
    /// Returns the window completed by this poll, if any.
    std::optional<BalanceWindow> process(const TelemetryFrame& frame,
                                         std::optional<double> linepack_estimate);

    const BalanceConfig& config() const noexcept { return config_; }
    const std::vector<BalanceWindow>& windows() const noexcept { return windows_; }
    std::optional<double> first_alarm_time() const;

private:
    BalanceConfig config_;
    std::vector<TelemetryFrame> frames_;
    double linepack_start_ = 0.0;
    std::vector<BalanceWindow> windows_;
};

}  // namespace pipeleak
