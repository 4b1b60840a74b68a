#include "pipeleak/balance_detect.hpp"

#include <cmath>
#include <utility>

#include "pipeleak/errors.hpp"

namespace pipeleak {

namespace {

struct MeterIntegral {
    double mass = 0.0;
    int missing = 0;
    bool any_good = false;
};

// Trapezoid over the good samples; flat extension to the window edges.
MeterIntegral integrate_meter(std::span<const TelemetryFrame> frames, const std::string& id) {
    MeterIntegral out;
    std::optional<std::pair<double, double>> prev;
    for (const auto& f : frames) {
        const auto v = f.good_value(id);
        if (!v) {
            ++out.missing;
            continue;
        }
        if (prev) {
            out.mass += 0.5 * (prev->second + *v) * (f.poll_time - prev->first);
        } else {
            out.mass += *v * (f.poll_time - frames.front().poll_time);
        }
        prev = {f.poll_time, *v};
    }
    if (prev) {
        out.any_good = true;
        out.mass += prev->second * (frames.back().poll_time - prev->first);
    }
    return out;
}

}  // namespace

BalanceWindow accumulate(std::span<const TelemetryFrame> frames, const std::string& inlet_flow_id,
                         const std::string& outlet_flow_id, double linepack_start,
                         double linepack_end, double max_missing_fraction) {
    if (frames.size() < 2) throw DomainError("balance window needs at least two polls");
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (!(frames[i].poll_time > frames[i - 1].poll_time))
            throw DomainError("balance window polls must be strictly increasing in time");
    }
    BalanceWindow w;
    w.start = frames.front().poll_time;
    w.end = frames.back().poll_time;
    w.polls = static_cast<int>(frames.size());

    const auto in = integrate_meter(frames, inlet_flow_id);
    const auto out = integrate_meter(frames, outlet_flow_id);
    w.missing_in = in.missing;
    w.missing_out = out.missing;
    w.v_in = in.mass;
    w.v_out = out.mass;
    w.delta_linepack = linepack_end - linepack_start;
    w.imbalance = w.v_in - w.v_out - w.delta_linepack;

    const double allowed = max_missing_fraction * static_cast<double>(w.polls);
    w.indeterminate = !in.any_good || !out.any_good || in.missing > allowed || out.missing > allowed;
    return w;
}

bool balance_alarm(const BalanceWindow& window, double threshold) {
    return !window.indeterminate && window.imbalance > threshold;
}

double windowed_noise_sigma(double sigma_in, double sigma_out, double poll_interval, int n_polls) {
    if (n_polls < 2) return 0.0;
    // trapezoid weights h/2, h, ..., h, h/2
    const double sum_w2 = poll_interval * poll_interval * (static_cast<double>(n_polls) - 1.5);
    return std::sqrt((sigma_in * sigma_in + sigma_out * sigma_out) * sum_w2);
}

double average_state_linepack(const HydraulicModel& model, double p_in, double p_out, double t_in,
                              double t_out) {
    const double rho = density(model.fluid(), 0.5 * (p_in + p_out), 0.5 * (t_in + t_out));
    double volume = 0.0;
    for (std::size_t c = 0; c < model.grid().cell_count(); ++c)
        volume += model.cell_area(c) * model.grid().cell_length(c);
    return rho * volume;
}

std::optional<double> imbalance_trend(std::span<const BalanceWindow> windows) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& w : windows) {
        if (!w.indeterminate) pts.emplace_back(w.end, w.imbalance);
    }
    if (pts.size() < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0;
    for (auto [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx <= 0.0) return std::nullopt;
    return sxy / sxx;
}

BalanceMonitor::BalanceMonitor(BalanceConfig config) : config_(std::move(config)) {
    if (!(config_.window > 0.0)) throw ParameterDomainError("balance window must be positive");
    if (config_.max_missing_fraction < 0.0 || config_.max_missing_fraction > 1.0)
        throw ParameterDomainError("balance max_missing_fraction must lie in [0, 1]");
}

std::optional<BalanceWindow> BalanceMonitor::process(const TelemetryFrame& frame,
                                                     std::optional<double> linepack_estimate) {
    if (frames_.empty()) {
        if (!linepack_estimate) return std::nullopt;
        frames_.push_back(frame);
        linepack_start_ = *linepack_estimate;
        return std::nullopt;
    }
    frames_.push_back(frame);
    // small slack so that accumulated poll times land on the boundary
    const double elapsed = frame.poll_time - frames_.front().poll_time;
    if (elapsed + 1e-9 * config_.window < config_.window) return std::nullopt;

    // without an estimate at the boundary the inventory change is unknown: void the window
    const double lp_end = linepack_estimate.value_or(linepack_start_);
    BalanceWindow w = accumulate(frames_, config_.inlet_flow_id, config_.outlet_flow_id,
                                 linepack_start_, lp_end, config_.max_missing_fraction);
    if (!linepack_estimate) w.indeterminate = true;
    w.alarm = balance_alarm(w, config_.threshold);
    windows_.push_back(w);

    frames_.clear();
    if (linepack_estimate) {
        frames_.push_back(frame);
        linepack_start_ = *linepack_estimate;
    }
    return w;
}

std::optional<double> BalanceMonitor::first_alarm_time() const {
    for (const auto& w : windows_) {
        if (w.alarm) return w.end;
    }
    return std::nullopt;
}

}  // namespace pipeleak
