#include "pipeleak/rtm_detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pipeleak/errors.hpp"

namespace pipeleak {

void VotingPolicy::validate() const {
    if (!(flow_threshold > 0.0)) throw ConfigError("/detector/flow_threshold", "must be > 0");
    if (!(pressure_threshold > 0.0)) {
        throw ConfigError("/detector/pressure_threshold", "must be > 0");
    }
    if (consecutive_required < 1) throw ConfigError("/detector/consecutive_required", "must be >= 1");
    if (min_indicators < 1) throw ConfigError("/detector/min_indicators", "must be >= 1");
}

std::vector<IndicatorSpec> make_indicators(const HydraulicModel& model, const ShadowConfig& config) {
    std::vector<IndicatorSpec> out;
    for (const auto& ins : model.pipeline().instruments()) {
        if (ins.id == config.inlet_pressure_id || ins.id == config.outlet_flow_id) continue;
        if (ins.kind != InstrumentKind::flow && ins.kind != InstrumentKind::pressure) continue;
        IndicatorSpec spec;
        spec.instrument_id = ins.id;
        spec.kind = ins.kind;
        spec.node = model.grid().nearest_node(ins.position);
        spec.leak_sign = ins.kind == InstrumentKind::flow ? 1 : -1;
        out.push_back(spec);
    }
    return out;
}

VotingPolicy default_policy(const HydraulicModel& model, const ShadowConfig& config,
                            double k_sigma, double floor_fraction) {
    VotingPolicy policy;
    double flow = 0.0, pressure = 0.0;
    const double w = std::max(1, config.indicator_filter_polls);
    for (const auto& ind : make_indicators(model, config)) {
        const auto* ins = model.pipeline().find_instrument(ind.instrument_id);
        const double thr = std::max(k_sigma * ins->noise_sigma * std::sqrt(3.0 / w),
                                    floor_fraction * ins->span());
        if (ind.kind == InstrumentKind::flow) flow = std::max(flow, thr);
        else pressure = std::max(pressure, thr);
    }
    if (flow > 0.0) policy.flow_threshold = flow;
    if (pressure > 0.0) policy.pressure_threshold = pressure;
    return policy;
}

// ---------------------------------------------------------------------------
// Shadow model
// ---------------------------------------------------------------------------

ShadowModel::ShadowModel(HydraulicModel model, ShadowConfig config, VotingPolicy policy)
    : model_(std::move(model)), config_(std::move(config)), policy_(policy) {
    policy_.validate();
    config_.solver.validate();
    const auto& pipe = model_.pipeline();
    const auto* pin = pipe.find_instrument(config_.inlet_pressure_id);
    const auto* mout = pipe.find_instrument(config_.outlet_flow_id);
    if (!pin || pin->kind != InstrumentKind::pressure) {
        throw ConfigError("/detector/inlet_pressure", "must name a pressure instrument");
    }
    if (!mout || mout->kind != InstrumentKind::flow) {
        throw ConfigError("/detector/outlet_flow", "must name a flow instrument");
    }
    if (config_.supply_temperature_id) {
        const auto* tin = pipe.find_instrument(*config_.supply_temperature_id);
        if (!tin || tin->kind != InstrumentKind::temperature) {
            throw ConfigError("/detector/supply_temperature", "must name a temperature instrument");
        }
    }
    if (config_.boundary_filter_polls < 1 || config_.indicator_filter_polls < 1) {
        throw ConfigError("/detector", "filter lengths must be >= 1");
    }
    indicators_ = make_indicators(model_, config_);
    indicator_buffers_.resize(indicators_.size());
}

std::optional<double> ShadowModel::update_filter(BoundaryFilter& f, std::optional<double> reading,
                                                 int window) {
    if (reading) {
        f.values.push_back(*reading);
        while (static_cast<int>(f.values.size()) > window) f.values.pop_front();
        f.stale_polls = 0;
    } else {
        ++f.stale_polls;
    }
    if (f.values.empty()) return std::nullopt;
    return std::accumulate(f.values.begin(), f.values.end(), 0.0) /
           static_cast<double>(f.values.size());
}

Discrepancy ShadowModel::step(const TelemetryFrame& frame) {
    const int wb = config_.boundary_filter_polls;
    const auto p_in = update_filter(inlet_p_, frame.good_value(config_.inlet_pressure_id), wb);
    const auto m_out = update_filter(outlet_m_, frame.good_value(config_.outlet_flow_id), wb);
    std::optional<double> t_sup = config_.default_supply_temperature;
    if (config_.supply_temperature_id) {
        t_sup = update_filter(supply_t_, frame.good_value(*config_.supply_temperature_id), wb);
    }

    Discrepancy d;
    d.poll_time = frame.poll_time;
    const std::size_t n_ind = indicators_.size();
    d.delta.resize(n_ind);
    d.indicator.resize(n_ind);
    d.normalized.resize(n_ind);
    d.modeled.resize(n_ind);
    d.measured.resize(n_ind);

    const int s = config_.staleness_polls;
    std::string stale;
    if (!p_in || inlet_p_.stale_polls > s) stale = config_.inlet_pressure_id;
    else if (!m_out || outlet_m_.stale_polls > s) stale = config_.outlet_flow_id;
    else if (!t_sup || (config_.supply_temperature_id && supply_t_.stale_polls > s)) {
        stale = *config_.supply_temperature_id;
    }

    if (!state_) {
        if (!stale.empty()) {
            d.status = "initializing: waiting for boundary reading " + stale;
            return d;
        }
        last_bc_.inlet = EndCondition::pressure(*p_in);
        last_bc_.outlet = EndCondition::mass_flow(*m_out);
        last_bc_.supply_temperature = *t_sup;
        state_ = steady_state(model_, last_bc_, {}, config_.solver);
        state_->t = frame.poll_time;
        polls_since_start_ = 0;
        d.status = "initializing";
        d.applied_bc = last_bc_;
        d.modeled_linepack = linepack(model_, *state_);
        return d;
    }

    BoundaryValues bc = last_bc_;
    if (stale.empty()) {
        bc.inlet.value = *p_in;
        bc.outlet.value = *m_out;
        bc.supply_temperature = *t_sup;
        if (suspended_) {
            suspended_ = false;
            polls_since_start_ = 0;
        }
    } else {
        suspended_ = true;
    }

    const double lp_before = linepack(model_, *state_);
    const double t0 = state_->t;
    const double span = frame.poll_time - t0;
    if (span > 0.0) {
        const auto steps = static_cast<int>(
            std::max(1.0, std::ceil(span / config_.solver.dt - 1e-9)));
        SolverSettings sub = config_.solver;
        sub.dt = span / steps;
        BoundaryConditions sched;
        const double t1 = frame.poll_time;
        sched.inlet = {EndKind::pressure, TimeSeries({{t0, last_bc_.inlet.value}, {t1, bc.inlet.value}}), 0.0};
        sched.outlet = {EndKind::mass_flow,
                        TimeSeries({{t0, last_bc_.outlet.value}, {t1, bc.outlet.value}}), 0.0};
        sched.supply_temperature =
            TimeSeries({{t0, last_bc_.supply_temperature}, {t1, bc.supply_temperature}});
        for (int k = 0; k < steps; ++k) *state_ = advance(model_, *state_, sched, {}, sub);
        state_->t = t1;  // remove round-off of the substep sum
    }
    last_bc_ = bc;
    d.applied_bc = bc;
    d.modeled_linepack = linepack(model_, *state_);
    d.modeled_linepack_rate = span > 0.0 ? (d.modeled_linepack - lp_before) / span : 0.0;

    ++polls_since_start_;
    for (std::size_t i = 0; i < n_ind; ++i) {
        const auto& ind = indicators_[i];
        const double modeled = ind.kind == InstrumentKind::flow
                                   ? mass_flow_at(model_, *state_, ind.node)
                                   : state_->p[ind.node];
        d.modeled[i] = modeled;
        const auto measured = frame.good_value(ind.instrument_id);
        d.measured[i] = measured;
        if (!measured) continue;
        d.delta[i] = *measured - modeled;
        auto& buf = indicator_buffers_[i];
        buf.push_back(*d.delta[i]);
        while (static_cast<int>(buf.size()) > config_.indicator_filter_polls) buf.pop_front();
        d.indicator[i] = std::accumulate(buf.begin(), buf.end(), 0.0) / static_cast<double>(buf.size());
        d.normalized[i] = *d.indicator[i] / policy_.threshold_for(ind.kind);
    }

    if (config_.inlet_flow_id) {
        const auto m_in_meas = frame.good_value(*config_.inlet_flow_id);
        const auto m_out_meas = frame.good_value(config_.outlet_flow_id);
        if (m_in_meas && m_out_meas) {
            d.imbalance = *m_in_meas - *m_out_meas - d.modeled_linepack_rate;
        }
    }

    if (suspended_) {
        d.status = "detection unavailable: stale boundary " + stale;
        d.available = false;
    } else if (polls_since_start_ <= config_.spin_up_polls) {
        d.status = "spin-up";
        d.available = false;
    } else {
        d.status = "ok";
        d.available = true;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Voting, sizing, location
// ---------------------------------------------------------------------------

bool exceeds(const Discrepancy& d, std::size_t indicator, const IndicatorSpec& spec,
             const VotingPolicy& policy) {
    if (!d.available || indicator >= d.indicator.size() || !d.indicator[indicator]) return false;
    const double v = *d.indicator[indicator];
    const double thr = policy.threshold_for(spec.kind);
    return policy.signed_indicators ? spec.leak_sign * v > thr : std::abs(v) > thr;
}

bool vote(std::span<const Discrepancy> history, std::span<const IndicatorSpec> indicators,
          const VotingPolicy& policy) {
    const auto m = static_cast<std::size_t>(policy.consecutive_required);
    if (history.size() < m) return false;
    const auto recent = history.last(m);
    int in_alarm = 0;
    for (std::size_t i = 0; i < indicators.size(); ++i) {
        const bool all = std::all_of(recent.begin(), recent.end(), [&](const Discrepancy& d) {
            return exceeds(d, i, indicators[i], policy);
        });
        if (all) ++in_alarm;
    }
    return in_alarm >= policy.min_indicators;
}

std::optional<double> size_leak(std::span<const Discrepancy> window) {
    double sum = 0.0;
    int n = 0;
    for (const auto& d : window) {
        if (!d.available || !d.imbalance) continue;
        sum += *d.imbalance;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

namespace {

double indicator_value(const HydraulicModel& model, const GridState& s, const IndicatorSpec& ind) {
    return ind.kind == InstrumentKind::flow ? mass_flow_at(model, s, ind.node) : s.p[ind.node];
}

}  // namespace

LocationResult locate_leak(const HydraulicModel& model, std::span<const Discrepancy> window,
                           std::span<const IndicatorSpec> indicators, const VotingPolicy& policy,
                           double leak_size, const SolverSettings& settings) {
    LocationResult result;
    const std::size_t n_ind = indicators.size();
    std::vector<double> mean_delta(n_ind, 0.0);
    std::vector<int> count(n_ind, 0);
    BoundaryValues bc;
    double p_in = 0.0, m_out = 0.0, t_sup = 0.0;
    int n_bc = 0;
    for (const auto& d : window) {
        if (!d.available) continue;
        for (std::size_t i = 0; i < n_ind && i < d.delta.size(); ++i) {
            if (d.delta[i]) {
                mean_delta[i] += *d.delta[i];
                ++count[i];
            }
        }
        p_in += d.applied_bc.inlet.value;
        m_out += d.applied_bc.outlet.value;
        t_sup += d.applied_bc.supply_temperature;
        ++n_bc;
    }
    if (n_bc == 0 || !(leak_size > 0.0)) {
        result.ambiguous = true;
        return result;
    }
    for (std::size_t i = 0; i < n_ind; ++i) {
        if (count[i] > 0) mean_delta[i] /= count[i];
    }
    bc.inlet = EndCondition::pressure(p_in / n_bc);
    bc.outlet = EndCondition::mass_flow(m_out / n_bc);
    bc.supply_temperature = t_sup / n_bc;

    const GridState base = steady_state(model, bc, {}, settings);
    const auto& x = model.grid().node_positions;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t node = 1; node + 1 < x.size(); ++node) {
        const LeakEvent leak{x[node], 0.0, leak_size};
        const GridState with_leak = steady_state(model, bc, std::span(&leak, 1), settings);
        double r = 0.0;
        for (std::size_t i = 0; i < n_ind; ++i) {
            if (count[i] == 0) continue;
            const double predicted = indicator_value(model, with_leak, indicators[i]) -
                                     indicator_value(model, base, indicators[i]);
            const double z = (mean_delta[i] - predicted) / policy.threshold_for(indicators[i].kind);
            r += z * z;
        }
        result.candidate_positions.push_back(x[node]);
        result.residuals.push_back(r);
        if (r < best) {
            best = r;
            result.node = node;
            result.position = x[node];
        }
    }
    if (result.residuals.empty()) {
        result.ambiguous = true;
        return result;
    }
    const auto [lo, hi] = std::minmax_element(result.residuals.begin(), result.residuals.end());
    // Flat within 1%, or no candidate moves the fit by more than a thousandth of a threshold.
    result.ambiguous = (*hi - *lo) <= std::max(0.01 * *hi, 1e-6);
    return result;
}

// ---------------------------------------------------------------------------
// Detector
// ---------------------------------------------------------------------------

RtmDetector::RtmDetector(HydraulicModel model, RtmConfig config)
    : config_(config), shadow_(std::move(model), config.shadow, config.policy) {
    if (config_.characterization_polls < 1) {
        throw ConfigError("/detector/characterization_polls", "must be >= 1");
    }
}

const Discrepancy& RtmDetector::process(const TelemetryFrame& frame) {
    history_.push_back(shadow_.step(frame));
    const bool alarm = vote(history_, shadow_.indicators(), config_.policy);
    alarm_trace_.push_back(alarm);
    const std::size_t idx = history_.size() - 1;
    if (alarm && !verdict_.declared) {
        verdict_.declared = true;
        verdict_.declared_time = frame.poll_time;
        alarm_index_ = idx;
        const auto m = static_cast<std::size_t>(config_.policy.consecutive_required);
        verdict_.size_at_alarm = size_leak(std::span(history_).last(m));
    }
    if (alarm_index_ && !characterized_ &&
        idx + 1 - *alarm_index_ >= static_cast<std::size_t>(config_.characterization_polls)) {
        characterize(*alarm_index_, idx);
    }
    return history_.back();
}

void RtmDetector::finalize() {
    if (alarm_index_ && !characterized_) characterize(*alarm_index_, history_.size() - 1);
}

void RtmDetector::characterize(std::size_t first, std::size_t last) {
    characterized_ = true;
    const auto window = std::span(history_).subspan(first, last - first + 1);
    verdict_.size_estimate = size_leak(window);
    if (!verdict_.size_estimate) {
        verdict_.notes.push_back("size unavailable: end flow readings missing");
        return;
    }
    if (!(*verdict_.size_estimate > 0.0)) {
        verdict_.notes.push_back("non-positive size estimate; location not attempted");
        return;
    }
    location_ = locate_leak(shadow_.model(), window, shadow_.indicators(), config_.policy,
                            *verdict_.size_estimate, config_.shadow.solver);
    verdict_.location_estimate = location_->position;
    verdict_.location_ambiguous = location_->ambiguous;
    if (location_->ambiguous) verdict_.notes.push_back("flat residual landscape: location ambiguous");
}

CombinedVerdict combine_verdicts(const LeakVerdict& rtm, std::span<const BalanceWindow> windows) {
    CombinedVerdict c;
    c.rtm_declared = rtm.declared;
    for (const auto& w : windows) {
        if (w.alarm) {
            c.balance_alarm_time = w.end;
            break;
        }
    }
    c.declared = c.rtm_declared || c.balance_alarm_time.has_value();
    c.confirmed = c.rtm_declared && c.balance_alarm_time.has_value();
    if (rtm.declared && (!c.balance_alarm_time || rtm.declared_time <= *c.balance_alarm_time)) {
        c.first_alarm_time = rtm.declared_time;
        c.first_source = "rtm";
    } else if (c.balance_alarm_time) {
        c.first_alarm_time = c.balance_alarm_time;
        c.first_source = "balance";
    }
    return c;
}

}  // namespace pipeleak
