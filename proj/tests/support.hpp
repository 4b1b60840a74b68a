// Shared fixtures: the standard desk line and a plant-plus-detector loop.
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "pipeleak/balance_detect.hpp"
#include "pipeleak/fluid.hpp"
#include "pipeleak/hydraulics.hpp"
#include "pipeleak/network.hpp"
#include "pipeleak/rtm_detect.hpp"
#include "pipeleak/telemetry.hpp"

namespace support {

using namespace pipeleak;

inline constexpr double kLength = 10000.0;
inline constexpr double kDiameter = 0.3;
inline constexpr double kFriction = 0.02;
inline constexpr double kInletPressure = 6e5;
inline constexpr double kExternalPressure = 1.5e5;
inline constexpr double kValveCv = 0.2067;
inline constexpr double kT0 = 288.15;

inline FluidModel water() {
    LiquidEos liq;
    liq.rho0 = 1000.0;
    liq.p0 = 1e5;
    liq.t0 = kT0;
    liq.bulk_modulus = 2e9;
    liq.alpha = -2e-4;
    return FluidModel(liq, 4180.0, std::sqrt(2e9 / 1000.0));
}

inline InstrumentPlacement instrument(const char* id, InstrumentKind kind, double x, double lo, double hi,
                                      double noise_fraction) {
    InstrumentPlacement ins;
    ins.id = id;
    ins.kind = kind;
    ins.position = x;
    ins.range_min = lo;
    ins.range_max = hi;
    ins.noise_sigma = noise_fraction * (hi - lo);
    return ins;
}

inline PipelineSpec desk_spec(double noise_fraction = 0.0) {
    PipelineSpec spec;
    spec.length = kLength;
    spec.defaults.diameter = kDiameter;
    spec.defaults.friction_factor = kFriction;
    spec.defaults.heat_transfer_u = 0.0;
    spec.defaults.ground_temperature = kT0;
    spec.instruments = {
        instrument("PT-in", InstrumentKind::pressure, 0.0, 0.0, 1e6, noise_fraction),
        instrument("FT-in", InstrumentKind::flow, 0.0, 0.0, 100.0, noise_fraction),
        instrument("TT-in", InstrumentKind::temperature, 0.0, 250.0, 350.0, noise_fraction),
        instrument("PT-out", InstrumentKind::pressure, kLength, 0.0, 1e6, noise_fraction),
        instrument("FT-out", InstrumentKind::flow, kLength, 0.0, 100.0, noise_fraction),
    };
    return spec;
}

inline HydraulicModel desk_model(double noise_fraction = 0.0, double dx = 250.0) {
    PipelineModel pipe(desk_spec(noise_fraction));
    Grid grid = discretize(pipe, dx);
    return HydraulicModel(pipe, water(), grid);
}

inline BoundaryValues desk_bc() {
    BoundaryValues bc;
    bc.inlet = EndCondition::pressure(kInletPressure);
    bc.outlet = EndCondition::valve(kExternalPressure, kValveCv);
    bc.supply_temperature = kT0;
    return bc;
}

inline ShadowConfig desk_shadow() {
    ShadowConfig cfg;
    cfg.inlet_pressure_id = "PT-in";
    cfg.outlet_flow_id = "FT-out";
    cfg.inlet_flow_id = "FT-in";
    cfg.supply_temperature_id = "TT-in";
    return cfg;
}

inline RtmConfig desk_rtm(const HydraulicModel& model) {
    RtmConfig cfg;
    cfg.shadow = desk_shadow();
    cfg.policy = default_policy(model, cfg.shadow);
    return cfg;
}

inline LeakEvent leak(double x, double start, double q) {
    LeakEvent e;
    e.position = x;
    e.start_time = start;
    e.mass_rate = q;
    return e;
}

/// Rated flow of the desk line: the steady valve-limited throughput.
inline double rated_flow() {
    const auto model = desk_model();
    const auto s = steady_state(model, desk_bc());
    return mass_flow_at(model, s, 0);
}

struct LoopResult {
    std::vector<TelemetryFrame> frames;          // after the plausibility filter
    std::vector<double> plant_linepack;          // per poll
    std::vector<MassLedgerEntry> ledger;         // per plant step
};

/// Plant simulation sampled every poll_interval, filtered, and fed to `on_frame`.
template <class OnFrame>
LoopResult run_plant(const HydraulicModel& model, const BoundaryValues& bc, const std::vector<LeakEvent>& leaks,
                     std::uint64_t seed, double horizon, double poll_interval, OnFrame&& on_frame,
                     bool keep_frames = false) {
    LoopResult out;
    SolverSettings settings;
    const auto bcs = BoundaryConditions::constant(bc);
    GridState state = steady_state(model, bc);
    NoiseSpec noise{seed};
    PlausibilityHistory hist;
    const auto limits = PlausibilityConfig::defaults();
    const long substeps = std::lround(poll_interval / settings.dt);
    const long polls = std::lround(horizon / poll_interval);
    for (long k = 0; k <= polls; ++k) {
        const double t = static_cast<double>(k) * poll_interval;
        if (k > 0) {
            for (long s = 0; s < substeps; ++s) {
                auto step = advance_with_ledger(model, state, bcs, leaks, settings);
                state = std::move(step.state);
                out.ledger.push_back(step.ledger);
            }
            state.t = t;
        }
        const auto raw = sample(model, state, model.pipeline().instruments(), noise, t);
        auto frame = plausibility_filter(raw, model.pipeline().instruments(), hist, limits);
        out.plant_linepack.push_back(linepack(model, state));
        on_frame(frame);
        if (keep_frames) out.frames.push_back(std::move(frame));
    }
    return out;
}

/// Standard desk run of the real-time model detector.
inline RtmDetector run_rtm(double noise_fraction, const std::vector<LeakEvent>& leaks, std::uint64_t seed,
                           double horizon, std::optional<RtmConfig> config = std::nullopt) {
    const auto model = desk_model(noise_fraction);
    RtmDetector det(model, config.value_or(desk_rtm(model)));
    run_plant(model, desk_bc(), leaks, seed, horizon, 5.0, [&](const TelemetryFrame& f) { det.process(f); });
    det.finalize();
    return det;
}

}  // namespace support
