#pragma once

#include <cmath>
#include <optional>
#include <variant>

namespace pipeleak {

/// Bulk-modulus liquid:
///   rho = rho0 * [1 + (P - P0)/B + alpha * (T - T0)]
/// alpha is signed; most liquids use a negative value so density falls with temperature.
struct LiquidEos {
    double rho0 = 1000.0;          // kg/m3
    double p0 = 0.0;               // Pa
    double t0 = 288.15;            // K
    double bulk_modulus = 2.0e9;   // Pa
    double alpha = -2.0e-4;        // 1/K

    void validate() const;
};

enum class ZMode { ideal, correlated };

/// Real gas P = rho R Z T with 1/Z - 1 = k P / T^y in correlated mode.
struct GasEos {
    double gas_constant = 500.0;   // J/(kg K)
    double y = 1.0;
    ZMode z_mode = ZMode::ideal;
    double k = 0.0;                // Pa^-1 K^y

    void validate() const;

    /// Chooses k so that Z(p_ref, t_ref) == z_ref.
    static double calibrate_k(double y, double p_ref, double t_ref, double z_ref);
};

struct CriticalPoint {
    double pressure;     // Pa
    double temperature;  // K
};

/// Immutable fluid description shared by the plant, the shadow model and the detectors.
class FluidModel {
public:
    using Eos = std::variant<LiquidEos, GasEos>;

    FluidModel(Eos eos, double specific_heat, double sound_speed_hint,
               std::optional<CriticalPoint> critical = std::nullopt);

    const Eos& eos() const noexcept { return eos_; }
    bool is_liquid() const noexcept { return std::holds_alternative<LiquidEos>(eos_); }
    double specific_heat() const noexcept { return specific_heat_; }
    double sound_speed_hint() const noexcept { return sound_speed_hint_; }
    const std::optional<CriticalPoint>& critical_point() const noexcept { return critical_; }

    /// Throws ConfigError when (P, T) lies within the near-critical band
    /// (reduced temperature in [0.9, 1.1] and reduced pressure in [0.8, 1.2]).
    void reject_near_critical(double pressure, double temperature) const;

private:
    Eos eos_;
    double specific_heat_;
    double sound_speed_hint_;
    std::optional<CriticalPoint> critical_;
};

double compressibility_z(const GasEos& gas, double pressure, double temperature);

/// Throws ParameterDomainError for a non-positive result.
double density(const FluidModel& fluid, double pressure, double temperature);

/// Inverse of density() at fixed temperature. Liquid: closed form. Gas: damped Newton,
/// at most 100 iterations, relative tolerance 1e-12; NumericalError on failure.
double pressure_from_density(const FluidModel& fluid, double rho, double temperature);

/// (dP/dT) at constant density, used by the compression-work term of the energy equation.
double dp_dt_const_density(const FluidModel& fluid, double pressure, double temperature);

// ---------------------------------------------------------------------------
// Generic evaluators. The solver instantiates these with a forward-mode dual
// number type to obtain exact Jacobians; the double overloads above wrap them.
// ---------------------------------------------------------------------------

namespace eos {

template <class S>
S liquid_density(const LiquidEos& liq, const S& p, const S& t) {
    return liq.rho0 * (1.0 + (p - liq.p0) / liq.bulk_modulus + liq.alpha * (t - liq.t0));
}

// With 1/Z = 1 + k P / T^y the density is explicit: rho = P (1 + k P / T^y) / (R T).
template <class S>
S gas_density(const GasEos& gas, const S& p, const S& t) {
    using std::pow;
    if (gas.z_mode == ZMode::ideal || gas.k == 0.0) return p / (gas.gas_constant * t);
    return p * (1.0 + gas.k * p / pow(t, gas.y)) / (gas.gas_constant * t);
}

template <class S>
S density(const FluidModel& fluid, const S& p, const S& t) {
    if (const auto* liq = std::get_if<LiquidEos>(&fluid.eos())) return liquid_density(*liq, p, t);
    return gas_density(std::get<GasEos>(fluid.eos()), p, t);
}

template <class S>
S dp_dt_const_density(const FluidModel& fluid, const S& p, const S& t) {
    using std::pow;
    if (const auto* liq = std::get_if<LiquidEos>(&fluid.eos())) {
        return S(-liq->alpha * liq->bulk_modulus);
    }
    const auto& gas = std::get<GasEos>(fluid.eos());
    const double r = gas.gas_constant;
    const double k = gas.z_mode == ZMode::ideal ? 0.0 : gas.k;
    const S ty = pow(t, gas.y);
    const S drho_dp = (1.0 + 2.0 * k * p / ty) / (r * t);
    const S drho_dt = -p / (r * t * t) - (gas.y + 1.0) * k * p * p / (r * ty * t * t);
    return -drho_dt / drho_dp;
}

}  // namespace eos

}  // namespace pipeleak
