#include "pipeleak/fluid.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "pipeleak/errors.hpp"

namespace pipeleak {

void LiquidEos::validate() const {
    if (!(rho0 > 0.0)) throw ParameterDomainError("liquid: rho0 must be > 0");
    if (!(bulk_modulus > 0.0)) throw ParameterDomainError("liquid: bulk modulus must be > 0");
    if (!(t0 > 0.0)) throw ParameterDomainError("liquid: T0 must be > 0");
    if (!(p0 >= 0.0)) throw ParameterDomainError("liquid: P0 must be >= 0");
    if (!std::isfinite(alpha)) throw ParameterDomainError("liquid: alpha must be finite");
}

void GasEos::validate() const {
    if (!(gas_constant > 0.0)) throw ParameterDomainError("gas: R must be > 0");
    if (!(y > 0.0)) throw ParameterDomainError("gas: y must be > 0");
    if (z_mode == ZMode::correlated && !(k >= 0.0)) {
        throw ParameterDomainError("gas: correlation constant k must be >= 0");
    }
}

double GasEos::calibrate_k(double y, double p_ref, double t_ref, double z_ref) {
    if (!(p_ref > 0.0) || !(t_ref > 0.0)) {
        throw ParameterDomainError("gas: Z reference point needs P > 0 and T > 0");
    }
    if (!(z_ref > 0.0) || z_ref > 1.0) {
        throw ParameterDomainError("gas: Z reference value must lie in (0, 1]");
    }
    return (1.0 / z_ref - 1.0) * std::pow(t_ref, y) / p_ref;
}

FluidModel::FluidModel(Eos eos, double specific_heat, double sound_speed_hint,
                       std::optional<CriticalPoint> critical)
    : eos_(std::move(eos)),
      specific_heat_(specific_heat),
      sound_speed_hint_(sound_speed_hint),
      critical_(critical) {
    std::visit([](const auto& e) { e.validate(); }, eos_);
    if (!(specific_heat_ > 0.0)) throw ParameterDomainError("fluid: specific heat must be > 0");
    if (!(sound_speed_hint_ > 0.0)) throw ParameterDomainError("fluid: sound speed must be > 0");
    if (critical_ && (!(critical_->pressure > 0.0) || !(critical_->temperature > 0.0))) {
        throw ParameterDomainError("fluid: critical point must be positive");
    }
}

void FluidModel::reject_near_critical(double pressure, double temperature) const {
    if (!critical_) return;
    const double pr = pressure / critical_->pressure;
    const double tr = temperature / critical_->temperature;
    if (tr >= 0.9 && tr <= 1.1 && pr >= 0.8 && pr <= 1.2) {
        std::ostringstream msg;
        msg << "operating point P=" << pressure << " Pa, T=" << temperature
            << " K is near the critical point (Pr=" << pr << ", Tr=" << tr << ")";
        throw ConfigError("/fluid/critical_point", msg.str());
    }
}

double compressibility_z(const GasEos& gas, double pressure, double temperature) {
    if (gas.z_mode == ZMode::ideal) return 1.0;
    return 1.0 / (1.0 + gas.k * pressure / std::pow(temperature, gas.y));
}

double density(const FluidModel& fluid, double pressure, double temperature) {
    if (!(temperature > 0.0)) throw DomainError("density: temperature must be > 0");
    if (!(pressure >= 0.0)) throw DomainError("density: pressure must be >= 0");
    const double rho = eos::density(fluid, pressure, temperature);
    if (!(rho > 0.0)) {
        std::ostringstream msg;
        msg << "density: non-positive density " << rho << " at P=" << pressure
            << " Pa, T=" << temperature << " K";
        throw ParameterDomainError(msg.str());
    }
    return rho;
}

double dp_dt_const_density(const FluidModel& fluid, double pressure, double temperature) {
    return eos::dp_dt_const_density(fluid, pressure, temperature);
}

namespace {

double invert_gas(const GasEos& gas, double rho, double temperature) {
    constexpr int kMaxIter = 100;
    constexpr double kTol = 1e-12;
    const double r = gas.gas_constant;
    const double ty = std::pow(temperature, gas.y);

    // f(P) = P (1 + kP/T^y) - rho R T, monotone for P >= 0.
    const double target = rho * r * temperature;
    double p = target;  // ideal-gas starting point (upper bound of the root)
    std::vector<double> history;
    for (int it = 0; it < kMaxIter; ++it) {
        const double f = p * (1.0 + gas.k * p / ty) - target;
        const double df = 1.0 + 2.0 * gas.k * p / ty;
        double step = f / df;
        // Damping keeps the iterate positive.
        while (p - step <= 0.0) step *= 0.5;
        p -= step;
        const double rel = std::abs(step) / p;
        history.push_back(rel);
        if (rel < kTol) return p;
    }
    throw NumericalError("pressure_from_density: gas inversion did not converge", history);
}

}  // namespace

double pressure_from_density(const FluidModel& fluid, double rho, double temperature) {
    if (!(rho > 0.0)) throw DomainError("pressure_from_density: density must be > 0");
    if (!(temperature > 0.0)) throw DomainError("pressure_from_density: temperature must be > 0");
    if (const auto* liq = std::get_if<LiquidEos>(&fluid.eos())) {
        return liq->p0 +
               liq->bulk_modulus * (rho / liq->rho0 - 1.0 - liq->alpha * (temperature - liq->t0));
    }
    const auto& gas = std::get<GasEos>(fluid.eos());
    if (gas.z_mode == ZMode::ideal || gas.k == 0.0) return rho * gas.gas_constant * temperature;
    return invert_gas(gas, rho, temperature);
}

}  // namespace pipeleak
