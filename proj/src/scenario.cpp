#include "pipeleak/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <initializer_list>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "pipeleak/errors.hpp"
#include "pipeleak/report.hpp"

namespace pipeleak {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// configuration reading

namespace {

struct Units {
    double pressure = 1.0;     // to Pa
    double length = 1.0;       // to m
    double mass_flow = 1.0;    // to kg/s
    double temp_offset = 0.0;  // to K (absolute temperatures only)
};

std::string join(const std::string& path, std::string_view key) {
    return path + "/" + std::string(key);
}

std::string join(const std::string& path, std::size_t index) {
    return path + "/" + std::to_string(index);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ConfigError(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(join(path, key), "unknown key");
    }
}

const json* child(const json& obj, std::string_view key) {
    auto it = obj.find(std::string(key));
    return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
    return d;
}

std::optional<double> opt_number(const json& obj, std::string_view key, const std::string& path,
                                 double scale = 1.0, double offset = 0.0) {
    const json* v = child(obj, key);
    if (!v) return std::nullopt;
    return as_number(*v, join(path, key)) * scale + offset;
}

// fallback is already in SI units
double number(const json& obj, std::string_view key, const std::string& path, double fallback,
              double scale = 1.0, double offset = 0.0) {
    return opt_number(obj, key, path, scale, offset).value_or(fallback);
}

double required_number(const json& obj, std::string_view key, const std::string& path,
                       double scale = 1.0, double offset = 0.0) {
    auto v = opt_number(obj, key, path, scale, offset);
    if (!v) throw ConfigError(join(path, key), "required");
    return *v;
}

int integer(const json& obj, std::string_view key, const std::string& path, int fallback) {
    const json* v = child(obj, key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
    return v->get<int>();
}

bool boolean(const json& obj, std::string_view key, const std::string& path, bool fallback) {
    const json* v = child(obj, key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(join(path, key), "expected true or false");
    return v->get<bool>();
}

std::optional<std::string> opt_string(const json& obj, std::string_view key, const std::string& path) {
    const json* v = child(obj, key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ConfigError(join(path, key), "expected a string");
    return v->get<std::string>();
}

void require_positive(double v, const std::string& path) {
    if (!(v > 0.0)) throw ConfigError(path, "must be positive");
}

Units read_units(const json& root) {
    Units u;
    const json* j = child(root, "units");
    if (!j) return u;
    const std::string path = "/units";
    check_keys(*j, path, {"pressure", "length", "mass_flow", "temperature"});
    if (auto s = opt_string(*j, "pressure", path)) {
        if (*s == "Pa") u.pressure = 1.0;
        else if (*s == "kPa") u.pressure = 1e3;
        else if (*s == "MPa") u.pressure = 1e6;
        else if (*s == "bar") u.pressure = 1e5;
        else if (*s == "psi") u.pressure = 6894.757293168361;
        else throw ConfigError(path + "/pressure", "unknown unit '" + *s + "' (Pa, kPa, MPa, bar, psi)");
    }
    if (auto s = opt_string(*j, "length", path)) {
        if (*s == "m") u.length = 1.0;
        else if (*s == "km") u.length = 1e3;
        else if (*s == "ft") u.length = 0.3048;
        else if (*s == "mi") u.length = 1609.344;
        else throw ConfigError(path + "/length", "unknown unit '" + *s + "' (m, km, ft, mi)");
    }
    if (auto s = opt_string(*j, "mass_flow", path)) {
        if (*s == "kg/s") u.mass_flow = 1.0;
        else if (*s == "kg/h") u.mass_flow = 1.0 / 3600.0;
        else if (*s == "t/h") u.mass_flow = 1000.0 / 3600.0;
        else throw ConfigError(path + "/mass_flow", "unknown unit '" + *s + "' (kg/s, kg/h, t/h)");
    }
    if (auto s = opt_string(*j, "temperature", path)) {
        if (*s == "K") u.temp_offset = 0.0;
        else if (*s == "C") u.temp_offset = 273.15;
        else throw ConfigError(path + "/temperature", "unknown unit '" + *s + "' (K, C)");
    }
    return u;
}

FluidModel read_fluid(const json& root, const Units& u) {
    const json* j = child(root, "fluid");
    if (!j) throw ConfigError("/fluid", "required");
    const std::string path = "/fluid";
    const auto type = opt_string(*j, "type", path).value_or("liquid");
    std::optional<CriticalPoint> critical;
    if (const json* c = child(*j, "critical_point")) {
        const std::string cp = path + "/critical_point";
        check_keys(*c, cp, {"pressure", "temperature"});
        critical = CriticalPoint{required_number(*c, "pressure", cp, u.pressure),
                                 required_number(*c, "temperature", cp, 1.0, u.temp_offset)};
        require_positive(critical->pressure, cp + "/pressure");
        require_positive(critical->temperature, cp + "/temperature");
    }
    const double cp_heat = number(*j, "specific_heat", path, type == "gas" ? 2200.0 : 4180.0);
    require_positive(cp_heat, path + "/specific_heat");

    if (type == "liquid") {
        check_keys(*j, path, {"type", "density", "reference_pressure", "reference_temperature",
                              "bulk_modulus", "thermal_expansion", "specific_heat", "sound_speed",
                              "critical_point"});
        LiquidEos liq;
        liq.rho0 = number(*j, "density", path, liq.rho0);
        liq.p0 = number(*j, "reference_pressure", path, 1e5, u.pressure);
        liq.t0 = number(*j, "reference_temperature", path, liq.t0, 1.0, u.temp_offset);
        liq.bulk_modulus = number(*j, "bulk_modulus", path, liq.bulk_modulus, u.pressure);
        liq.alpha = number(*j, "thermal_expansion", path, liq.alpha);
        require_positive(liq.rho0, path + "/density");
        require_positive(liq.bulk_modulus, path + "/bulk_modulus");
        const double a = number(*j, "sound_speed", path, std::sqrt(liq.bulk_modulus / liq.rho0));
        require_positive(a, path + "/sound_speed");
        try {
            return FluidModel(liq, cp_heat, a, critical);
        } catch (const ParameterDomainError& e) {
            throw ConfigError(path, e.what());
        }
    }
    if (type == "gas") {
        check_keys(*j, path, {"type", "gas_constant", "y", "z_mode", "k", "z_reference",
                              "specific_heat", "sound_speed", "critical_point"});
        GasEos gas;
        gas.gas_constant = number(*j, "gas_constant", path, gas.gas_constant);
        gas.y = number(*j, "y", path, gas.y);
        const auto mode = opt_string(*j, "z_mode", path).value_or("ideal");
        if (mode == "ideal") gas.z_mode = ZMode::ideal;
        else if (mode == "correlated") gas.z_mode = ZMode::correlated;
        else throw ConfigError(path + "/z_mode", "expected 'ideal' or 'correlated'");
        if (child(*j, "k") && child(*j, "z_reference"))
            throw ConfigError(path + "/k", "give either k or z_reference, not both");
        // k multiplies P, so its stored value scales inversely with the pressure unit
        gas.k = number(*j, "k", path, 0.0, 1.0 / u.pressure);
        if (const json* zr = child(*j, "z_reference")) {
            const std::string zp = path + "/z_reference";
            check_keys(*zr, zp, {"pressure", "temperature", "z"});
            try {
                gas.k = GasEos::calibrate_k(gas.y, required_number(*zr, "pressure", zp, u.pressure),
                                            required_number(*zr, "temperature", zp, 1.0, u.temp_offset),
                                            required_number(*zr, "z", zp));
            } catch (const ParameterDomainError& e) {
                throw ConfigError(zp, e.what());
            }
        }
        const double a = number(*j, "sound_speed", path, std::sqrt(gas.gas_constant * 288.15));
        require_positive(a, path + "/sound_speed");
        try {
            return FluidModel(gas, cp_heat, a, critical);
        } catch (const ParameterDomainError& e) {
            throw ConfigError(path, e.what());
        }
    }
    throw ConfigError(path + "/type", "expected 'liquid' or 'gas'");
}

PipelineSpec read_pipeline(const json& root, const Units& u) {
    const json* j = child(root, "pipeline");
    if (!j) throw ConfigError("/pipeline", "required");
    const std::string path = "/pipeline";
    check_keys(*j, path, {"length", "diameter", "friction_factor", "heat_transfer_u",
                          "ground_temperature", "segments", "elevation"});
    PipelineSpec spec;
    spec.length = required_number(*j, "length", path, u.length);
    spec.defaults.diameter = number(*j, "diameter", path, spec.defaults.diameter);
    spec.defaults.friction_factor = number(*j, "friction_factor", path, spec.defaults.friction_factor);
    spec.defaults.heat_transfer_u = number(*j, "heat_transfer_u", path, spec.defaults.heat_transfer_u);
    spec.defaults.ground_temperature = number(*j, "ground_temperature", path,
                                              spec.defaults.ground_temperature, 1.0, u.temp_offset);
    if (const json* segs = child(*j, "segments")) {
        if (!segs->is_array()) throw ConfigError(path + "/segments", "expected an array");
        for (std::size_t i = 0; i < segs->size(); ++i) {
            const auto& s = (*segs)[i];
            const std::string sp = join(path + "/segments", i);
            check_keys(s, sp, {"start", "end", "diameter", "friction_factor", "heat_transfer_u",
                               "ground_temperature"});
            SegmentOverride o;
            o.start = required_number(s, "start", sp, u.length);
            o.end = required_number(s, "end", sp, u.length);
            o.diameter = opt_number(s, "diameter", sp);
            o.friction_factor = opt_number(s, "friction_factor", sp);
            o.heat_transfer_u = opt_number(s, "heat_transfer_u", sp);
            o.ground_temperature = opt_number(s, "ground_temperature", sp, 1.0, u.temp_offset);
            spec.overrides.push_back(o);
        }
    }
    if (const json* el = child(*j, "elevation")) {
        if (!el->is_array()) throw ConfigError(path + "/elevation", "expected an array");
        for (std::size_t i = 0; i < el->size(); ++i) {
            const auto& p = (*el)[i];
            const std::string ep = join(path + "/elevation", i);
            if (p.is_array() && p.size() == 2) {
                spec.elevation.push_back({as_number(p[0], ep + "/0") * u.length,
                                          as_number(p[1], ep + "/1") * u.length});
            } else {
                check_keys(p, ep, {"x", "h"});
                spec.elevation.push_back({required_number(p, "x", ep, u.length),
                                          required_number(p, "h", ep, u.length)});
            }
        }
    }
    return spec;
}

// scale and offset of an instrument's reading unit
std::pair<double, double> reading_unit(InstrumentKind kind, const Units& u) {
    switch (kind) {
        case InstrumentKind::flow: return {u.mass_flow, 0.0};
        case InstrumentKind::pressure:
        case InstrumentKind::acoustic: return {u.pressure, 0.0};
        case InstrumentKind::temperature: return {1.0, u.temp_offset};
    }
    return {1.0, 0.0};
}

std::vector<InstrumentPlacement> read_instruments(const json& root, const Units& u) {
    std::vector<InstrumentPlacement> out;
    const json* j = child(root, "instruments");
    if (!j) throw ConfigError("/instruments", "required");
    if (!j->is_array()) throw ConfigError("/instruments", "expected an array");
    for (std::size_t i = 0; i < j->size(); ++i) {
        const auto& s = (*j)[i];
        const std::string ip = join("/instruments", i);
        check_keys(s, ip, {"id", "kind", "position", "range", "noise_sigma", "noise_fraction", "bias",
                           "dropout", "trigger_threshold", "timestamp_resolution"});
        InstrumentPlacement ins;
        auto id = opt_string(s, "id", ip);
        if (!id || id->empty()) throw ConfigError(ip + "/id", "required");
        ins.id = *id;
        for (const auto& other : out) {
            if (other.id == ins.id) throw ConfigError(ip + "/id", "duplicate instrument id " + ins.id);
        }
        const auto kind_name = opt_string(s, "kind", ip);
        if (!kind_name) throw ConfigError(ip + "/kind", "required");
        auto kind = instrument_kind_from_string(*kind_name);
        if (!kind) throw ConfigError(ip + "/kind", "expected flow, pressure, temperature or acoustic");
        ins.kind = *kind;
        const auto [scale, offset] = reading_unit(ins.kind, u);
        ins.position = required_number(s, "position", ip, u.length);

        const json* range = child(s, "range");
        if (!range || !range->is_array() || range->size() != 2)
            throw ConfigError(ip + "/range", "required as [min, max]");
        ins.range_min = as_number((*range)[0], ip + "/range/0") * scale + offset;
        ins.range_max = as_number((*range)[1], ip + "/range/1") * scale + offset;
        if (!(ins.range_max > ins.range_min)) throw ConfigError(ip + "/range", "max must exceed min");

        if (child(s, "noise_sigma") && child(s, "noise_fraction"))
            throw ConfigError(ip + "/noise_sigma", "give either noise_sigma or noise_fraction");
        ins.noise_sigma = number(s, "noise_sigma", ip, 0.0, scale);
        if (auto f = opt_number(s, "noise_fraction", ip)) ins.noise_sigma = *f * ins.span();
        if (ins.noise_sigma < 0.0) throw ConfigError(ip + "/noise_sigma", "must be non-negative");
        ins.bias = number(s, "bias", ip, 0.0, scale);
        ins.dropout_prob = number(s, "dropout", ip, 0.0);
        if (ins.dropout_prob < 0.0 || ins.dropout_prob > 1.0)
            throw ConfigError(ip + "/dropout", "must lie in [0, 1]");
        ins.trigger_threshold = number(s, "trigger_threshold", ip, 0.0, u.pressure);
        ins.timestamp_resolution = number(s, "timestamp_resolution", ip, 0.0);
        if (ins.kind == InstrumentKind::acoustic) {
            require_positive(ins.trigger_threshold, ip + "/trigger_threshold");
            if (ins.timestamp_resolution < 0.0)
                throw ConfigError(ip + "/timestamp_resolution", "must be non-negative");
        }
        out.push_back(std::move(ins));
    }
    return out;
}

TimeSeries read_series(const json& v, const std::string& path, double scale, double offset) {
    if (v.is_number()) return TimeSeries(as_number(v, path) * scale + offset);
    if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a number or [[t, value], ...]");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const std::string pp = join(path, i);
        if (!p.is_array() || p.size() != 2) throw ConfigError(pp, "expected [t, value]");
        pts.emplace_back(as_number(p[0], pp + "/0"), as_number(p[1], pp + "/1") * scale + offset);
        if (i > 0 && !(pts[i].first > pts[i - 1].first))
            throw ConfigError(pp + "/0", "schedule times must be strictly increasing");
    }
    return TimeSeries(std::move(pts));
}

EndSchedule read_end(const json& j, const std::string& path, const Units& u) {
    check_keys(j, path, {"kind", "value", "external_pressure", "cv"});
    EndSchedule e;
    const auto kind = opt_string(j, "kind", path);
    if (!kind) throw ConfigError(path + "/kind", "required");
    if (*kind == "pressure") {
        e.kind = EndKind::pressure;
        const json* v = child(j, "value");
        if (!v) throw ConfigError(path + "/value", "required");
        e.value = read_series(*v, path + "/value", u.pressure, 0.0);
    } else if (*kind == "mass_flow") {
        e.kind = EndKind::mass_flow;
        const json* v = child(j, "value");
        if (!v) throw ConfigError(path + "/value", "required");
        e.value = read_series(*v, path + "/value", u.mass_flow, 0.0);
    } else if (*kind == "valve") {
        e.kind = EndKind::valve;
        const json* v = child(j, "external_pressure");
        if (!v) throw ConfigError(path + "/external_pressure", "required");
        e.value = read_series(*v, path + "/external_pressure", u.pressure, 0.0);
        e.valve_cv = required_number(j, "cv", path);
        require_positive(e.valve_cv, path + "/cv");
    } else {
        throw ConfigError(path + "/kind", "expected pressure, mass_flow or valve");
    }
    return e;
}

BoundaryConditions read_boundary(const json& root, const Units& u) {
    const json* j = child(root, "boundary");
    if (!j) throw ConfigError("/boundary", "required");
    const std::string path = "/boundary";
    check_keys(*j, path, {"inlet", "outlet", "supply_temperature"});
    BoundaryConditions bc;
    const json* in = child(*j, "inlet");
    const json* out = child(*j, "outlet");
    if (!in) throw ConfigError(path + "/inlet", "required");
    if (!out) throw ConfigError(path + "/outlet", "required");
    bc.inlet = read_end(*in, path + "/inlet", u);
    bc.outlet = read_end(*out, path + "/outlet", u);
    if (bc.inlet.kind == EndKind::mass_flow && bc.outlet.kind == EndKind::mass_flow)
        throw ConfigError(path, "at least one end must fix pressure (pressure or valve)");
    if (const json* t = child(*j, "supply_temperature"))
        bc.supply_temperature = read_series(*t, path + "/supply_temperature", 1.0, u.temp_offset);
    return bc;
}

std::vector<LeakEvent> read_leaks(const json& root, const Units& u, double length, double horizon) {
    std::vector<LeakEvent> out;
    const json* j = child(root, "leaks");
    if (!j) return out;
    if (!j->is_array()) throw ConfigError("/leaks", "expected an array");
    for (std::size_t i = 0; i < j->size(); ++i) {
        const std::string lp = join("/leaks", i);
        const auto& l = (*j)[i];
        check_keys(l, lp, {"position", "start_time", "mass_rate"});
        LeakEvent e;
        e.position = required_number(l, "position", lp, u.length);
        e.start_time = required_number(l, "start_time", lp);
        e.mass_rate = required_number(l, "mass_rate", lp, u.mass_flow);
        if (e.position < 0.0 || e.position > length)
            throw ConfigError(lp + "/position", "leak must lie on the line");
        if (e.start_time < 0.0 || e.start_time > horizon)
            throw ConfigError(lp + "/start_time", "must lie within [0, horizon]");
        if (!(e.mass_rate >= 0.0)) throw ConfigError(lp + "/mass_rate", "must be non-negative");
        out.push_back(e);
    }
    return out;
}

const InstrumentPlacement* instrument_at(const std::vector<InstrumentPlacement>& instruments,
                                         InstrumentKind kind, double x) {
    for (const auto& ins : instruments) {
        if (ins.kind == kind && ins.position == x) return &ins;
    }
    return nullptr;
}

std::string resolve_id(const json* obj, std::string_view key, const std::string& path,
                       const std::vector<InstrumentPlacement>& instruments, InstrumentKind kind,
                       double default_position, bool required) {
    std::optional<std::string> id;
    if (obj) id = opt_string(*obj, key, path);
    if (id) {
        auto it = std::find_if(instruments.begin(), instruments.end(),
                               [&](const auto& ins) { return ins.id == *id; });
        if (it == instruments.end()) throw ConfigError(join(path, key), "no instrument named " + *id);
        if (it->kind != kind)
            throw ConfigError(join(path, key), *id + " is not a " + std::string(to_string(kind)) + " instrument");
        return *id;
    }
    if (const auto* ins = instrument_at(instruments, kind, default_position)) return ins->id;
    if (required) {
        std::ostringstream msg;
        msg << "required: no " << to_string(kind) << " instrument at " << default_position << " m";
        throw ConfigError(join(path, key), msg.str());
    }
    return {};
}

DetectorSettings read_detector(const json& root, const Scenario& sc) {
    DetectorSettings d;
    const json* j = child(root, "detector");
    const std::string path = "/detector";
    if (j) {
        check_keys(*j, path, {"enabled", "inlet_pressure", "outlet_flow", "inlet_flow",
                              "supply_temperature", "flow_threshold", "pressure_threshold", "k_sigma",
                              "floor_fraction", "consecutive_required", "min_indicators", "signed",
                              "boundary_filter_polls", "indicator_filter_polls", "staleness_polls",
                              "spin_up_polls", "characterization_polls"});
        d.enabled = boolean(*j, "enabled", path, true);
    }
    if (!d.enabled) return d;
    const auto& ins = sc.pipeline.instruments;
    const double length = sc.pipeline.length;
    d.shadow.inlet_pressure_id = resolve_id(j, "inlet_pressure", path, ins, InstrumentKind::pressure, 0.0, true);
    d.shadow.outlet_flow_id = resolve_id(j, "outlet_flow", path, ins, InstrumentKind::flow, length, true);
    if (auto id = resolve_id(j, "inlet_flow", path, ins, InstrumentKind::flow, 0.0, false); !id.empty())
        d.shadow.inlet_flow_id = id;
    if (auto id = resolve_id(j, "supply_temperature", path, ins, InstrumentKind::temperature, 0.0, false);
        !id.empty())
        d.shadow.supply_temperature_id = id;
    d.shadow.default_supply_temperature = sc.boundary.supply_temperature.at(0.0);
    d.shadow.solver = sc.solver;
    if (!j) return d;

    const Units u = read_units(root);
    d.flow_threshold = opt_number(*j, "flow_threshold", path, u.mass_flow);
    d.pressure_threshold = opt_number(*j, "pressure_threshold", path, u.pressure);
    if (d.flow_threshold) require_positive(*d.flow_threshold, path + "/flow_threshold");
    if (d.pressure_threshold) require_positive(*d.pressure_threshold, path + "/pressure_threshold");
    d.k_sigma = number(*j, "k_sigma", path, d.k_sigma);
    require_positive(d.k_sigma, path + "/k_sigma");
    d.floor_fraction = number(*j, "floor_fraction", path, d.floor_fraction);
    if (d.floor_fraction < 0.0) throw ConfigError(path + "/floor_fraction", "must be non-negative");
    d.consecutive_required = integer(*j, "consecutive_required", path, d.consecutive_required);
    d.min_indicators = integer(*j, "min_indicators", path, d.min_indicators);
    if (d.consecutive_required < 1) throw ConfigError(path + "/consecutive_required", "must be >= 1");
    if (d.min_indicators < 1) throw ConfigError(path + "/min_indicators", "must be >= 1");
    d.signed_indicators = boolean(*j, "signed", path, d.signed_indicators);
    auto& s = d.shadow;
    s.boundary_filter_polls = integer(*j, "boundary_filter_polls", path, s.boundary_filter_polls);
    s.indicator_filter_polls = integer(*j, "indicator_filter_polls", path, s.indicator_filter_polls);
    s.staleness_polls = integer(*j, "staleness_polls", path, s.staleness_polls);
    s.spin_up_polls = integer(*j, "spin_up_polls", path, s.spin_up_polls);
    if (s.boundary_filter_polls < 1) throw ConfigError(path + "/boundary_filter_polls", "must be >= 1");
    if (s.indicator_filter_polls < 1) throw ConfigError(path + "/indicator_filter_polls", "must be >= 1");
    if (s.staleness_polls < 0) throw ConfigError(path + "/staleness_polls", "must be >= 0");
    if (s.spin_up_polls < 0) throw ConfigError(path + "/spin_up_polls", "must be >= 0");
    d.characterization_polls = integer(*j, "characterization_polls", path, d.characterization_polls);
    if (d.characterization_polls < 1) throw ConfigError(path + "/characterization_polls", "must be >= 1");
    return d;
}

BalanceSettings read_balance(const json& root, const Scenario& sc) {
    BalanceSettings b;
    const json* j = child(root, "balance");
    const std::string path = "/balance";
    if (j) {
        check_keys(*j, path, {"enabled", "inlet_flow", "outlet_flow", "window", "threshold", "k_sigma",
                              "floor_fraction", "max_missing_fraction", "inventory"});
        b.enabled = boolean(*j, "enabled", path, true);
    }
    if (!b.enabled) return b;
    const auto& ins = sc.pipeline.instruments;
    b.inlet_flow_id = resolve_id(j, "inlet_flow", path, ins, InstrumentKind::flow, 0.0, true);
    b.outlet_flow_id = resolve_id(j, "outlet_flow", path, ins, InstrumentKind::flow, sc.pipeline.length, true);
    if (!j) {
        if (!sc.detector.enabled) b.mode = InventoryMode::average_state;
        return b;
    }
    const Units u = read_units(root);
    b.window = number(*j, "window", path, b.window);
    require_positive(b.window, path + "/window");
    b.threshold = opt_number(*j, "threshold", path, u.mass_flow);
    b.k_sigma = number(*j, "k_sigma", path, b.k_sigma);
    require_positive(b.k_sigma, path + "/k_sigma");
    b.floor_fraction = number(*j, "floor_fraction", path, b.floor_fraction);
    b.max_missing_fraction = number(*j, "max_missing_fraction", path, b.max_missing_fraction);
    if (b.max_missing_fraction < 0.0 || b.max_missing_fraction > 1.0)
        throw ConfigError(path + "/max_missing_fraction", "must lie in [0, 1]");
    const auto mode = opt_string(*j, "inventory", path).value_or("shadow_linepack");
    if (mode == "shadow_linepack") b.mode = InventoryMode::shadow_linepack;
    else if (mode == "average_state") b.mode = InventoryMode::average_state;
    else throw ConfigError(path + "/inventory", "expected shadow_linepack or average_state");
    if (b.mode == InventoryMode::shadow_linepack && !sc.detector.enabled)
        throw ConfigError(path + "/inventory", "shadow_linepack needs the real-time detector enabled");
    return b;
}

AcousticSettings read_acoustic(const json& root) {
    AcousticSettings a;
    const json* j = child(root, "acoustic");
    if (!j) return a;
    const std::string path = "/acoustic";
    const Units u = read_units(root);
    check_keys(*j, path, {"enabled", "speed", "attenuation", "amplitude"});
    a.enabled = boolean(*j, "enabled", path, true);
    a.speed = opt_number(*j, "speed", path, u.length);
    if (a.speed) require_positive(*a.speed, path + "/speed");
    a.attenuation = number(*j, "attenuation", path, 0.0, 1.0 / u.length);
    if (a.attenuation < 0.0) throw ConfigError(path + "/attenuation", "must be non-negative");
    a.amplitude = number(*j, "amplitude", path, a.amplitude, u.pressure);
    require_positive(a.amplitude, path + "/amplitude");
    return a;
}

PlausibilityConfig read_plausibility(const json& root, const Units& u) {
    PlausibilityConfig cfg = PlausibilityConfig::defaults();
    const json* j = child(root, "plausibility");
    if (!j) return cfg;
    const std::string path = "/plausibility";
    check_keys(*j, path, {"flow", "pressure", "temperature", "acoustic"});
    for (const auto& [key, value] : j->items()) {
        const auto kind = *instrument_kind_from_string(key);
        const std::string kp = join(path, key);
        check_keys(value, kp, {"min", "max", "max_rate", "flatline_polls"});
        const auto [scale, offset] = reading_unit(kind, u);
        auto& lim = cfg.by_kind[kind];
        lim.range_min = number(value, "min", kp, lim.range_min, scale, offset);
        lim.range_max = number(value, "max", kp, lim.range_max, scale, offset);
        lim.max_rate = number(value, "max_rate", kp, lim.max_rate, scale);
        lim.flatline_polls = integer(value, "flatline_polls", kp, lim.flatline_polls);
        if (!(lim.range_max > lim.range_min)) throw ConfigError(kp + "/max", "max must exceed min");
        require_positive(lim.max_rate, kp + "/max_rate");
        if (lim.flatline_polls < 0) throw ConfigError(kp + "/flatline_polls", "must be >= 0");
    }
    return cfg;
}

}  // namespace

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open " + path.string());
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": " + e.what());
    }
}

std::string config_hash(const json& config) {
    const std::string text = config.dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

AvailabilityConfig parse_availability(const json& block, const std::string& path) {
    AvailabilityConfig cfg;
    const json* j = &block;
    check_keys(*j, path, {"unit_availability", "chains"});
    cfg.unit_availability = opt_number(*j, "unit_availability", path);
    if (cfg.unit_availability && !(*cfg.unit_availability > 0.0 && *cfg.unit_availability <= 1.0))
        throw ConfigError(path + "/unit_availability", "must lie in (0, 1]");
    const json* chains = child(*j, "chains");
    if (!chains) return cfg;
    if (!chains->is_array()) throw ConfigError(path + "/chains", "expected an array");
    for (std::size_t i = 0; i < chains->size(); ++i) {
        const std::string cp = join(path + "/chains", i);
        const auto& c = (*chains)[i];
        check_keys(c, cp, {"name", "elements"});
        ComponentChain chain;
        chain.name = opt_string(c, "name", cp).value_or("chain" + std::to_string(i));
        const json* els = child(c, "elements");
        if (!els || !els->is_array() || els->empty()) throw ConfigError(cp + "/elements", "required");
        for (std::size_t k = 0; k < els->size(); ++k) {
            const std::string ep = join(cp + "/elements", k);
            const auto& e = (*els)[k];
            check_keys(e, ep, {"kind", "count", "availability", "redundancy"});
            ChainElement el;
            el.kind = opt_string(e, "kind", ep).value_or("element" + std::to_string(k));
            el.count = integer(e, "count", ep, 1);
            el.availability = required_number(e, "availability", ep);
            const auto red = opt_string(e, "redundancy", ep).value_or("simplex");
            if (red == "simplex") el.redundancy = Redundancy::simplex;
            else if (red == "duplex") el.redundancy = Redundancy::duplex;
            else throw ConfigError(ep + "/redundancy", "expected simplex or duplex");
            if (el.count < 1) throw ConfigError(ep + "/count", "must be >= 1");
            if (!(el.availability >= 0.0 && el.availability <= 1.0))
                throw ConfigError(ep + "/availability", "must lie in [0, 1]");
            chain.elements.push_back(el);
        }
        cfg.chains.push_back(std::move(chain));
    }
    return cfg;
}

Scenario load_scenario(const json& config) {
    if (!config.is_object()) throw ConfigError("", "scenario must be a JSON object");
    check_keys(config, "", {"name", "seed", "horizon", "poll_interval", "units", "fluid", "pipeline",
                            "instruments", "boundary", "leaks", "solver", "detector", "balance",
                            "acoustic", "plausibility", "availability", "outputs"});
    Scenario sc;
    sc.source = config;
    sc.config_hash = config_hash(config);
    const Units u = read_units(config);

    sc.name = opt_string(config, "name", "").value_or("scenario");
    if (const json* s = child(config, "seed")) {
        if (!s->is_number_integer() || (!s->is_number_unsigned() && s->get<std::int64_t>() < 0))
            throw ConfigError("/seed", "expected a non-negative integer");
        sc.seed = s->get<std::uint64_t>();
    }
    sc.horizon = required_number(config, "horizon", "");
    require_positive(sc.horizon, "/horizon");
    sc.poll_interval = number(config, "poll_interval", "", sc.poll_interval);
    require_positive(sc.poll_interval, "/poll_interval");

    sc.fluid = read_fluid(config, u);
    sc.pipeline = read_pipeline(config, u);
    sc.pipeline.instruments = read_instruments(config, u);
    sc.boundary = read_boundary(config, u);

    if (const json* s = child(config, "solver")) {
        const std::string path = "/solver";
        check_keys(*s, path, {"dx", "dt", "theta", "newton_tol", "newton_max_iter"});
        sc.grid_dx = number(*s, "dx", path, sc.grid_dx, u.length);
        sc.solver.dt = number(*s, "dt", path, sc.solver.dt);
        sc.solver.theta = number(*s, "theta", path, sc.solver.theta);
        sc.solver.newton_tol = number(*s, "newton_tol", path, sc.solver.newton_tol);
        sc.solver.newton_max_iter = integer(*s, "newton_max_iter", path, sc.solver.newton_max_iter);
        require_positive(sc.grid_dx, path + "/dx");
        try {
            sc.solver.validate();
        } catch (const ParameterDomainError& e) {
            throw ConfigError(path, e.what());
        }
    }
    const double ratio = sc.poll_interval / sc.solver.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || ratio < 1.0 - 1e-9)
        throw ConfigError("/poll_interval", "must be a whole multiple of /solver/dt");

    // pipeline and grid validation (instrument placement, segment layout)
    try {
        const PipelineModel pipeline(sc.pipeline);
        (void)discretize(pipeline, sc.grid_dx);
    } catch (const ConfigError& e) {
        throw ConfigError(e.path().empty() ? "/pipeline" : e.path(), e.what());
    } catch (const Error& e) {
        throw ConfigError("/pipeline", e.what());
    }

    sc.leaks = read_leaks(config, u, sc.pipeline.length, sc.horizon);
    sc.plausibility = read_plausibility(config, u);
    sc.detector = read_detector(config, sc);
    sc.balance = read_balance(config, sc);
    sc.acoustic = read_acoustic(config);
    if (const json* av = child(config, "availability")) {
        auto cfg = parse_availability(*av, "/availability");
        sc.availability_unit = cfg.unit_availability;
        sc.availability_chains = std::move(cfg.chains);
    }

    if (const json* o = child(config, "outputs")) {
        const std::string path = "/outputs";
        check_keys(*o, path, {"state_dump_interval", "trace"});
        sc.outputs.state_dump_interval = number(*o, "state_dump_interval", path, 0.0);
        if (sc.outputs.state_dump_interval < 0.0)
            throw ConfigError(path + "/state_dump_interval", "must be non-negative");
        sc.outputs.trace = boolean(*o, "trace", path, true);
    }

    // the boundary state at t = 0 must stay clear of the critical region
    const auto bc0 = sc.boundary.at(0.0);
    try {
        if (bc0.inlet.kind != EndKind::mass_flow)
            sc.fluid.reject_near_critical(bc0.inlet.value, bc0.supply_temperature);
        if (bc0.outlet.kind != EndKind::mass_flow)
            sc.fluid.reject_near_critical(bc0.outlet.value, bc0.supply_temperature);
    } catch (const ConfigError& e) {
        throw ConfigError("/boundary", e.what());
    }
    return sc;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
    return load_scenario(read_config_file(path));
}

// ---------------------------------------------------------------------------
// running

namespace {

ordered_json number_or_null(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

double total_leak_rate(std::span<const LeakEvent> leaks, double t) {
    double q = 0.0;
    for (const auto& l : leaks) {
        if (t >= l.start_time) q += l.mass_rate;
    }
    return q;
}

std::optional<double> average_state_estimate(const HydraulicModel& model, const TelemetryFrame& frame) {
    // pressure and temperature instruments nearest each end
    const auto& instruments = model.pipeline().instruments();
    const InstrumentPlacement *p_lo = nullptr, *p_hi = nullptr, *t_lo = nullptr, *t_hi = nullptr;
    for (const auto& ins : instruments) {
        if (ins.kind == InstrumentKind::pressure) {
            if (!p_lo || ins.position < p_lo->position) p_lo = &ins;
            if (!p_hi || ins.position > p_hi->position) p_hi = &ins;
        } else if (ins.kind == InstrumentKind::temperature) {
            if (!t_lo || ins.position < t_lo->position) t_lo = &ins;
            if (!t_hi || ins.position > t_hi->position) t_hi = &ins;
        }
    }
    if (!p_lo || !t_lo) return std::nullopt;
    const auto p1 = frame.good_value(p_lo->id);
    const auto p2 = frame.good_value(p_hi->id);
    const auto t1 = frame.good_value(t_lo->id);
    const auto t2 = frame.good_value(t_hi->id);
    if (!p1 || !p2 || !t1 || !t2) return std::nullopt;
    return average_state_linepack(model, *p1, *p2, *t1, *t2);
}

}  // namespace

RunReport run_scenario(const Scenario& sc, const RunSinks& sinks) {
    RunReport report;
    auto& out = report.json;
    out["schema"] = "pipeleak.run_report/1";
    out["config_hash"] = sc.config_hash;
    out["scenario"] = sc.name;
    out["seed"] = sc.seed;
    out["horizon"] = sc.horizon;
    out["poll_interval"] = sc.poll_interval;
    out["ground_truth"] = {{"leaks", sc.source.contains("leaks") ? sc.source["leaks"] : json::array()}};

    const PipelineModel pipeline(sc.pipeline);
    const HydraulicModel model(pipeline, sc.fluid, discretize(pipeline, sc.grid_dx));
    const auto& grid = model.grid();
    out["grid"] = {{"nodes", grid.node_count()}, {"dx", grid.dx}};

    // leaks act at the nearest grid node
    ordered_json snapped = ordered_json::array();
    for (const auto& l : sc.leaks) snapped.push_back(grid.node_positions[grid.nearest_node(l.position)]);
    out["leak_nodes"] = snapped;

    std::optional<RtmDetector> rtm;
    if (sc.detector.enabled) {
        RtmConfig cfg;
        cfg.shadow = sc.detector.shadow;
        cfg.policy = default_policy(model, cfg.shadow, sc.detector.k_sigma, sc.detector.floor_fraction);
        if (sc.detector.flow_threshold) cfg.policy.flow_threshold = *sc.detector.flow_threshold;
        if (sc.detector.pressure_threshold) cfg.policy.pressure_threshold = *sc.detector.pressure_threshold;
        cfg.policy.consecutive_required = sc.detector.consecutive_required;
        cfg.policy.min_indicators = sc.detector.min_indicators;
        cfg.policy.signed_indicators = sc.detector.signed_indicators;
        cfg.characterization_polls = sc.detector.characterization_polls;
        rtm.emplace(model, cfg);
    }

    std::optional<BalanceMonitor> balance;
    if (sc.balance.enabled) {
        BalanceConfig cfg;
        cfg.inlet_flow_id = sc.balance.inlet_flow_id;
        cfg.outlet_flow_id = sc.balance.outlet_flow_id;
        cfg.window = sc.balance.window;
        cfg.max_missing_fraction = sc.balance.max_missing_fraction;
        cfg.mode = sc.balance.mode;
        const auto* in = pipeline.find_instrument(cfg.inlet_flow_id);
        const auto* outm = pipeline.find_instrument(cfg.outlet_flow_id);
        const int polls = static_cast<int>(std::llround(cfg.window / sc.poll_interval)) + 1;
        const double noise = windowed_noise_sigma(in->noise_sigma, outm->noise_sigma, sc.poll_interval, polls);
        const double floor = sc.balance.floor_fraction * in->span() * cfg.window;
        cfg.threshold = sc.balance.threshold.value_or(std::max(sc.balance.k_sigma * noise, floor));
        balance.emplace(cfg);
    }

    if (sinks.telemetry_csv) {
        write_hash_line(*sinks.telemetry_csv, sc.config_hash);
        write_telemetry_header(*sinks.telemetry_csv);
    }
    if (sinks.state_csv) {
        write_hash_line(*sinks.state_csv, sc.config_hash);
        write_state_header(*sinks.state_csv);
    }

    ordered_json solver_info;
    std::string failure;
    std::size_t steps_done = 0;
    double worst_ledger = 0.0;
    double lp0 = 0.0;
    int max_newton = 0;
    double t_reached = 0.0;
    try {
        GridState state = steady_state(model, sc.boundary.at(0.0), {}, sc.solver);
        for (std::size_t i = 0; i < state.size(); ++i) sc.fluid.reject_near_critical(state.p[i], state.temp[i]);
        lp0 = linepack(model, state);
        NoiseSpec noise{sc.seed};
        PlausibilityHistory plaus;

        const auto substeps = static_cast<long>(std::llround(sc.poll_interval / sc.solver.dt));
        const auto n_polls = static_cast<long>(std::floor(sc.horizon / sc.poll_interval + 1e-9));
        const long dump_every = sc.outputs.state_dump_interval > 0.0
                                    ? std::max(1L, std::lround(sc.outputs.state_dump_interval / sc.solver.dt))
                                    : 0;
        long step_index = 0;
        SolverSettings step_settings = sc.solver;
        if (sinks.state_csv && dump_every) write_state_rows(*sinks.state_csv, model, state);

        for (long k = 0; k <= n_polls; ++k) {
            const double poll_time = static_cast<double>(k) * sc.poll_interval;
            if (k > 0) {
                for (long s = 0; s < substeps; ++s) {
                    auto step = advance_with_ledger(model, state, sc.boundary, sc.leaks, step_settings);
                    state = std::move(step.state);
                    t_reached = state.t;
                    ++step_index;
                    ++steps_done;
                    max_newton = std::max(max_newton, step.newton_iterations);
                    worst_ledger = std::max(worst_ledger,
                                            std::abs(step.ledger.residual()) / step.ledger.linepack_after);
                    if (sinks.state_csv && dump_every && step_index % dump_every == 0)
                        write_state_rows(*sinks.state_csv, model, state);
                }
                state.t = poll_time;  // poll times stay exact multiples
            }
            const TelemetryFrame raw = sample(model, state, pipeline.instruments(), noise, poll_time);
            const TelemetryFrame frame = plausibility_filter(raw, pipeline.instruments(), plaus, sc.plausibility);
            if (sinks.telemetry_csv) write_telemetry_rows(*sinks.telemetry_csv, frame);

            std::optional<double> lp_estimate;
            if (rtm) {
                const auto& d = rtm->process(frame);
                if (rtm->shadow().state()) lp_estimate = d.modeled_linepack;
            }
            if (balance) {
                if (sc.balance.mode == InventoryMode::average_state) lp_estimate = average_state_estimate(model, frame);
                balance->process(frame, lp_estimate);
            }
        }
    } catch (const Error& e) {
        std::ostringstream msg;
        msg << "run stopped after t=" << t_reached << " s: " << e.what();
        failure = msg.str();
        report.ok = false;
    }
    if (rtm) {
        try {
            rtm->finalize();
        } catch (const Error& e) {
            if (failure.empty()) failure = std::string("characterization failed: ") + e.what();
            report.ok = false;
        }
    }

    solver_info["status"] = report.ok ? "ok" : "failed";
    if (!failure.empty()) solver_info["message"] = failure;
    solver_info["steps"] = steps_done;
    solver_info["simulated_time"] = static_cast<double>(steps_done) * sc.solver.dt;
    solver_info["max_newton_iterations"] = max_newton;
    solver_info["max_ledger_residual_relative"] = worst_ledger;
    solver_info["initial_linepack"] = lp0;
    out["solver"] = solver_info;

    // detector outputs
    LeakVerdict empty_verdict;
    const LeakVerdict& verdict = rtm ? rtm->verdict() : empty_verdict;
    if (rtm) {
        ordered_json r = to_json(verdict);
        r["flow_threshold"] = rtm->shadow().policy().flow_threshold;
        r["pressure_threshold"] = rtm->shadow().policy().pressure_threshold;
        ordered_json ids = ordered_json::array();
        for (const auto& ind : rtm->shadow().indicators()) ids.push_back(ind.instrument_id);
        r["indicators"] = ids;
        if (sc.outputs.trace) r["trace"] = trace_json(rtm->history(), rtm->alarm_trace());
        out["rtm"] = r;
    } else {
        out["rtm"] = nullptr;
    }

    std::vector<BalanceWindow> windows;
    if (balance) {
        windows = balance->windows();
        report.balance_windows = windows;
        ordered_json b;
        b["threshold"] = balance->config().threshold;
        b["inventory"] = sc.balance.mode == InventoryMode::shadow_linepack ? "shadow_linepack" : "average_state";
        b["first_alarm_time"] = number_or_null(balance->first_alarm_time());
        b["trend_slope"] = number_or_null(imbalance_trend(windows));
        const double rho_ref = density(sc.fluid, 101325.0, 288.15);
        b["reference_density"] = rho_ref;
        ordered_json rows = ordered_json::array();
        for (const auto& w : windows) {
            auto row = to_json(w);
            row["imbalance_volume"] = w.imbalance / rho_ref;
            rows.push_back(row);
        }
        b["windows"] = rows;
        out["balance"] = b;
    } else {
        out["balance"] = nullptr;
    }

    ordered_json acoustic = ordered_json::array();
    std::vector<AcousticResult> acoustic_results;
    if (sc.acoustic.enabled) {
        const auto sensors = acoustic_sensors(pipeline);
        WaveModel wave{sc.acoustic.speed.value_or(sc.fluid.sound_speed_hint()), sc.acoustic.attenuation};
        if (!sensors.empty()) {
            for (const auto& leak : sc.leaks) {
                auto res = analyze_leak(leak, sc.acoustic.amplitude, sensors, wave);
                ordered_json a;
                a["leak_position"] = leak.position;
                ordered_json events = ordered_json::array();
                for (const auto& e : res.events) events.push_back(to_json(e));
                a["events"] = events;
                a["latency"] = number_or_null(res.latency);
                a["location"] = res.location ? to_json(*res.location) : ordered_json(nullptr);
                acoustic.push_back(a);
                report.acoustic_events.insert(report.acoustic_events.end(), res.events.begin(), res.events.end());
                acoustic_results.push_back(std::move(res));
            }
        }
        out["acoustic"] = {{"speed", wave.speed}, {"attenuation", wave.attenuation},
                           {"sensors", sensors.size()}, {"results", acoustic}};
    } else {
        out["acoustic"] = nullptr;
    }

    out["combined"] = to_json(combine_verdicts(verdict, windows));

    // truth comparison against the first leak to start
    ordered_json metrics = ordered_json::object();
    if (!sc.leaks.empty()) {
        const auto first = std::min_element(sc.leaks.begin(), sc.leaks.end(),
                                            [](const auto& a, const auto& b) { return a.start_time < b.start_time; });
        const double t0 = first->start_time;
        if (rtm) {
            ordered_json m;
            const bool early = verdict.declared && verdict.declared_time < t0;
            m["declared"] = verdict.declared;
            m["false_alarm_before_leak"] = early;
            m["detection_latency"] =
                verdict.declared && !early ? ordered_json(verdict.declared_time - t0) : ordered_json(nullptr);
            const double truth = total_leak_rate(sc.leaks, sc.horizon);
            m["true_size"] = truth;
            m["size_error"] = verdict.size_estimate ? ordered_json(std::abs(*verdict.size_estimate - truth))
                                                    : ordered_json(nullptr);
            m["location_error"] = verdict.location_estimate
                                      ? ordered_json(std::abs(*verdict.location_estimate - first->position))
                                      : ordered_json(nullptr);
            metrics["rtm"] = m;
        }
        if (balance) {
            const auto t = balance->first_alarm_time();
            metrics["balance"] = {{"detection_latency", t && *t >= t0 ? ordered_json(*t - t0) : ordered_json(nullptr)}};
        }
        if (!acoustic_results.empty()) {
            const auto idx = static_cast<std::size_t>(first - sc.leaks.begin());
            const auto& res = acoustic_results[idx];
            metrics["acoustic"] = {
                {"detection_latency", number_or_null(res.latency)},
                {"location_error", res.location ? ordered_json(std::abs(res.location->position - first->position))
                                                : ordered_json(nullptr)}};
        }
    }
    out["metrics"] = metrics;

    if (sc.availability_unit || !sc.availability_chains.empty()) {
        std::vector<ComponentChain> chains = sc.availability_chains;
        if (sc.availability_unit) {
            for (auto& c : reference_presets(*sc.availability_unit)) chains.push_back(std::move(c));
        }
        report.availability = compare_configurations(chains);
        ordered_json av = ordered_json::array();
        for (const auto& r : report.availability) av.push_back(to_json(r));
        out["availability"] = av;
    }
    out["status"] = report.ok ? "ok" : "partial";
    return report;
}

// ---------------------------------------------------------------------------
// sweeps

std::vector<SweepParameter> parse_sweep_grid(const json& grid) {
    std::vector<SweepParameter> out;
    if (!grid.is_object()) throw ConfigError("", "sweep grid must be a JSON object");
    check_keys(grid, "", {"parameters"});
    const json* params = child(grid, "parameters");
    if (!params) return out;
    if (!params->is_array()) throw ConfigError("/parameters", "expected an array");
    for (std::size_t i = 0; i < params->size(); ++i) {
        const std::string pp = join("/parameters", i);
        const auto& p = (*params)[i];
        check_keys(p, pp, {"pointer", "values"});
        SweepParameter sp;
        auto ptr = opt_string(p, "pointer", pp);
        if (!ptr) throw ConfigError(pp + "/pointer", "required");
        try {
            (void)json::json_pointer(*ptr);
        } catch (const json::exception& e) {
            throw ConfigError(pp + "/pointer", e.what());
        }
        sp.pointer = *ptr;
        const json* values = child(p, "values");
        if (!values || !values->is_array() || values->empty())
            throw ConfigError(pp + "/values", "required as a non-empty array");
        for (const auto& v : *values) sp.values.push_back(v);
        out.push_back(std::move(sp));
    }
    return out;
}

namespace {

std::optional<double> metric(const ordered_json& report, const char* detector, const char* key) {
    if (!report.contains("metrics")) return std::nullopt;
    const auto& m = report["metrics"];
    if (!m.contains(detector)) return std::nullopt;
    const auto& d = m[detector];
    if (!d.contains(key) || !d[key].is_number()) return std::nullopt;
    return d[key].get<double>();
}

std::optional<double> median(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SweepRow run_cell(const json& base, const std::vector<SweepParameter>& grid, std::size_t index) {
    SweepRow row;
    row.index = index;
    json cfg = base;
    std::size_t rem = index;
    row.values.resize(grid.size());
    for (std::size_t p = grid.size(); p-- > 0;) {
        const auto n = grid[p].values.size();
        row.values[p] = grid[p].values[rem % n];
        rem /= n;
    }
    try {
        for (std::size_t p = 0; p < grid.size(); ++p) cfg[json::json_pointer(grid[p].pointer)] = row.values[p];
        const Scenario sc = load_scenario(cfg);
        const RunReport rep = run_scenario(sc);
        row.status = rep.ok ? "ok" : "partial";
        if (!rep.ok) row.error = rep.json["solver"].value("message", "");
        ordered_json s;
        s["config_hash"] = sc.config_hash;
        s["rtm_declared"] = rep.json["rtm"].is_object() ? rep.json["rtm"]["declared"] : ordered_json(false);
        s["rtm_latency"] = number_or_null(metric(rep.json, "rtm", "detection_latency"));
        s["size_estimate"] = rep.json["rtm"].is_object() ? rep.json["rtm"]["size_estimate"] : ordered_json(nullptr);
        s["size_error"] = number_or_null(metric(rep.json, "rtm", "size_error"));
        s["location_estimate"] =
            rep.json["rtm"].is_object() ? rep.json["rtm"]["location_estimate"] : ordered_json(nullptr);
        s["location_error"] = number_or_null(metric(rep.json, "rtm", "location_error"));
        s["balance_latency"] = number_or_null(metric(rep.json, "balance", "detection_latency"));
        s["acoustic_location_error"] = number_or_null(metric(rep.json, "acoustic", "location_error"));
        row.summary = s;
    } catch (const std::exception& e) {
        row.status = "error";
        row.error = e.what();
    }
    return row;
}

}  // namespace

SweepResult sweep(const json& scenario_template, const std::vector<SweepParameter>& grid, int jobs) {
    SweepResult result;
    result.template_hash = config_hash(scenario_template);
    for (const auto& p : grid) result.pointers.push_back(p.pointer);
    std::size_t cells = 1;
    for (const auto& p : grid) cells *= p.values.size();

    result.rows.resize(cells);
    const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
    // cells are claimed in index order by a fixed pool; results land in their own slot
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells; i = next++) result.rows[i] = run_cell(scenario_template, grid, i);
    };
    std::vector<std::future<void>> pool;
    for (std::size_t w = 1; w < std::min(workers, cells); ++w) pool.push_back(std::async(std::launch::async, worker));
    worker();
    for (auto& f : pool) f.get();

    std::vector<double> loc, lat;
    for (const auto& r : result.rows) {
        if (r.status == "error") ++result.failures;
        if (r.summary.is_object()) {
            if (r.summary["location_error"].is_number()) loc.push_back(r.summary["location_error"].get<double>());
            if (r.summary["rtm_latency"].is_number()) lat.push_back(r.summary["rtm_latency"].get<double>());
        }
    }
    result.median_location_error = median(loc);
    result.median_latency = median(lat);
    return result;
}

}  // namespace pipeleak
