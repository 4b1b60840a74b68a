#include "pipeleak/report.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace pipeleak {

using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string csv_number(double v) {
    if (!std::isfinite(v)) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

ordered_json to_json(const LeakVerdict& v) {
    ordered_json j;
    j["declared"] = v.declared;
    j["declared_time"] = v.declared ? ordered_json(v.declared_time) : ordered_json(nullptr);
    j["size_at_alarm"] = opt(v.size_at_alarm);
    j["size_estimate"] = opt(v.size_estimate);
    j["location_estimate"] = opt(v.location_estimate);
    j["location_ambiguous"] = v.location_ambiguous;
    j["notes"] = v.notes;
    return j;
}

ordered_json to_json(const BalanceWindow& w) {
    ordered_json j;
    j["start"] = w.start;
    j["end"] = w.end;
    j["v_in"] = w.v_in;
    j["v_out"] = w.v_out;
    j["delta_linepack"] = w.delta_linepack;
    j["imbalance"] = w.imbalance;
    j["indeterminate"] = w.indeterminate;
    j["alarm"] = w.alarm;
    j["polls"] = w.polls;
    j["missing_in"] = w.missing_in;
    j["missing_out"] = w.missing_out;
    return j;
}

ordered_json to_json(const AcousticEvent& e) {
    ordered_json j;
    j["sensor"] = e.sensor_id;
    j["position"] = e.position;
    j["arrival_time"] = e.arrival_time;
    j["amplitude"] = e.amplitude;
    j["triggered"] = e.triggered;
    return j;
}

ordered_json to_json(const Localization& l) {
    ordered_json j;
    j["position"] = l.position;
    j["raw_position"] = l.raw_position;
    j["out_of_bracket"] = l.out_of_bracket;
    return j;
}

ordered_json to_json(const CombinedVerdict& c) {
    ordered_json j;
    j["declared"] = c.declared;
    j["first_alarm_time"] = opt(c.first_alarm_time);
    j["first_source"] = c.first_source.empty() ? ordered_json(nullptr) : ordered_json(c.first_source);
    j["rtm_declared"] = c.rtm_declared;
    j["balance_alarm_time"] = opt(c.balance_alarm_time);
    j["confirmed"] = c.confirmed;
    return j;
}

ordered_json to_json(const RankedChain& r) {
    ordered_json j;
    j["name"] = r.name;
    j["units"] = r.units;
    j["product"] = r.availability.product;
    j["approximate"] = r.availability.approximate;
    j["approximate_valid"] = r.availability.approximate_valid;
    ordered_json ups = ordered_json::array();
    for (const auto& u : r.upgrades) {
        ups.push_back({{"duplex", u.kind}, {"availability", u.availability}, {"gain", u.gain}});
    }
    j["duplex_upgrades"] = ups;
    return j;
}

ordered_json trace_json(std::span<const Discrepancy> history, const std::vector<bool>& alarms) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& d = history[i];
        ordered_json r;
        r["t"] = d.poll_time;
        r["status"] = d.status;
        ordered_json norm = ordered_json::array();
        for (const auto& v : d.normalized) norm.push_back(opt(v));
        r["normalized"] = norm;
        r["imbalance"] = opt(d.imbalance);
        r["alarm"] = i < alarms.size() && alarms[i];
        rows.push_back(r);
    }
    return rows;
}

void write_hash_line(std::ostream& os, const std::string& hash) {
    os << "# config_hash=" << hash << '\n';
}

void write_telemetry_header(std::ostream& os) {
    os << "poll_time,instrument,value,quality\n";
}

void write_telemetry_rows(std::ostream& os, const TelemetryFrame& frame) {
    for (const auto& r : frame.readings) {
        os << csv_number(frame.poll_time) << ',' << r.instrument_id << ','
           << (r.value ? csv_number(*r.value) : std::string()) << ',' << to_string(r.quality) << '\n';
    }
}

void write_state_header(std::ostream& os) {
    os << "t,x,p,v,temp,rho\n";
}

void write_state_rows(std::ostream& os, const HydraulicModel& model, const GridState& state) {
    const auto& x = model.grid().node_positions;
    for (std::size_t i = 0; i < state.size(); ++i) {
        os << csv_number(state.t) << ',' << csv_number(x[i]) << ',' << csv_number(state.p[i]) << ','
           << csv_number(state.v[i]) << ',' << csv_number(state.temp[i]) << ','
           << csv_number(state.rho[i]) << '\n';
    }
}

void write_balance_csv(std::ostream& os, std::span<const BalanceWindow> windows,
                       const std::string& hash) {
    write_hash_line(os, hash);
    os << "start,end,v_in,v_out,delta_linepack,imbalance,indeterminate,alarm\n";
    for (const auto& w : windows) {
        os << csv_number(w.start) << ',' << csv_number(w.end) << ',' << csv_number(w.v_in) << ','
           << csv_number(w.v_out) << ',' << csv_number(w.delta_linepack) << ','
           << csv_number(w.imbalance) << ',' << (w.indeterminate ? 1 : 0) << ','
           << (w.alarm ? 1 : 0) << '\n';
    }
}

void write_acoustic_csv(std::ostream& os, std::span<const AcousticEvent> events,
                        const std::string& hash) {
    write_hash_line(os, hash);
    os << "sensor,position,arrival_time,amplitude,triggered\n";
    for (const auto& e : events) {
        os << e.sensor_id << ',' << csv_number(e.position) << ',' << csv_number(e.arrival_time) << ','
           << csv_number(e.amplitude) << ',' << (e.triggered ? 1 : 0) << '\n';
    }
}

void write_availability_csv(std::ostream& os, std::span<const RankedChain> ranked,
                            const std::string& hash) {
    write_hash_line(os, hash);
    os << "rank,chain,units,product,approximate,approximate_valid,best_duplex,best_duplex_gain\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& r = ranked[i];
        const UpgradeDelta* best = nullptr;
        for (const auto& u : r.upgrades) {
            if (!best || u.gain > best->gain) best = &u;
        }
        os << i + 1 << ',' << r.name << ',' << r.units << ',' << csv_number(r.availability.product)
           << ',' << csv_number(r.availability.approximate) << ','
           << (r.availability.approximate_valid ? 1 : 0) << ',' << (best ? best->kind : "") << ','
           << (best ? csv_number(best->gain) : "") << '\n';
    }
}

namespace {

std::string cell(const ordered_json& v) {
    if (v.is_null()) return {};
    if (v.is_number()) return csv_number(v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    if (v.is_string()) return v.get<std::string>();
    std::string s = v.dump();
    for (auto& c : s) {
        if (c == ',') c = ';';
    }
    return s;
}

}  // namespace

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
    write_hash_line(os, result.template_hash);
    os << "index";
    for (const auto& p : result.pointers) os << ',' << p;
    os << ",status,config_hash,rtm_declared,rtm_latency,size_estimate,size_error,location_estimate,"
          "location_error,balance_latency,acoustic_location_error,error\n";
    static const char* keys[] = {"config_hash",       "rtm_declared",   "rtm_latency",
                                 "size_estimate",     "size_error",     "location_estimate",
                                 "location_error",    "balance_latency", "acoustic_location_error"};
    for (const auto& r : result.rows) {
        os << r.index;
        for (const auto& v : r.values) os << ',' << cell(v);
        os << ',' << r.status;
        for (const char* k : keys) {
            os << ',';
            if (r.summary.is_object() && r.summary.contains(k)) os << cell(r.summary[k]);
        }
        std::string err = r.error;
        for (auto& c : err) {
            if (c == ',' || c == '\n') c = ';';
        }
        os << ',' << err << '\n';
    }
}

}  // namespace pipeleak
