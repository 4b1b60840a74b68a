#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeleak/acoustic_detect.hpp"
#include "pipeleak/availability.hpp"
#include "pipeleak/balance_detect.hpp"
#include "pipeleak/hydraulics.hpp"
#include "pipeleak/rtm_detect.hpp"
#include "pipeleak/scenario.hpp"
#include "pipeleak/telemetry.hpp"

namespace pipeleak {

nlohmann::ordered_json to_json(const LeakVerdict& v);
nlohmann::ordered_json to_json(const BalanceWindow& w);
nlohmann::ordered_json to_json(const AcousticEvent& e);
nlohmann::ordered_json to_json(const Localization& l);
nlohmann::ordered_json to_json(const CombinedVerdict& c);
nlohmann::ordered_json to_json(const RankedChain& r);

/// Per-poll trace: time, status, normalized indicators and the alarm flag.
nlohmann::ordered_json trace_json(std::span<const Discrepancy> history,
                                  const std::vector<bool>& alarms);

/// First line of every CSV output.
void write_hash_line(std::ostream& os, const std::string& hash);

void write_telemetry_header(std::ostream& os);
void write_telemetry_rows(std::ostream& os, const TelemetryFrame& frame);
void write_state_header(std::ostream& os);
void write_state_rows(std::ostream& os, const HydraulicModel& model, const GridState& state);

void write_balance_csv(std::ostream& os, std::span<const BalanceWindow> windows,
                       const std::string& hash);
void write_acoustic_csv(std::ostream& os, std::span<const AcousticEvent> events,
                        const std::string& hash);
void write_availability_csv(std::ostream& os, std::span<const RankedChain> ranked,
                            const std::string& hash);
void write_sweep_csv(std::ostream& os, const SweepResult& result);

/// Compact textual number; empty for missing values.
std::string csv_number(double v);

}  // namespace pipeleak
