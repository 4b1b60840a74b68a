// pipeleak: scenario runner for the leak-detection toolkit.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "pipeleak/errors.hpp"
#include "pipeleak/report.hpp"
#include "pipeleak/scenario.hpp"

namespace fs = std::filesystem;
using namespace pipeleak;

namespace {

enum Exit { kOk = 0, kConfig = 1, kFailure = 2 };

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    std::ofstream os(dir / name);
    if (!os) throw Error("cannot write " + (dir / name).string());
    return os;
}

void print_value(std::ostream& os, const char* label, const nlohmann::ordered_json& v,
                 const char* unit = "") {
    os << "  " << label << ": ";
    if (v.is_null()) os << "-";
    else os << v.dump() << unit;
    os << '\n';
}

int cmd_run(const fs::path& scenario_path, const fs::path& out_dir, int verbosity) {
    const Scenario sc = load_scenario_file(scenario_path);
    fs::create_directories(out_dir);
    std::ofstream telemetry = open_out(out_dir, "telemetry.csv");
    std::ofstream state;
    RunSinks sinks;
    sinks.telemetry_csv = &telemetry;
    if (sc.outputs.state_dump_interval > 0.0) {
        state = open_out(out_dir, "state.csv");
        sinks.state_csv = &state;
    }
    const RunReport rep = run_scenario(sc, sinks);
    const auto& j = rep.json;

    open_out(out_dir, "report.json") << j.dump(2) << '\n';
    if (j["balance"].is_object()) {
        auto os = open_out(out_dir, "balance.csv");
        write_balance_csv(os, rep.balance_windows, sc.config_hash);
    }
    if (j["acoustic"].is_object()) {
        auto os = open_out(out_dir, "acoustic.csv");
        write_acoustic_csv(os, rep.acoustic_events, sc.config_hash);
    }
    if (!rep.availability.empty()) {
        auto os = open_out(out_dir, "availability.csv");
        write_availability_csv(os, rep.availability, sc.config_hash);
    }

    if (verbosity >= 0) {
        std::cout << "scenario " << sc.name << " (config " << sc.config_hash << "): " << j["status"].get<std::string>()
                  << '\n';
        if (j["rtm"].is_object()) {
            std::cout << "real-time model\n";
            print_value(std::cout, "declared", j["rtm"]["declared"]);
            print_value(std::cout, "alarm time", j["rtm"]["declared_time"], " s");
            print_value(std::cout, "size", j["rtm"]["size_estimate"], " kg/s");
            print_value(std::cout, "location", j["rtm"]["location_estimate"], " m");
        }
        if (j["balance"].is_object()) {
            std::cout << "line balance\n";
            print_value(std::cout, "first alarm", j["balance"]["first_alarm_time"], " s");
        }
        if (j["metrics"].contains("rtm") && verbosity >= 1) {
            std::cout << "errors against truth\n";
            print_value(std::cout, "latency", j["metrics"]["rtm"]["detection_latency"], " s");
            print_value(std::cout, "size error", j["metrics"]["rtm"]["size_error"], " kg/s");
            print_value(std::cout, "location error", j["metrics"]["rtm"]["location_error"], " m");
        }
        std::cout << "outputs in " << out_dir.string() << '\n';
    }
    if (!rep.ok) {
        std::cerr << "error: run incomplete: " << j["solver"].value("message", std::string("unknown failure")) << '\n';
        return kFailure;
    }
    return kOk;
}

int cmd_sweep(const fs::path& template_path, const fs::path& grid_path, const fs::path& out_dir, int jobs,
              int verbosity) {
    const auto base = read_config_file(template_path);
    (void)load_scenario(base);  // reject a broken template before running any cell
    const auto grid = parse_sweep_grid(read_config_file(grid_path));
    const SweepResult res = sweep(base, grid, jobs);
    fs::create_directories(out_dir);
    auto os = open_out(out_dir, "sweep.csv");
    write_sweep_csv(os, res);
    if (verbosity >= 0) {
        std::cout << res.rows.size() << " cells, " << res.failures << " failed\n";
        std::cout << "median location error: "
                  << (res.median_location_error ? csv_number(*res.median_location_error) + " m" : "-") << '\n';
        std::cout << "median detection latency: "
                  << (res.median_latency ? csv_number(*res.median_latency) + " s" : "-") << '\n';
    }
    if (verbosity >= 1) {
        for (const auto& r : res.rows) {
            if (r.status != "ok") std::cerr << "cell " << r.index << ": " << r.status << ": " << r.error << '\n';
        }
    }
    bool any_bad = false;
    for (const auto& r : res.rows) any_bad = any_bad || r.status != "ok";
    return any_bad ? kFailure : kOk;
}

int cmd_validate(const fs::path& scenario_path, int verbosity) {
    const Scenario sc = load_scenario_file(scenario_path);
    if (verbosity >= 0) {
        std::cout << scenario_path.string() << ": ok (config " << sc.config_hash << ")\n";
        if (verbosity >= 1) {
            std::cout << "  instruments: " << sc.pipeline.instruments.size() << "\n  leaks: " << sc.leaks.size()
                      << "\n  horizon: " << sc.horizon << " s\n";
        }
    }
    return kOk;
}

int cmd_availability(double unit, const std::string& chains_path, const fs::path& out_dir, int verbosity) {
    nlohmann::json cfg = nlohmann::json::object();
    if (!chains_path.empty()) cfg = read_config_file(chains_path);
    if (!cfg.contains("unit_availability") && (!cfg.contains("chains") || unit > 0.0))
        cfg["unit_availability"] = unit > 0.0 ? unit : 0.99;
    const auto parsed = parse_availability(cfg, "");
    std::vector<ComponentChain> chains = parsed.chains;
    if (parsed.unit_availability) {
        for (auto& c : reference_presets(*parsed.unit_availability)) chains.push_back(std::move(c));
    }
    const auto ranked = compare_configurations(chains);
    const std::string hash = config_hash(cfg);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        auto os = open_out(out_dir, "availability.csv");
        write_availability_csv(os, ranked, hash);
    }
    if (verbosity >= 0 || out_dir.empty()) write_availability_csv(std::cout, ranked, hash);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pipeline leak-detection desk toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    int verbose = 0;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "More output (repeatable)");
    app.add_flag("-q,--quiet", quiet, "Errors only");

    fs::path out_dir = "out";
    std::string scenario_path, template_path, grid_path, chains_path;
    int jobs = 1;
    double unit = 0.0;

    auto* run = app.add_subcommand("run", "Simulate a scenario and run all detectors");
    run->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out_dir, "Output directory");

    auto* sw = app.add_subcommand("sweep", "Run a scenario template over a parameter grid");
    sw->add_option("template", template_path, "Scenario template")->required()->check(CLI::ExistingFile);
    sw->add_option("grid", grid_path, "Parameter grid")->required()->check(CLI::ExistingFile);
    sw->add_option("-o,--out", out_dir, "Output directory");
    sw->add_option("-j,--jobs", jobs, "Parallel cells")->check(CLI::PositiveNumber);

    auto* val = app.add_subcommand("validate", "Check a scenario file without running it");
    val->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);

    auto* av = app.add_subcommand("availability", "Alarm-chain availability table");
    av->add_option("-a,--unit", unit, "Uniform per-unit availability for the reference chains")
        ->check(CLI::Range(0.0, 1.0));
    av->add_option("-c,--chains", chains_path, "Chain file")->check(CLI::ExistingFile);
    auto* av_out = av->add_option("-o,--out", out_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);
    const int verbosity = quiet ? -1 : verbose;

    try {
        if (*run) return cmd_run(scenario_path, out_dir, verbosity);
        if (*sw) return cmd_sweep(template_path, grid_path, out_dir, jobs, verbosity);
        if (*val) return cmd_validate(scenario_path, verbosity);
        if (*av) return cmd_availability(unit, chains_path, av_out->count() ? out_dir : fs::path(), verbosity);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
