#include <doctest.h>

#include <cmath>
#include <random>

#include "pipeleak/balance_detect.hpp"
#include "pipeleak/errors.hpp"
#include "pipeleak/rtm_detect.hpp"
#include "support.hpp"

using namespace pipeleak;

namespace {

TelemetryFrame meters(double t, std::optional<double> in, std::optional<double> out) {
    TelemetryFrame f;
    f.poll_time = t;
    f.readings.push_back({"FT-in", in, in ? Quality::good : Quality::missing});
    f.readings.push_back({"FT-out", out, out ? Quality::good : Quality::missing});
    return f;
}

/// Constant meters over [0, duration] at poll h.
std::vector<TelemetryFrame> constant_frames(double q_in, double q_out, double duration, double h) {
    std::vector<TelemetryFrame> v;
    for (double t = 0.0; t <= duration + 1e-9; t += h) v.push_back(meters(t, q_in, q_out));
    return v;
}

}  // namespace

TEST_SUITE("balance") {

TEST_CASE("imbalance is inflow minus outflow minus inventory change") {
    // 100 kg in, 95 kg out, inventory up 3 kg over 10 s
    const auto frames = constant_frames(10.0, 9.5, 10.0, 5.0);
    const auto w = accumulate(frames, "FT-in", "FT-out", 1000.0, 1003.0);
    CHECK(w.v_in == 100.0);
    CHECK(w.v_out == 95.0);
    CHECK(w.delta_linepack == 3.0);
    CHECK(w.imbalance == 2.0);
    CHECK(w.imbalance == w.v_in - w.v_out - w.delta_linepack);
    CHECK(w.duration() == 10.0);
    CHECK(w.polls == 3);
    CHECK_FALSE(w.indeterminate);
}

TEST_CASE("trapezoid integration is exact for linear meter signals") {
    std::vector<TelemetryFrame> frames;
    for (int k = 0; k <= 12; ++k) frames.push_back(meters(5.0 * k, 10.0 + 0.1 * 5.0 * k, 8.0));
    const auto w = accumulate(frames, "FT-in", "FT-out", 0.0, 0.0);
    CHECK(w.v_in == doctest::Approx(10.0 * 60.0 + 0.05 * 3600.0).epsilon(1e-14));
    CHECK(w.v_out == doctest::Approx(480.0).epsilon(1e-14));
}

TEST_CASE("adjacent windows add up to the full window") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 0.5);
    std::vector<TelemetryFrame> frames;
    for (int k = 0; k <= 100; ++k) frames.push_back(meters(5.0 * k, 70.0 + n(rng), 69.0 + n(rng)));
    const std::span<const TelemetryFrame> all(frames);
    const auto a = accumulate(all.subspan(0, 41), "FT-in", "FT-out", 500.0, 503.0);
    const auto b = accumulate(all.subspan(40), "FT-in", "FT-out", 503.0, 499.0);
    const auto full = accumulate(all, "FT-in", "FT-out", 500.0, 499.0);
    CHECK(a.imbalance + b.imbalance == doctest::Approx(full.imbalance).epsilon(1e-12));
    CHECK(a.v_in + b.v_in == doctest::Approx(full.v_in).epsilon(1e-14));
}

TEST_CASE("gaps are bridged linearly and too many gaps void the window") {
    auto frames = constant_frames(10.0, 10.0, 100.0, 5.0);  // 21 polls
    frames[7] = meters(35.0, std::nullopt, 10.0);
    frames[8] = meters(40.0, 99.0, 10.0);
    frames[8].readings[0].quality = Quality::suspect;
    const auto bridged = accumulate(frames, "FT-in", "FT-out", 0.0, 0.0);
    CHECK(bridged.v_in == doctest::Approx(1000.0).epsilon(1e-14));
    CHECK(bridged.missing_in == 2);
    CHECK_FALSE(bridged.indeterminate);

    for (int k : {1, 3, 12}) frames[k] = meters(5.0 * k, std::nullopt, 10.0);
    const auto voided = accumulate(frames, "FT-in", "FT-out", 0.0, 0.0);  // 5 of 21 > 10%
    CHECK(voided.indeterminate);
    CHECK_FALSE(balance_alarm(voided, -1e300));
}

TEST_CASE("accumulate preconditions") {
    const auto one = constant_frames(1.0, 1.0, 0.0, 5.0);
    CHECK_THROWS_AS(accumulate(one, "FT-in", "FT-out", 0.0, 0.0), DomainError);
    std::vector<TelemetryFrame> back{meters(5.0, 1.0, 1.0), meters(0.0, 1.0, 1.0)};
    CHECK_THROWS_AS(accumulate(back, "FT-in", "FT-out", 0.0, 0.0), DomainError);
}

TEST_CASE("alarm rule") {
    BalanceWindow w;
    w.imbalance = 50.0;
    CHECK_FALSE(balance_alarm(w, 100.0));
    w.imbalance = 200.0;
    CHECK(balance_alarm(w, 100.0));
    w.imbalance = 100.0;
    CHECK_FALSE(balance_alarm(w, 100.0));
}

TEST_CASE("windowed noise matches the trapezoid variance") {
    // Var = h^2 sigma^2 (N - 1.5) per meter: N-2 interior weights of h, two end weights of h/2.
    const double h = 5.0, si = 0.2, so = 0.3;
    const int n = 721;
    const double oracle = std::sqrt((si * si + so * so) * h * h * ((n - 2) + 0.5));
    CHECK(windowed_noise_sigma(si, so, h, n) == doctest::Approx(oracle).epsilon(1e-14));
}

TEST_CASE("a 3 sigma threshold keeps the false-alarm rate under one percent") {
    const double h = 5.0, si = 0.2, so = 0.2;
    const int n = 721;
    const double thr = 3.0 * windowed_noise_sigma(si, so, h, n);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nin(0.0, si), nout(0.0, so);
    int alarms = 0;
    double sum = 0.0, sum2 = 0.0;
    const int windows = 100;
    for (int k = 0; k < windows; ++k) {
        std::vector<TelemetryFrame> frames;
        for (int j = 0; j < n; ++j) frames.push_back(meters(h * j, 70.0 + nin(rng), 70.0 + nout(rng)));
        const auto w = accumulate(frames, "FT-in", "FT-out", 1e5, 1e5);
        alarms += balance_alarm(w, thr);
        sum += w.imbalance;
        sum2 += w.imbalance * w.imbalance;
    }
    CHECK(alarms < 1 + windows / 100);  // fewer than 1%: zero of 100
    const double sd = std::sqrt(sum2 / windows - (sum / windows) * (sum / windows));
    CHECK(sd == doctest::Approx(thr / 3.0).epsilon(0.2));
}

TEST_CASE("trend of window imbalance") {
    std::vector<BalanceWindow> ws(4);
    for (int k = 0; k < 4; ++k) {
        ws[k].end = 3600.0 * (k + 1);
        ws[k].imbalance = 10.0 + 0.5 * ws[k].end;
    }
    CHECK(*imbalance_trend(ws) == doctest::Approx(0.5));
    CHECK_FALSE(imbalance_trend(std::span(ws).first(1)).has_value());
    ws[2].indeterminate = true;
    CHECK(*imbalance_trend(ws) == doctest::Approx(0.5));
}

TEST_CASE("average-state inventory of a uniform line") {
    const auto m = support::desk_model();
    const double area = kPi * support::kDiameter * support::kDiameter / 4.0;
    const double rho = density(m.fluid(), 3e5, 288.15);
    CHECK(average_state_linepack(m, 2e5, 4e5, 288.15, 288.15) ==
          doctest::Approx(rho * area * support::kLength).epsilon(1e-6));
}

TEST_CASE("monitor: back-to-back windows sharing the boundary poll") {
    BalanceConfig cfg{"FT-in", "FT-out", 60.0, 100.0, 0.1, InventoryMode::shadow_linepack};
    BalanceMonitor mon(cfg);
    int completed = 0;
    for (int k = 0; k <= 36; ++k) {
        const double t = 5.0 * k;
        const double q_out = t > 60.0 ? 67.0 : 70.0;  // 3 kg/s loss after the first window
        if (mon.process(meters(t, 70.0, q_out), 1000.0)) ++completed;
    }
    CHECK(completed == 3);
    REQUIRE(mon.windows().size() == 3);
    CHECK(mon.windows()[0].start == 0.0);
    CHECK(mon.windows()[1].start == 60.0);
    CHECK(mon.windows()[0].imbalance == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(mon.windows()[0].alarm);
    CHECK(mon.windows()[1].imbalance == doctest::Approx(3.0 * 55.0 + 1.5 * 5.0));
    CHECK(mon.windows()[1].alarm);
    CHECK(*mon.first_alarm_time() == 120.0);

    CHECK_THROWS_AS(BalanceMonitor(BalanceConfig{"a", "b", 0.0, 1.0, 0.1, InventoryMode::average_state}),
                    ParameterDomainError);
    CHECK_THROWS_AS(BalanceMonitor(BalanceConfig{"a", "b", 60.0, 1.0, 1.5, InventoryMode::average_state}),
                    ParameterDomainError);
}

TEST_CASE("monitor waits for the first inventory estimate") {
    BalanceMonitor mon({"FT-in", "FT-out", 20.0, 1.0, 0.1, InventoryMode::shadow_linepack});
    for (int k = 0; k <= 8; ++k) mon.process(meters(5.0 * k, 1.0, 1.0), k < 2 ? std::nullopt : std::optional(5.0));
    REQUIRE(mon.windows().size() == 1);
    CHECK(mon.windows()[0].start == 10.0);
    CHECK(mon.windows()[0].end == 30.0);
}

TEST_CASE("combined verdict") {
    LeakVerdict rtm;
    std::vector<BalanceWindow> ws(2);
    ws[0].end = 3600.0;
    ws[1].end = 7200.0;
    ws[1].alarm = true;
    auto c = combine_verdicts(rtm, ws);
    CHECK(c.declared);
    CHECK(c.first_source == "balance");
    CHECK(*c.first_alarm_time == 7200.0);
    CHECK_FALSE(c.confirmed);

    rtm.declared = true;
    rtm.declared_time = 2000.0;
    c = combine_verdicts(rtm, ws);
    CHECK(c.first_source == "rtm");
    CHECK(*c.first_alarm_time == 2000.0);
    CHECK(c.confirmed);

    c = combine_verdicts(LeakVerdict{}, {});
    CHECK_FALSE(c.declared);
    CHECK_FALSE(c.first_alarm_time.has_value());
}

}  // TEST_SUITE
