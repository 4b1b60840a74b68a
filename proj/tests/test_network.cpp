#include <doctest.h>

#include "pipeleak/errors.hpp"
#include "pipeleak/hydraulics.hpp"
#include "pipeleak/network.hpp"
#include "support.hpp"

using namespace pipeleak;

namespace {

PipelineSpec bare(double length = 10000.0) {
    PipelineSpec s;
    s.length = length;
    return s;
}

InstrumentPlacement at(const char* id, double x) {
    InstrumentPlacement ins;
    ins.id = id;
    ins.kind = InstrumentKind::pressure;
    ins.position = x;
    return ins;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("uniform division without instruments") {
    const Grid g = discretize(PipelineModel(bare()), 1000.0);
    REQUIRE(g.node_count() == 11);
    for (std::size_t i = 0; i < 11; ++i) CHECK(g.node_positions[i] == doctest::Approx(1000.0 * i));
    CHECK(g.dx == doctest::Approx(1000.0));
}

TEST_CASE("instrument positions become nodes") {
    auto spec = bare();
    spec.instruments = {at("PT-1", 4500.0)};
    const Grid g = discretize(PipelineModel(spec), 1000.0);
    bool found = false;
    for (double x : g.node_positions) found = found || x == 4500.0;
    CHECK(found);
    CHECK(g.dx <= 1000.0);
    CHECK(g.node_positions.front() == 0.0);
    CHECK(g.node_positions.back() == 10000.0);
    for (std::size_t i = 1; i < g.node_count(); ++i) CHECK(g.node_positions[i] > g.node_positions[i - 1]);
}

TEST_CASE("target dx beyond the length clamps to a single interval") {
    const Grid g = discretize(PipelineModel(bare()), 20000.0);
    CHECK(g.node_count() == 2);
    CHECK(g.cell_count() == 1);
}

TEST_CASE("segment boundaries lie on nodes") {
    auto spec = bare();
    SegmentOverride o;
    o.start = 3300.0;
    o.end = 6100.0;
    o.diameter = 0.25;
    spec.overrides = {o};
    const PipelineModel p(spec);
    REQUIRE(p.segments().size() == 3);
    const Grid g = discretize(p, 500.0);
    int hits = 0;
    for (double x : g.node_positions) hits += (x == 3300.0) + (x == 6100.0);
    CHECK(hits == 2);
    CHECK(p.segment_at(3300.0).diameter == 0.25);   // boundary belongs to the right
    CHECK(p.segment_at(3299.0).diameter == 0.3);
    CHECK(p.segment_at(10000.0).diameter == 0.3);
}

TEST_CASE("instruments closer than dx are a configuration error") {
    auto spec = bare();
    spec.instruments = {at("PT-1", 4500.0), at("PT-2", 4800.0)};
    const PipelineModel p(spec);
    CHECK_THROWS_AS(discretize(p, 500.0), ConfigError);
    CHECK_NOTHROW(discretize(p, 250.0));
    try {
        discretize(p, 500.0);
    } catch (const ConfigError& e) {
        CHECK(e.path() == "/solver/dx");
    }
}

TEST_CASE("discretize is deterministic") {
    auto spec = support::desk_spec();
    const PipelineModel p(spec);
    CHECK(discretize(p, 333.0).node_positions == discretize(p, 333.0).node_positions);
}

TEST_CASE("elevation interpolation") {
    auto spec = bare();
    CHECK(elevation_at(PipelineModel(spec), 1234.0) == 0.0);
    spec.elevation = {{0.0, 0.0}, {10000.0, 100.0}};
    const PipelineModel p(spec);
    CHECK(elevation_at(p, 5000.0) == doctest::Approx(50.0));
    spec.elevation = {{0.0, 10.0}, {2500.0, 37.5}, {10000.0, 5.0}};
    const PipelineModel q(spec);
    CHECK(elevation_at(q, 2500.0) == 37.5);
    CHECK(elevation_at(q, 0.0) == 10.0);
    CHECK(elevation_at(q, 10000.0) == 5.0);
    CHECK_THROWS_AS(elevation_at(q, -1.0), DomainError);
    CHECK_THROWS_AS(elevation_at(q, 10000.5), DomainError);
}

TEST_CASE("area has a single source of truth") {
    auto spec = bare();
    SegmentOverride o;
    o.start = 0.0;
    o.end = 5000.0;
    o.diameter = 0.2;
    spec.overrides = {o};
    const PipelineModel p(spec);
    const HydraulicModel m(p, support::water(), discretize(p, 1000.0));
    for (std::size_t c = 0; c < m.grid().cell_count(); ++c) {
        const double mid = 0.5 * (m.grid().node_positions[c] + m.grid().node_positions[c + 1]);
        CHECK(m.cell_area(c) == p.area_at(mid));
        CHECK(m.cell_area(c) == kPi * m.cell_segment(c).diameter * m.cell_segment(c).diameter / 4.0);
    }
}

TEST_CASE("invalid pipelines name the offending field") {
    auto check_path = [](PipelineSpec s, const std::string& path) {
        try {
            PipelineModel p(std::move(s));
            FAIL("expected ConfigError for " << path);
        } catch (const ConfigError& e) {
            CHECK(e.path() == path);
        }
    };
    check_path(bare(0.0), "/pipeline/length");
    auto s = bare();
    s.defaults.diameter = 0.0;
    check_path(s, "/pipeline/segments/0/diameter");
    s = bare();
    s.defaults.friction_factor = -0.1;
    check_path(s, "/pipeline/segments/0/friction_factor");
    s = bare();
    s.elevation = {{0.0, 0.0}, {9000.0, 3.0}};
    check_path(s, "/pipeline/elevation");
    s = bare();
    s.instruments = {at("PT-1", 12000.0)};
    check_path(s, "/instruments/0/position");
    s = bare();
    s.instruments = {at("PT-1", 0.0)};
    s.instruments[0].dropout_prob = 1.0;
    check_path(s, "/instruments/0/dropout_prob");
    s = bare();
    s.instruments = {at("PT-1", 0.0), at("PT-1", 100.0)};
    check_path(s, "/instruments/1/id");
}

TEST_CASE("instrument kinds round-trip through their names") {
    for (auto k : {InstrumentKind::flow, InstrumentKind::pressure, InstrumentKind::temperature,
                   InstrumentKind::acoustic}) {
        CHECK(instrument_kind_from_string(to_string(k)) == k);
    }
    CHECK_FALSE(instrument_kind_from_string("density").has_value());
}

}  // TEST_SUITE
