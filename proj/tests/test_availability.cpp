#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pipeleak/availability.hpp"
#include "pipeleak/errors.hpp"

using namespace pipeleak;

namespace {

// Independent series oracle: expand every element into its units and multiply.
double series_oracle(const ComponentChain& c) {
    double p = 1.0;
    for (const auto& e : c.elements) {
        for (int k = 0; k < e.count; ++k) {
            const double a = e.redundancy == Redundancy::duplex ? 1.0 - (1.0 - e.availability) * (1.0 - e.availability)
                                                                : e.availability;
            p *= a;
        }
    }
    return p;
}

ComponentChain random_chain(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> kinds(1, 5), count(1, 4);
    std::uniform_real_distribution<double> avail(0.8, 1.0);
    ComponentChain c{"r", {}};
    const int n = kinds(rng);
    for (int i = 0; i < n; ++i) c.elements.push_back({"k" + std::to_string(i), count(rng), avail(rng)});
    return c;
}

}  // namespace

TEST_SUITE("availability") {

TEST_CASE("reference chains at 0.99 per unit") {
    CHECK(chain_availability(mass_flow_preset(0.99)).product == doctest::Approx(std::pow(0.99, 11)).epsilon(1e-12));
    CHECK(chain_availability(pressure_preset(0.99)).product == doctest::Approx(std::pow(0.99, 13)).epsilon(1e-12));
    CHECK(chain_availability(acoustic_preset(0.99)).product == doctest::Approx(std::pow(0.99, 7)).epsilon(1e-12));
    CHECK(std::abs(chain_availability(mass_flow_preset(0.99)).product - 0.8953) < 5e-5);
    CHECK(std::abs(chain_availability(acoustic_preset(0.99)).product - 0.9321) < 5e-5);
    CHECK(mass_flow_preset(0.9).unit_count() == 11);
    CHECK(pressure_preset(0.9).unit_count() == 13);
    CHECK(acoustic_preset(0.9).unit_count() == 7);
    CHECK(chain_availability(mass_flow_preset(0.99)).approximate == doctest::Approx(0.89).epsilon(1e-12));
}

TEST_CASE("perfect units give a perfect chain") {
    const auto a = chain_availability(pressure_preset(1.0));
    CHECK(a.product == 1.0);
    CHECK(a.approximate == 1.0);
}

TEST_CASE("fewer units rank higher at equal per-unit availability") {
    const auto ranked = compare_configurations(reference_presets(0.99));
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].name == "acoustic");
    CHECK(ranked[1].name == "mass_flow");
    CHECK(ranked[2].name == "pressure");
}

TEST_CASE("a dead element zeroes the chain and ranks it last") {
    auto dead = acoustic_preset(0.99);
    dead.name = "dead";
    dead.elements[1].availability = 0.0;
    auto chains = reference_presets(0.99);
    chains.insert(chains.begin(), dead);
    const auto ranked = compare_configurations(chains);
    CHECK(ranked.back().name == "dead");
    CHECK(ranked.back().availability.product == 0.0);
}

TEST_CASE("duplexing the weakest element is the best single upgrade") {
    ComponentChain c{"mixed", {{"flowmeter", 2, 0.97}, {"rtu", 2, 0.995}, {"link", 2, 0.98}, {"computer", 1, 0.999}}};
    const auto ranked = compare_configurations({c});
    const auto& ups = ranked[0].upgrades;
    REQUIRE(ups.size() == 4);
    // exhaustive scan with the oracle
    std::string best_kind;
    double best = -1.0;
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
        auto u = c;
        u.elements[i].redundancy = Redundancy::duplex;
        const double gain = series_oracle(u) - series_oracle(c);
        CHECK(ups[i].gain == doctest::Approx(gain).epsilon(1e-12));
        if (gain > best) {
            best = gain;
            best_kind = c.elements[i].kind;
        }
    }
    CHECK(best_kind == "flowmeter");
    const auto it = std::max_element(ups.begin(), ups.end(), [](const auto& a, const auto& b) { return a.gain < b.gain; });
    CHECK(it->kind == best_kind);
}

TEST_CASE("properties over random chains") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const auto c = random_chain(rng);
        const auto a = chain_availability(c);
        CHECK(a.product == doctest::Approx(series_oracle(c)).epsilon(1e-12));
        double min_a = 1.0;
        int imperfect = 0;
        for (const auto& e : c.elements) {
            min_a = std::min(min_a, e.unit_availability());
            if (e.availability < 1.0) imperfect += e.count;
        }
        CHECK(a.product <= min_a);
        // union bound on the failure probability: 1 - sum(u) <= prod(1 - u), equal with one imperfect unit
        CHECK(a.approximate <= a.product + 1e-15);
        const bool equal = a.approximate >= a.product - 1e-15;
        CHECK(equal == (imperfect <= 1));
        CHECK(a.approximate_valid == (a.approximate >= 0.0));

        // strictly decreasing in any element's availability
        auto worse = c;
        worse.elements[0].availability *= 0.99;
        CHECK(chain_availability(worse).product < a.product);

        // duplexing never hurts
        for (std::size_t i = 0; i < c.elements.size(); ++i) {
            auto d = c;
            d.elements[i].redundancy = Redundancy::duplex;
            CHECK(chain_availability(d).product >= a.product);
        }
    }
}

TEST_CASE("the approximation is flagged outside its range") {
    ComponentChain c{"long", {{"sensor", 30, 0.9}}};
    const auto a = chain_availability(c);
    CHECK(a.approximate < 0.0);
    CHECK_FALSE(a.approximate_valid);
    CHECK(a.product == doctest::Approx(std::pow(0.9, 30)));
}

TEST_CASE("chain validation") {
    CHECK_THROWS_AS(chain_availability(ComponentChain{"e", {}}), ParameterDomainError);
    CHECK_THROWS_AS(chain_availability(ComponentChain{"c", {{"x", 0, 0.9}}}), ParameterDomainError);
    CHECK_THROWS_AS(chain_availability(ComponentChain{"a", {{"x", 1, 1.1}}}), ParameterDomainError);
}

}  // TEST_SUITE
