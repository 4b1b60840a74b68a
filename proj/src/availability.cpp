#include "pipeleak/availability.hpp"

#include <algorithm>
#include <cmath>

#include "pipeleak/errors.hpp"

namespace pipeleak {

double ChainElement::unit_availability() const {
    if (redundancy == Redundancy::duplex) {
        const double u = 1.0 - availability;
        return 1.0 - u * u;
    }
    return availability;
}

void ComponentChain::validate() const {
    if (elements.empty()) throw ParameterDomainError("chain " + name + " has no elements");
    for (const auto& e : elements) {
        if (e.count < 1)
            throw ParameterDomainError("chain " + name + ": element " + e.kind + " needs count >= 1");
        if (!(e.availability >= 0.0 && e.availability <= 1.0))
            throw ParameterDomainError("chain " + name + ": element " + e.kind +
                                       " availability must lie in [0, 1]");
    }
}

int ComponentChain::unit_count() const {
    int n = 0;
    for (const auto& e : elements) n += e.count;
    return n;
}

ChainAvailability chain_availability(const ComponentChain& chain) {
    chain.validate();
    ChainAvailability out;
    double downtime = 0.0;
    for (const auto& e : chain.elements) {
        const double a = e.unit_availability();
        out.product *= std::pow(a, e.count);
        downtime += e.count * (1.0 - a);
    }
    out.approximate = 1.0 - downtime;
    out.approximate_valid = out.approximate >= 0.0;
    return out;
}

std::vector<RankedChain> compare_configurations(const std::vector<ComponentChain>& chains) {
    std::vector<RankedChain> ranked;
    ranked.reserve(chains.size());
    for (const auto& c : chains) {
        RankedChain r;
        r.name = c.name;
        r.units = c.unit_count();
        r.availability = chain_availability(c);
        for (std::size_t i = 0; i < c.elements.size(); ++i) {
            if (c.elements[i].redundancy == Redundancy::duplex) continue;
            ComponentChain upgraded = c;
            upgraded.elements[i].redundancy = Redundancy::duplex;
            UpgradeDelta d;
            d.kind = c.elements[i].kind;
            d.availability = chain_availability(upgraded).product;
            d.gain = d.availability - r.availability.product;
            r.upgrades.push_back(std::move(d));
        }
        ranked.push_back(std::move(r));
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.availability.product > b.availability.product;
    });
    return ranked;
}

ComponentChain mass_flow_preset(double a) {
    return {"mass_flow",
            {{"flowmeter", 2, a}, {"pressure_sensor", 2, a}, {"temperature_sensor", 2, a},
             {"rtu", 2, a}, {"communications_link", 2, a}, {"computer", 1, a}}};
}

ComponentChain pressure_preset(double a) {
    return {"pressure",
            {{"pressure_sensor", 4, a}, {"rtu", 4, a}, {"communications_link", 4, a},
             {"computer", 1, a}}};
}

ComponentChain acoustic_preset(double a) {
    return {"acoustic",
            {{"acoustic_monitor", 2, a}, {"rtu", 2, a}, {"communications_link", 2, a},
             {"computer", 1, a}}};
}

std::vector<ComponentChain> reference_presets(double a) {
    return {mass_flow_preset(a), pressure_preset(a), acoustic_preset(a)};
}

}  // namespace pipeleak
