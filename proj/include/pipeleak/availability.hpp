#pragma once

#include <string>
#include <vector>

namespace pipeleak {

enum class Redundancy { simplex, duplex };

/// `count` units of one component kind in series; a duplex element doubles every unit.
struct ChainElement {
    std::string kind;
    int count = 1;
    double availability = 1.0;  // per unit, (0, 1]; 0 is accepted as a dead element
    Redundancy redundancy = Redundancy::simplex;

    /// Availability of one (possibly duplexed) unit.
    double unit_availability() const;
};

struct ComponentChain {
    std::string name;
    std::vector<ChainElement> elements;

    void validate() const;
    int unit_count() const;
};

struct ChainAvailability {
    double product = 1.0;      // exact series model
    double approximate = 1.0;  // 1 - sum of unavailabilities
    bool approximate_valid = true;  // false when the approximation went negative
};

ChainAvailability chain_availability(const ComponentChain& chain);

struct UpgradeDelta {
    std::string kind;
    double availability = 0.0;  // product mode after duplexing this kind
    double gain = 0.0;          // relative to the chain as configured
};

struct RankedChain {
    std::string name;
    int units = 0;
    ChainAvailability availability;
    std::vector<UpgradeDelta> upgrades;  // one per simplex kind, configuration order
};

/// Chains sorted by product-mode availability, best first; ties keep input order.
std::vector<RankedChain> compare_configurations(const std::vector<ComponentChain>& chains);

/// Reference alarm chains with a uniform per-unit availability.
ComponentChain mass_flow_preset(double unit_availability);  // 11 units
ComponentChain pressure_preset(double unit_availability);   // 13 units
ComponentChain acoustic_preset(double unit_availability);   // 7 units
std::vector<ComponentChain> reference_presets(double unit_availability);

}  // namespace pipeleak
