#include "pipeleak/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pipeleak/errors.hpp"

namespace pipeleak {

std::string_view to_string(InstrumentKind kind) {
    switch (kind) {
        case InstrumentKind::flow: return "flow";
        case InstrumentKind::pressure: return "pressure";
        case InstrumentKind::temperature: return "temperature";
        case InstrumentKind::acoustic: return "acoustic";
    }
    return "unknown";
}

std::optional<InstrumentKind> instrument_kind_from_string(std::string_view name) {
    if (name == "flow") return InstrumentKind::flow;
    if (name == "pressure") return InstrumentKind::pressure;
    if (name == "temperature") return InstrumentKind::temperature;
    if (name == "acoustic") return InstrumentKind::acoustic;
    return std::nullopt;
}

namespace {

void validate_segment(const Segment& s, std::size_t index) {
    const std::string where = "/pipeline/segments/" + std::to_string(index);
    if (!(s.diameter > 0.0)) throw ConfigError(where + "/diameter", "must be > 0");
    if (!(s.friction_factor > 0.0)) throw ConfigError(where + "/friction_factor", "must be > 0");
    if (!(s.heat_transfer_u >= 0.0)) throw ConfigError(where + "/heat_transfer_u", "must be >= 0");
    if (!(s.ground_temperature > 0.0)) {
        throw ConfigError(where + "/ground_temperature", "must be > 0");
    }
}

}  // namespace

PipelineModel::PipelineModel(PipelineSpec spec)
    : length_(spec.length), elevation_(std::move(spec.elevation)),
      instruments_(std::move(spec.instruments)) {
    if (!(length_ > 0.0)) throw ConfigError("/pipeline/length", "must be > 0");

    // Breakpoints from all override boundaries, then resolve each piece.
    std::vector<double> cuts{0.0, length_};
    for (std::size_t i = 0; i < spec.overrides.size(); ++i) {
        const auto& o = spec.overrides[i];
        if (!(o.start >= 0.0 && o.end <= length_ && o.start < o.end)) {
            throw ConfigError("/pipeline/segments/" + std::to_string(i),
                              "segment must satisfy 0 <= start < end <= length");
        }
        cuts.push_back(o.start);
        cuts.push_back(o.end);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        Segment s = spec.defaults;
        s.start = cuts[i];
        s.end = cuts[i + 1];
        const double mid = 0.5 * (s.start + s.end);
        for (const auto& o : spec.overrides) {
            if (mid < o.start || mid > o.end) continue;
            if (o.diameter) s.diameter = *o.diameter;
            if (o.friction_factor) s.friction_factor = *o.friction_factor;
            if (o.heat_transfer_u) s.heat_transfer_u = *o.heat_transfer_u;
            if (o.ground_temperature) s.ground_temperature = *o.ground_temperature;
        }
        validate_segment(s, segments_.size());
        segments_.push_back(s);
    }

    if (!elevation_.empty()) {
        if (elevation_.front().x != 0.0 || elevation_.back().x != length_) {
            throw ConfigError("/pipeline/elevation", "profile must cover [0, length]");
        }
        for (std::size_t i = 1; i < elevation_.size(); ++i) {
            if (!(elevation_[i].x > elevation_[i - 1].x)) {
                throw ConfigError("/pipeline/elevation/" + std::to_string(i),
                                  "x must be strictly increasing");
            }
        }
    }

    for (std::size_t i = 0; i < instruments_.size(); ++i) {
        const auto& ins = instruments_[i];
        const std::string where = "/instruments/" + std::to_string(i);
        if (!(ins.position >= 0.0 && ins.position <= length_)) {
            throw ConfigError(where + "/position", "must lie in [0, length]");
        }
        if (!(ins.noise_sigma >= 0.0)) throw ConfigError(where + "/noise_sigma", "must be >= 0");
        if (!(ins.dropout_prob >= 0.0 && ins.dropout_prob < 1.0)) {
            throw ConfigError(where + "/dropout_prob", "must lie in [0, 1)");
        }
        if (!(ins.range_max > ins.range_min)) {
            throw ConfigError(where + "/range", "range_max must exceed range_min");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (instruments_[j].id == ins.id) throw ConfigError(where + "/id", "duplicate id " + ins.id);
        }
    }
}

const Segment& PipelineModel::segment_at(double x) const {
    for (const auto& s : segments_) {
        if (x < s.end) return s;
    }
    return segments_.back();
}

const InstrumentPlacement* PipelineModel::find_instrument(std::string_view id) const {
    for (const auto& ins : instruments_) {
        if (ins.id == id) return &ins;
    }
    return nullptr;
}

double elevation_at(const PipelineModel& pipeline, double x) {
    if (!(x >= 0.0 && x <= pipeline.length())) {
        std::ostringstream msg;
        msg << "elevation_at: x=" << x << " outside [0, " << pipeline.length() << "]";
        throw DomainError(msg.str());
    }
    const auto& prof = pipeline.elevation_profile();
    if (prof.empty()) return 0.0;
    auto upper = std::lower_bound(prof.begin(), prof.end(), x,
                                  [](const ElevationPoint& p, double v) { return p.x < v; });
    if (upper == prof.end()) return prof.back().h;
    if (upper->x == x || upper == prof.begin()) return upper->h;
    const auto lower = upper - 1;
    const double w = (x - lower->x) / (upper->x - lower->x);
    return lower->h + w * (upper->h - lower->h);
}

std::size_t Grid::nearest_node(double x) const {
    auto it = std::lower_bound(node_positions.begin(), node_positions.end(), x);
    if (it == node_positions.end()) return node_positions.size() - 1;
    if (it == node_positions.begin()) return 0;
    const auto hi = static_cast<std::size_t>(it - node_positions.begin());
    return (x - node_positions[hi - 1] <= node_positions[hi] - x) ? hi - 1 : hi;
}

Grid discretize(const PipelineModel& pipeline, double target_dx) {
    return discretize(pipeline, target_dx, {});
}

Grid discretize(const PipelineModel& pipeline, double target_dx,
                const std::vector<double>& extra_nodes) {
    const double length = pipeline.length();
    if (!(target_dx > 0.0)) throw ConfigError("/solver/dx", "target dx must be > 0");
    target_dx = std::min(target_dx, length);

    std::vector<double> required{0.0, length};
    for (const auto& s : pipeline.segments()) required.push_back(s.start);
    for (const auto& ins : pipeline.instruments()) required.push_back(ins.position);
    for (double x : extra_nodes) {
        if (!(x >= 0.0 && x <= length)) throw ConfigError("/grid", "extra node outside line");
        required.push_back(x);
    }
    std::sort(required.begin(), required.end());
    required.erase(std::unique(required.begin(), required.end()), required.end());

    // distinct instrument positions need at least one full cell between them
    std::vector<double> sites;
    for (const auto& ins : pipeline.instruments()) sites.push_back(ins.position);
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    for (std::size_t i = 1; i < sites.size(); ++i) {
        if (sites[i] - sites[i - 1] < target_dx * (1.0 - 1e-9)) {
            std::ostringstream msg;
            msg << "instruments at " << sites[i - 1] << " m and " << sites[i]
                << " m are closer than dx=" << target_dx << " m; use a smaller dx";
            throw ConfigError("/solver/dx", msg.str());
        }
    }

    Grid grid;
    grid.node_positions.push_back(0.0);
    for (std::size_t i = 1; i < required.size(); ++i) {
        const double a = required[i - 1];
        const double b = required[i];
        // Small slack so that an exact multiple of target_dx does not gain a cell.
        const auto parts =
            static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / target_dx - 1e-9)));
        for (std::size_t k = 1; k < parts; ++k) {
            grid.node_positions.push_back(a + (b - a) * static_cast<double>(k) / parts);
        }
        grid.node_positions.push_back(b);
    }
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        grid.dx = std::max(grid.dx, grid.cell_length(i));
    }
    return grid;
}

}  // namespace pipeleak
