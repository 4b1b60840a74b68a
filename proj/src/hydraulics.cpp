#include "pipeleak/hydraulics.hpp"

#include <lapacke.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "dual.hpp"
#include "pipeleak/errors.hpp"

namespace pipeleak {

// ---------------------------------------------------------------------------
// Boundary schedules
// ---------------------------------------------------------------------------

TimeSeries::TimeSeries(double constant) : points_{{0.0, constant}} {}

TimeSeries::TimeSeries(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
    if (points_.empty()) throw ConfigError("", "time series needs at least one point");
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (!(points_[i].first > points_[i - 1].first)) {
            throw ConfigError("", "time series times must be strictly increasing");
        }
    }
}

double TimeSeries::at(double t) const {
    if (points_.empty()) return 0.0;
    if (t <= points_.front().first) return points_.front().second;
    if (t >= points_.back().first) return points_.back().second;
    auto hi = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double v, const auto& pt) { return v < pt.first; });
    auto lo = hi - 1;
    const double w = (t - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

BoundaryValues BoundaryConditions::at(double t) const {
    BoundaryValues bv;
    bv.inlet = {inlet.kind, inlet.value.at(t), inlet.valve_cv};
    bv.outlet = {outlet.kind, outlet.value.at(t), outlet.valve_cv};
    bv.supply_temperature = supply_temperature.at(t);
    return bv;
}

BoundaryConditions BoundaryConditions::constant(const BoundaryValues& values) {
    BoundaryConditions bc;
    bc.inlet = {values.inlet.kind, TimeSeries(values.inlet.value), values.inlet.valve_cv};
    bc.outlet = {values.outlet.kind, TimeSeries(values.outlet.value), values.outlet.valve_cv};
    bc.supply_temperature = TimeSeries(values.supply_temperature);
    return bc;
}

void SolverSettings::validate() const {
    if (!(dt > 0.0)) throw ConfigError("/solver/dt", "must be > 0");
    if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("/solver/theta", "must lie in [0.5, 1]");
    if (!(newton_tol > 0.0)) throw ConfigError("/solver/newton_tol", "must be > 0");
    if (newton_max_iter < 1) throw ConfigError("/solver/newton_max_iter", "must be >= 1");
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

HydraulicModel::HydraulicModel(PipelineModel pipeline, FluidModel fluid, Grid grid)
    : pipeline_(std::move(pipeline)), fluid_(std::move(fluid)), grid_(std::move(grid)) {
    const auto& x = grid_.node_positions;
    if (x.size() < 2 || x.front() != 0.0 || x.back() != pipeline_.length()) {
        throw ConfigError("/grid", "grid must span [0, length] with at least two nodes");
    }
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1])) throw ConfigError("/grid", "node positions must increase");
    }
    const auto& segs = pipeline_.segments();
    for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
        const double mid = 0.5 * (x[c] + x[c + 1]);
        std::size_t s = 0;
        while (s + 1 < segs.size() && mid >= segs[s].end) ++s;
        cells_.push_back({s, segs[s].area()});
    }
    node_area_.resize(x.size());
    node_area_.front() = cells_.front().area;
    node_area_.back() = cells_.back().area;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        node_area_[i] = 0.5 * (cells_[i - 1].area + cells_[i].area);
    }
    for (double xi : x) elevation_.push_back(elevation_at(pipeline_, xi));
}

double mass_flow_at(const HydraulicModel& model, const GridState& state, std::size_t node) {
    return state.rho[node] * state.v[node] * model.node_area(node);
}

double linepack(const HydraulicModel& model, const GridState& state) {
    double total = 0.0;
    for (std::size_t c = 0; c < model.grid().cell_count(); ++c) {
        total += 0.5 * model.grid().cell_length(c) * model.cell_area(c) *
                 (state.rho[c] + state.rho[c + 1]);
    }
    return total;
}

ModeledProfile modeled_profile(const HydraulicModel& model, const GridState& state) {
    ModeledProfile out;
    out.p = state.p;
    out.mass_flow.resize(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) out.mass_flow[i] = mass_flow_at(model, state, i);
    return out;
}

namespace {

using detail::Dual;
using D6 = Dual<6>;

constexpr double kSteadyTemperatureRelax = 1e-9;  // 1/s
constexpr int kLower = 4;  // band widths of the Newton matrix, see row layout below
constexpr int kUpper = 4;
constexpr int kLdab = 2 * kLower + kUpper + 1;

/// Terms of one cell evaluated at a single time level.
template <class S>
struct CellTerms {
    S storage_mass;   // dx/2 * A * (rho1 + rho2), kg
    S mean_v;         // m/s
    S mean_t;         // K
    S t1, t2;         // K at the cell's two nodes
    S flux_diff;      // m2 - m1, kg/s
    S momentum;       // spatial + source terms of the momentum equation, m/s2
    S energy;         // spatial + source terms of the energy equation, K/s
};

template <class S>
CellTerms<S> cell_terms(const HydraulicModel& model, std::size_t c, const S& p1, const S& v1,
                        const S& t1, const S& p2, const S& v2, const S& t2) {
    using std::abs;
    const auto& fluid = model.fluid();
    const auto& seg = model.cell_segment(c);
    const double dx = model.grid().cell_length(c);
    const double area = model.cell_area(c);
    const double d = seg.diameter;
    const double f = seg.friction_factor;
    const double cp = fluid.specific_heat();

    const S rho1 = eos::density(fluid, p1, t1);
    const S rho2 = eos::density(fluid, p2, t2);
    const S rho_bar = 0.5 * (rho1 + rho2);
    const S v_bar = 0.5 * (v1 + v2);
    const S t_bar = 0.5 * (t1 + t2);
    const S p_bar = 0.5 * (p1 + p2);

    CellTerms<S> out;
    out.storage_mass = 0.5 * dx * area * (rho1 + rho2);
    out.mean_v = v_bar;
    out.mean_t = t_bar;
    out.t1 = t1;
    out.t2 = t2;
    out.flux_diff = rho2 * v2 * model.node_area(c + 1) - rho1 * v1 * model.node_area(c);

    const double dh = model.node_elevation(c + 1) - model.node_elevation(c);
    out.momentum = v_bar * (v2 - v1) / dx + (p2 - p1) / (rho_bar * dx) + kGravity * dh / dx +
                   f / (2.0 * d) * 0.5 * (v1 * abs(v1) + v2 * abs(v2));

    const S abs_v = abs(v_bar);
    const S dpdt = eos::dp_dt_const_density(fluid, p_bar, t_bar);
    out.energy = v_bar * (t2 - t1) / dx + t_bar / (rho_bar * cp) * dpdt * (v2 - v1) / dx -
                 f * abs_v * abs_v * abs_v / (2.0 * cp * d) +
                 4.0 * seg.heat_transfer_u / (rho_bar * cp * d) * (t_bar - seg.ground_temperature);
    return out;
}

template <class S>
S signed_sqrt(const S& x) {
    using std::abs;
    using std::sqrt;
    const S r = sqrt(abs(x));
    return detail::value_of(x) < 0.0 ? -r : r;
}

/// Residual of a hydraulic end condition at node `node`. `outlet` flips the flow sign.
template <class S>
S end_residual(const HydraulicModel& model, std::size_t node, bool outlet, const EndCondition& ec,
               const S& p, const S& v, const S& t, double m_ref, double p_ref) {
    const S m = eos::density(model.fluid(), p, t) * v * model.node_area(node);
    switch (ec.kind) {
        case EndKind::pressure:
            return (p - ec.value) / p_ref;
        case EndKind::mass_flow:
            return (m - ec.value) / m_ref;
        case EndKind::valve: {
            const S dp = outlet ? p - ec.value : ec.value - p;
            return (m - ec.valve_cv * signed_sqrt(dp)) / m_ref;
        }
    }
    return S(0.0);
}

class BandSystem {
public:
    explicit BandSystem(int n) : n_(n), ab_(static_cast<std::size_t>(kLdab) * n, 0.0), rhs_(n, 0.0),
                                 ipiv_(n) {}

    void clear() {
        std::fill(ab_.begin(), ab_.end(), 0.0);
        std::fill(rhs_.begin(), rhs_.end(), 0.0);
    }
    void set(int row, int col, double value) {
        ab_[static_cast<std::size_t>(kLower + kUpper + row - col) +
            static_cast<std::size_t>(col) * kLdab] = value;
    }
    double& rhs(int row) { return rhs_[row]; }

    /// Solves in place; the solution replaces the right-hand side.
    bool solve() {
        const lapack_int info = LAPACKE_dgbsv(LAPACK_COL_MAJOR, n_, kLower, kUpper, 1, ab_.data(),
                                              kLdab, ipiv_.data(), rhs_.data(), n_);
        return info == 0;
    }
    const std::vector<double>& solution() const { return rhs_; }

private:
    int n_;
    std::vector<double> ab_;
    std::vector<double> rhs_;
    std::vector<lapack_int> ipiv_;
};

/// Everything the Newton loop needs besides the unknowns themselves.
struct Problem {
    const HydraulicModel& model;
    BoundaryValues bc;
    bool steady = true;
    double dt = 1.0;
    double theta = 1.0;
    bool upstream_is_inlet = true;
    std::vector<double> cell_sink{};           // kg/s removed inside each cell
    std::vector<CellTerms<double>> old_terms{};  // previous time level (transient only)
    double m_ref = 1.0;
    double p_ref = 1.0;
};

std::vector<double> cell_sinks(const HydraulicModel& model, std::span<const LeakEvent> leaks,
                               double t0, double t1, bool steady, double* total_mass = nullptr) {
    const auto& grid = model.grid();
    std::vector<double> sink(grid.cell_count(), 0.0);
    double mass = 0.0;
    for (const auto& leak : leaks) {
        double rate = leak.mass_rate;
        if (!steady) {
            const double overlap = std::max(0.0, t1 - std::max(t0, leak.start_time));
            rate = leak.mass_rate * overlap / (t1 - t0);
            mass += leak.mass_rate * overlap;
        }
        if (rate == 0.0) continue;
        const std::size_t node = grid.nearest_node(leak.position);
        if (node == 0) {
            sink.front() += rate;
        } else if (node == grid.node_count() - 1) {
            sink.back() += rate;
        } else {
            sink[node - 1] += 0.5 * rate;
            sink[node] += 0.5 * rate;
        }
    }
    if (total_mass) *total_mass = mass;
    return sink;
}

struct Unknowns {
    std::vector<double> p, v, t;
};

/// Fills the band matrix with J and rhs with -F. Returns max |scaled continuity residual|.
void assemble(const Problem& pr, const Unknowns& x, BandSystem& sys) {
    const auto& model = pr.model;
    const std::size_t n_nodes = model.node_count();
    const int inlet_rows = pr.upstream_is_inlet ? 2 : 1;
    sys.clear();

    // Inlet rows.
    {
        std::array<D6, 3> nv{D6::variable(x.p[0], 0), D6::variable(x.v[0], 1),
                             D6::variable(x.t[0], 2)};
        const D6 r = end_residual(model, 0, false, pr.bc.inlet, nv[0], nv[1], nv[2], pr.m_ref,
                                  pr.p_ref);
        for (int k = 0; k < 3; ++k) sys.set(0, k, r.d[k]);
        sys.rhs(0) = -r.v;
        if (pr.upstream_is_inlet) {
            sys.set(1, 2, 1.0);
            sys.rhs(1) = -(x.t[0] - pr.bc.supply_temperature);
        }
    }

    for (std::size_t c = 0; c + 1 < n_nodes; ++c) {
        const std::array<D6, 6> u{D6::variable(x.p[c], 0),     D6::variable(x.v[c], 1),
                                  D6::variable(x.t[c], 2),     D6::variable(x.p[c + 1], 3),
                                  D6::variable(x.v[c + 1], 4), D6::variable(x.t[c + 1], 5)};
        const auto now = cell_terms(model, c, u[0], u[1], u[2], u[3], u[4], u[5]);
        std::array<D6, 3> res;
        if (pr.steady) {
            res[0] = (now.flux_diff + pr.cell_sink[c]) / pr.m_ref;
            res[1] = now.momentum;
            // With no flow the steady energy rows vanish; a vanishing pull of each cell's
            // downstream temperature toward its upstream one selects the supply temperature.
            const D6 drift = now.mean_v.v >= 0.0 ? now.t2 - now.t1 : now.t1 - now.t2;
            res[2] = now.energy + kSteadyTemperatureRelax * drift;
        } else {
            const auto& old = pr.old_terms[c];
            const double th = pr.theta;
            res[0] = ((now.storage_mass - old.storage_mass) / pr.dt + th * now.flux_diff +
                      (1.0 - th) * old.flux_diff + pr.cell_sink[c]) /
                     pr.m_ref;
            res[1] = (now.mean_v - old.mean_v) / pr.dt + th * now.momentum +
                     (1.0 - th) * old.momentum;
            // Temperature storage sits on the downstream node of each cell (implicit upwind):
            // the centred box average leaves the node-to-node sawtooth undamped and rings at fronts.
            const D6 storage_t = now.mean_v.v >= 0.0 ? now.t2 - old.t2 : now.t1 - old.t1;
            res[2] = storage_t / pr.dt +
                     th * now.energy + (1.0 - th) * old.energy;
        }
        const int row0 = inlet_rows + 3 * static_cast<int>(c);
        const int col0 = 3 * static_cast<int>(c);
        for (int e = 0; e < 3; ++e) {
            for (int k = 0; k < 6; ++k) sys.set(row0 + e, col0 + k, res[e].d[k]);
            sys.rhs(row0 + e) = -res[e].v;
        }
    }

    // Outlet rows.
    {
        const std::size_t last = n_nodes - 1;
        const int row = inlet_rows + 3 * static_cast<int>(n_nodes - 1);
        const int col = 3 * static_cast<int>(last);
        std::array<D6, 3> nv{D6::variable(x.p[last], 0), D6::variable(x.v[last], 1),
                             D6::variable(x.t[last], 2)};
        const D6 r = end_residual(model, last, true, pr.bc.outlet, nv[0], nv[1], nv[2], pr.m_ref,
                                  pr.p_ref);
        for (int k = 0; k < 3; ++k) sys.set(row, col + k, r.d[k]);
        sys.rhs(row) = -r.v;
        if (!pr.upstream_is_inlet) {
            sys.set(row + 1, col + 2, 1.0);
            sys.rhs(row + 1) = -(x.t[last] - pr.bc.supply_temperature);
        }
    }
}

GridState to_state(const HydraulicModel& model, const Unknowns& x, double t) {
    GridState s;
    s.t = t;
    s.p = x.p;
    s.v = x.v;
    s.temp = x.t;
    s.rho.resize(x.p.size());
    for (std::size_t i = 0; i < x.p.size(); ++i) {
        if (!(x.p[i] > 0.0)) {
            std::ostringstream msg;
            msg << "non-positive pressure " << x.p[i] << " Pa at node " << i << " (x="
                << model.grid().node_positions[i] << " m)";
            throw InfeasibleStateError(msg.str(), i);
        }
        if (!(x.t[i] > 0.0)) {
            std::ostringstream msg;
            msg << "non-positive temperature at node " << i;
            throw InfeasibleStateError(msg.str(), i);
        }
        s.rho[i] = density(model.fluid(), x.p[i], x.t[i]);
    }
    return s;
}

int newton_solve(const Problem& pr, Unknowns& x, const SolverSettings& settings) {
    const std::size_t n_nodes = pr.model.node_count();
    const int n = 3 * static_cast<int>(n_nodes);
    BandSystem sys(n);
    std::vector<double> history;

    for (int it = 1; it <= settings.newton_max_iter; ++it) {
        assemble(pr, x, sys);
        if (!sys.solve()) {
            throw SolverError("Newton: singular Jacobian (check boundary conditions)", history);
        }
        const auto& dx = sys.solution();

        // Damping keeps pressure and temperature positive.
        double lambda = 1.0;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            const double dp = dx[3 * i];
            const double dtemp = dx[3 * i + 2];
            if (dp < 0.0 && x.p[i] + dp <= 0.0) lambda = std::min(lambda, 0.5 * x.p[i] / -dp);
            if (dtemp < 0.0 && x.t[i] + dtemp <= 0.0) {
                lambda = std::min(lambda, 0.5 * x.t[i] / -dtemp);
            }
        }

        double p_scale = 0.0, v_scale = 1e-2, t_scale = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            p_scale = std::max(p_scale, std::abs(x.p[i]));
            v_scale = std::max(v_scale, std::abs(x.v[i]));
            t_scale = std::max(t_scale, std::abs(x.t[i]));
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i) {
            x.p[i] += lambda * dx[3 * i];
            x.v[i] += lambda * dx[3 * i + 1];
            x.t[i] += lambda * dx[3 * i + 2];
            norm = std::max({norm, std::abs(dx[3 * i]) / p_scale, std::abs(dx[3 * i + 1]) / v_scale,
                             std::abs(dx[3 * i + 2]) / t_scale});
        }
        history.push_back(norm);
        if (!std::isfinite(norm)) break;
        if (lambda == 1.0 && norm < settings.newton_tol) return it;
    }
    std::ostringstream msg;
    msg << "Newton did not converge in " << settings.newton_max_iter << " iterations";
    if (!history.empty()) msg << " (last update norm " << history.back() << ")";
    throw SolverError(msg.str(), history);
}

void set_reference_scales(Problem& pr, double p_typ) {
    const auto& model = pr.model;
    const double t_ref = pr.bc.supply_temperature;
    const double rho_ref = density(model.fluid(), std::max(p_typ, 1.0), t_ref);
    double area = 0.0;
    for (std::size_t c = 0; c < model.grid().cell_count(); ++c) area = std::max(area, model.cell_area(c));
    pr.m_ref = rho_ref * area;  // mass flow of a 1 m/s stream
    pr.p_ref = rho_ref * model.fluid().sound_speed_hint();  // Joukowsky pressure per m/s
}

// ----- steady-state starting guess ------------------------------------------

double signed_square(double x) { return x * std::abs(x); }

struct Guess {
    double m_inlet = 0.0;
    std::vector<double> p;  // per node
};

/// Incompressible pressure march for a given inlet mass flow. `from_inlet` chooses the anchor end.
std::vector<double> march_pressure(const HydraulicModel& model, const std::vector<double>& sink,
                                   double m_inlet, double anchor_p, bool from_inlet, double rho) {
    const std::size_t n = model.node_count();
    std::vector<double> m_cell(n - 1);
    double m = m_inlet;
    for (std::size_t c = 0; c + 1 < n; ++c) {
        m_cell[c] = m - 0.5 * sink[c];
        m -= sink[c];
    }
    std::vector<double> drop(n - 1);
    for (std::size_t c = 0; c + 1 < n; ++c) {
        const auto& seg = model.cell_segment(c);
        const double v = m_cell[c] / (rho * model.cell_area(c));
        drop[c] = rho * (seg.friction_factor / (2.0 * seg.diameter) * signed_square(v) *
                             model.grid().cell_length(c) +
                         kGravity * (model.node_elevation(c + 1) - model.node_elevation(c)));
    }
    std::vector<double> p(n);
    if (from_inlet) {
        p[0] = anchor_p;
        for (std::size_t c = 0; c + 1 < n; ++c) p[c + 1] = p[c] - drop[c];
    } else {
        p[n - 1] = anchor_p;
        for (std::size_t c = n - 1; c-- > 0;) p[c] = p[c + 1] + drop[c];
    }
    return p;
}

double find_root(const auto& f, double scale) {
    double lo = -scale, hi = scale;
    for (int k = 0; k < 60 && f(lo) * f(hi) > 0.0; ++k) {
        lo *= 2.0;
        hi *= 2.0;
    }
    if (f(lo) * f(hi) > 0.0) return 0.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        if ((f(lo) > 0.0) == (f(mid) > 0.0)) lo = mid; else hi = mid;
        if (hi - lo <= 1e-12 * std::max(1.0, std::abs(mid))) break;
    }
    return 0.5 * (lo + hi);
}

Guess steady_guess(const HydraulicModel& model, const BoundaryValues& bc,
                   const std::vector<double>& sink) {
    const std::size_t n = model.node_count();
    double total_sink = 0.0;
    for (double s : sink) total_sink += s;

    const EndCondition& in = bc.inlet;
    const EndCondition& out = bc.outlet;
    if (in.kind == EndKind::mass_flow && out.kind == EndKind::mass_flow) {
        throw InfeasibleStateError("steady state: both ends flow-specified, no pressure anchor", 0);
    }
    double p_anchor = in.kind == EndKind::mass_flow ? out.value : in.value;
    const double rho = density(model.fluid(), std::max(p_anchor, 1.0), bc.supply_temperature);
    const double scale = rho * model.cell_area(0) * 10.0;

    auto inlet_p = [&](double m) {
        return in.kind == EndKind::valve ? in.value - signed_square(m / in.valve_cv) : in.value;
    };
    auto outlet_p = [&](double m_out) {
        return out.kind == EndKind::valve ? out.value + signed_square(m_out / out.valve_cv)
                                          : out.value;
    };

    Guess g;
    if (in.kind == EndKind::mass_flow) {
        g.m_inlet = in.value;
        g.p = march_pressure(model, sink, g.m_inlet, outlet_p(g.m_inlet - total_sink), false, rho);
    } else if (out.kind == EndKind::mass_flow) {
        g.m_inlet = out.value + total_sink;
        g.p = march_pressure(model, sink, g.m_inlet, inlet_p(g.m_inlet), true, rho);
    } else {
        auto mismatch = [&](double m) {
            const auto p = march_pressure(model, sink, m, inlet_p(m), true, rho);
            return p[n - 1] - outlet_p(m - total_sink);
        };
        g.m_inlet = find_root(mismatch, scale);
        g.p = march_pressure(model, sink, g.m_inlet, inlet_p(g.m_inlet), true, rho);
    }
    return g;
}

}  // namespace

GridState steady_state(const HydraulicModel& model, const BoundaryValues& bc,
                       std::span<const LeakEvent> leaks, const SolverSettings& settings) {
    settings.validate();
    Problem pr{model, bc};
    pr.steady = true;
    pr.cell_sink = cell_sinks(model, leaks, 0.0, 0.0, true);

    const Guess g = steady_guess(model, bc, pr.cell_sink);
    const std::size_t n = model.node_count();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(g.p[i] > 0.0)) {
            std::ostringstream msg;
            msg << "steady state infeasible: pressure estimate " << g.p[i] << " Pa at node " << i
                << " (x=" << model.grid().node_positions[i] << " m)";
            throw InfeasibleStateError(msg.str(), i);
        }
    }

    Unknowns x;
    x.p = g.p;
    x.t.assign(n, bc.supply_temperature);
    x.v.resize(n);
    double m = g.m_inlet;
    for (std::size_t i = 0; i < n; ++i) {
        const double rho = density(model.fluid(), x.p[i], x.t[i]);
        x.v[i] = m / (rho * model.node_area(i));
        if (i + 1 < n) m -= pr.cell_sink[i];
    }
    pr.upstream_is_inlet = g.m_inlet >= 0.0;
    set_reference_scales(pr, *std::max_element(g.p.begin(), g.p.end()));

    SolverSettings s = settings;
    s.newton_max_iter = std::max(s.newton_max_iter, 50);
    newton_solve(pr, x, s);
    return to_state(model, x, 0.0);
}

StepResult advance_with_ledger(const HydraulicModel& model, const GridState& state,
                               const BoundaryConditions& bc, std::span<const LeakEvent> leaks,
                               const SolverSettings& settings) {
    settings.validate();
    const std::size_t n = model.node_count();
    if (state.size() != n) throw ConfigError("", "state does not match the grid");

    const double t0 = state.t;
    const double t1 = state.t + settings.dt;
    Problem pr{model, bc.at(t1)};
    pr.steady = false;
    pr.dt = settings.dt;
    pr.theta = settings.theta;

    double leak_mass = 0.0;
    pr.cell_sink = cell_sinks(model, leaks, t0, t1, false, &leak_mass);

    double v_sum = 0.0;
    for (double v : state.v) v_sum += v;
    pr.upstream_is_inlet = v_sum >= 0.0;
    set_reference_scales(pr, *std::max_element(state.p.begin(), state.p.end()));

    pr.old_terms.reserve(n - 1);
    for (std::size_t c = 0; c + 1 < n; ++c) {
        pr.old_terms.push_back(cell_terms(model, c, state.p[c], state.v[c], state.temp[c],
                                          state.p[c + 1], state.v[c + 1], state.temp[c + 1]));
    }

    Unknowns x{state.p, state.v, state.temp};
    StepResult result;
    result.newton_iterations = newton_solve(pr, x, settings);
    result.state = to_state(model, x, t1);

    const double th = settings.theta;
    auto& ledger = result.ledger;
    ledger.mass_in = settings.dt * (th * mass_flow_at(model, result.state, 0) +
                                    (1.0 - th) * mass_flow_at(model, state, 0));
    ledger.mass_out = settings.dt * (th * mass_flow_at(model, result.state, n - 1) +
                                     (1.0 - th) * mass_flow_at(model, state, n - 1));
    ledger.leak_mass = leak_mass;
    ledger.linepack_before = linepack(model, state);
    ledger.linepack_after = linepack(model, result.state);
    return result;
}

GridState advance(const HydraulicModel& model, const GridState& state,
                  const BoundaryConditions& bc, std::span<const LeakEvent> leaks,
                  const SolverSettings& settings) {
    return advance_with_ledger(model, state, bc, leaks, settings).state;
}

}  // namespace pipeleak
