#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string_view>
#include <vector>

#include "palab/contract.hpp"
#include "palab/default_time.hpp"
#include "palab/market.hpp"

namespace palab {

/// Which integro-PDE is solved: zero terminal value (default certain before
/// the horizon) or (1 - F(T))(x - y) (default may not happen).
enum class PdeCase { Bounded, Unbounded };

/// Ξ (general), Ξˡ (wealth incentive pinned to a percentage p), Ξ° (asset not
/// contractible, z = g = 0).
enum class ContractClass { General, Linear, NoS };

std::string_view to_string(PdeCase c);
PdeCase pde_case_from_string(std::string_view name);
std::string_view to_string(ContractClass c);
ContractClass contract_class_from_string(std::string_view name);

/// Checks that a default law is compatible with the PDE case: Beta and Uniform
/// laws need the bounded case, Exponential the unbounded one. None fits both.
void validate_case(PdeCase c, const DefaultModel& m);

struct GridSpec {
    std::size_t nt = 40;
    std::size_t nx = 40;
    std::size_t ny = 40;
    double t_max = 1.0;
    double x_min = 0.0;
    double x_max = 10.0;
    double y_min = -2.0;
    double y_max = 2.0;

    void validate() const;

    double dt() const { return t_max / static_cast<double>(nt - 1); }
    double dx() const { return (x_max - x_min) / static_cast<double>(nx - 1); }
    double dy() const { return (y_max - y_min) / static_cast<double>(ny - 1); }
    double t(std::size_t i) const { return i + 1 == nt ? t_max : dt() * static_cast<double>(i); }
    double x(std::size_t j) const { return j + 1 == nx ? x_max : x_min + dx() * static_cast<double>(j); }
    double y(std::size_t k) const { return k + 1 == ny ? y_max : y_min + dy() * static_cast<double>(k); }

    std::size_t slice_size() const { return nx * ny; }
    std::size_t size() const { return nt * nx * ny; }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * nx + j) * ny + k; }
};

struct Node {
    std::size_t i = 0;  ///< time index
    std::size_t j = 0;  ///< wealth index
    std::size_t k = 0;  ///< contract-value index
};

/// v(t_i, x_j, y_k) on a GridSpec, node-major with y fastest.
struct ValueGrid {
    GridSpec spec;
    std::vector<double> values;

    explicit ValueGrid(const GridSpec& s = {}) : spec(s), values(s.size(), 0.0) {}

    double& at(std::size_t i, std::size_t j, std::size_t k) { return values[spec.index(i, j, k)]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return values[spec.index(i, j, k)]; }
    const double* slice(std::size_t i) const { return values.data() + i * spec.slice_size(); }
    double* slice(std::size_t i) { return values.data() + i * spec.slice_size(); }

    /// Trilinear interpolation, state clamped to the grid.
    double interpolate(double t, double x, double y) const;
};

/// Per-node controls of the single-asset problem.
struct ScalarControls {
    double z = 0.0;
    double z_x = 0.0;
    double g = 0.0;
    double g_x = 0.0;
    double u = 0.0;

    ControlTuple tuple() const { return ControlTuple::scalar(z, z_x, g, g_x, u); }
    double squared_norm() const { return z * z + z_x * z_x + g * g + g_x * g_x + u * u; }
    bool operator==(const ScalarControls&) const = default;
};

struct PolicyGrid {
    GridSpec spec;
    std::vector<ScalarControls> controls;

    explicit PolicyGrid(const GridSpec& s = {}, ScalarControls fill = {})
        : spec(s), controls(s.size(), fill) {}

    ScalarControls& at(std::size_t i, std::size_t j, std::size_t k) { return controls[spec.index(i, j, k)]; }
    const ScalarControls& at(std::size_t i, std::size_t j, std::size_t k) const {
        return controls[spec.index(i, j, k)];
    }

    /// Trilinear interpolation of every field, state clamped to the grid.
    ScalarControls interpolate(double t, double x, double y) const;
};

/// Closed interval scanned with `points` equally spaced values (one point
/// means the midpoint only).
struct ControlRange {
    double lo = -2.0;
    double hi = 2.0;
    std::size_t points = 9;

    double value(std::size_t n) const;
};

struct SolverConfig {
    std::size_t max_iter = 50;
    double tol = 1e-6;  ///< sup-norm value change that stops the iteration

    ControlRange z{-2.0, 2.0, 9};
    ControlRange z_x{-2.0, 2.0, 9};
    ControlRange g{-2.0, 2.0, 9};
    /// Upper end NaN means 1 / sigma^2 - 1e-3.
    ControlRange g_x{-2.0, std::numeric_limits<double>::quiet_NaN(), 9};
    ControlRange u{-2.0, 2.0, 41};

    std::size_t refine_levels = 2;
    std::size_t refine_points = 5;    ///< per control at each refinement level
    std::size_t u_refine_points = 11;
    double shrink = 5.0;              ///< window shrink factor per level

    double w_start = 0.5;
    double w_end = 0.99;
    std::size_t ramp = 10;

    ContractClass contract_class = ContractClass::General;
    double linear_p = 0.0;  ///< pinned z_x for the linear class

    bool include_jumps = true;   ///< false drops lambda from F and the jump term
    double tie_tol = 1e-12;      ///< relative tolerance under which H values tie
    double residual_tol = 1e-3;  ///< relative discrete-residual tolerance
    double cfl_safety = 0.9;
    std::size_t max_substeps = 2'000'000;

    /// Relaxation weight of iteration k.
    double relaxation(std::size_t k) const;

    /// g_x range with the automatic upper end resolved.
    ControlRange resolved_g_x(const ScalarMarket& s) const;

    /// Throws ConfigError when ranges are empty or the g_x range reaches the
    /// admissibility boundary.
    void validate(const ScalarMarket& s) const;
};

/// Central differences of v at a node (one-sided at the spatial boundary).
struct Derivatives {
    double v = 0.0;
    double v_x = 0.0;
    double v_y = 0.0;
    double v_xx = 0.0;
    double v_yy = 0.0;
    double v_xy = 0.0;
};

Derivatives derivatives(const ValueGrid& v, const Node& node);

/// Terminal value of the chosen case.
double terminal_condition(PdeCase c, const DefaultModel& m, double x, double y);

/// v(t_i, x_j, y + u): linear interpolation in y, linear extrapolation with
/// the boundary slope outside the grid.
double jump_evaluate(const ValueGrid& v, std::size_t i, std::size_t j, double y, double u);

/// Reduced Hamiltonian of the single-asset principal problem at a node:
///   v_x pi b + v_xx pi^2 s2 / 2
///   + v_y [z b + z_x pi b + pi^2 s2 (g_x + eta z_x^2) / 2 + pi s2 g - F]
///   + v_yy (z + z_x pi)^2 s2 / 2 + v_xy pi (z + z_x pi) s2
///   + lambda (v(t, x, y + u) - v(t, x, y)),
/// with s2 = sigma^2, pi = agent_strategy and F = generator_F at the capped hazard.
/// With include_jumps false the hazard is treated as zero.
double hamiltonian(const MarketParams& p, const DefaultModel& m, const ValueGrid& v, const Node& node,
                   const ControlTuple& ct, const Derivatives& d, bool include_jumps = true);

struct SearchResult {
    ScalarControls controls;
    double value = -std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
};

/// Coarse-to-fine grid search of the Hamiltonian over the control box.
///
/// The jump compensation u enters only through the jump terms, so it is
/// searched separately from (z, z_x, g, g_x). The coarse level of the
/// four-dimensional search does not depend on the node; its Hamiltonian
/// coefficients are computed once and tuples with identical coefficients are
/// merged, keeping the smallest norm. Each refinement level scans a window
/// shrunk by `shrink` around the incumbent. Ties (within tie_tol relative)
/// go to the smallest control norm.
class ControlSearch {
public:
    ControlSearch(const MarketParams& p, const SolverConfig& cfg);

    SearchResult maximize(const DefaultModel& m, const ValueGrid& v, const Node& node) const;

    /// Same search with the refinement depth overridden.
    SearchResult maximize(const DefaultModel& m, const ValueGrid& v, const Node& node,
                          std::size_t refine_levels) const;

    /// Every tuple of the coarse grid (u taken from the coarse u grid).
    std::vector<ScalarControls> coarse_tuples() const;

    std::size_t coarse_size() const { return coarse_.size(); }
    const ScalarMarket& market() const { return s_; }
    const SolverConfig& config() const { return cfg_; }

    /// Node-independent Hamiltonian coefficients of (z, z_x, g, g_x):
    /// multipliers of v_x, v_xx, v_y, v_yy, v_xy.
    struct Coefficients {
        double a[5];
    };
    Coefficients coefficients(double z, double z_x, double g, double g_x) const;

private:
    struct CoarseEntry {
        Coefficients coef;
        double z, z_x, g, g_x;
        double norm2;
    };

    std::vector<double> axis(const ControlRange& r, int which) const;

    ScalarMarket s_;
    SolverConfig cfg_;
    ControlRange gx_range_;
    std::vector<CoarseEntry> coarse_;
    std::vector<double> u_axis_;
};

/// maximize_hamiltonian over the configured control grid (builds a one-off
/// ControlSearch).
SearchResult maximize_hamiltonian(const MarketParams& p, const DefaultModel& m, const ValueGrid& v,
                                  const Node& node, const SolverConfig& cfg);

struct PdeStats {
    std::size_t substeps = 0;
};

/// Backward explicit time stepping of
///   d_t v + (x - y) f(t) + H(v; frozen controls) = 0
/// from the terminal slice. The controls of slice i drive the step from t_{i+1}
/// down to t_i; each step is sub-divided to respect the explicit stability
/// bound of the current coefficients and hazard. The source is integrated
/// exactly over every sub-step, (x - y)(F(t_hi) - F(t_lo)). Boundary nodes
/// are filled by linear extrapolation.
ValueGrid solve_pde_frozen(const MarketParams& p, const DefaultModel& m, const PolicyGrid& policy,
                           PdeCase c, const SolverConfig& cfg = {}, PdeStats* stats = nullptr);

/// Propagates one stored interval: returns slice i computed from `later`
/// (slice i + 1) with the controls of slice i.
std::vector<double> propagate_interval(const ControlSearch& cs, const DefaultModel& m,
                                       const GridSpec& spec, const std::vector<ScalarControls>& controls,
                                       const double* later, std::size_t i, std::size_t* substeps = nullptr);

struct ResidualReport {
    std::size_t interior_nodes = 0;
    double fraction_within = 0.0;  ///< share with |r| <= residual_tol (1 + |v|)
    double q99 = 0.0;              ///< 99th percentile of |r| / (1 + |v|)
    double max = 0.0;
};

/// Discrete HJB residual of v: each stored step is recomputed with the
/// controls that maximise the Hamiltonian of v, and the mismatch with the
/// stored slice is divided by the step length.
ResidualReport hjb_residual(const MarketParams& p, const DefaultModel& m, const ValueGrid& v,
                            const SolverConfig& cfg);

struct SolverDiagnostics {
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> value_changes;
    std::size_t substeps = 0;
    double seconds = 0.0;
};

struct SolveResult {
    ValueGrid value;
    PolicyGrid policy;
    SolverDiagnostics diagnostics;
};

/// Initial controls of the configured contract class (zeros, z_x = p for the
/// linear class).
ScalarControls initial_controls(const SolverConfig& cfg);

/// Alternates solve_pde_frozen with per-node maximisation, relaxing the
/// controls by the weight schedule, until the sup-norm value change drops
/// to tol or max_iter is reached. Non-convergence is reported through the
/// diagnostics; the returned pair is the iterate with the smallest change.
SolveResult actor_critic(const MarketParams& p, const DefaultModel& m, const GridSpec& grid,
                         const SolverConfig& cfg, PdeCase c);

/// v(0, x0, 0) - reservation_y0(R, eta).
double principal_value(const ValueGrid& v, const MarketParams& p, double R);

/// Node-major CSV dump with columns t,x,y,value,z,z_x,g,g_x,u.
void write_solution_csv(const std::filesystem::path& path, const ValueGrid& v, const PolicyGrid& policy);

struct LoadedSolution {
    ValueGrid value;
    PolicyGrid policy;
};

/// Reads a dump produced by write_solution_csv.
LoadedSolution read_solution_csv(const std::filesystem::path& path);

}  // namespace palab
