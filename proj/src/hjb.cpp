#include "palab/hjb.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "palab/errors.hpp"
#include "palab/parallel.hpp"

namespace palab {

namespace {

constexpr double kNodeSnap = 1e-9;

struct Cell {
    std::size_t lo = 0;
    double frac = 0.0;
};

// Cell of a clamped coordinate on a uniform axis with n nodes.
Cell locate(double q, double lo, double step, std::size_t n) {
    double pos = (q - lo) / step;
    const double last = static_cast<double>(n - 1);
    pos = std::clamp(pos, 0.0, last);
    auto k = static_cast<std::size_t>(std::floor(pos));
    if (k >= n - 1) k = n - 2;
    return {k, pos - static_cast<double>(k)};
}

double lerp(double a, double b, double w) { return a + (b - a) * w; }

Derivatives slice_derivatives(const double* s, const GridSpec& g, std::size_t j, std::size_t k) {
    const std::size_t ny = g.ny;
    const double dx = g.dx();
    const double dy = g.dy();
    auto at = [&](std::size_t jj, std::size_t kk) { return s[jj * ny + kk]; };

    // First derivative in y at column jj.
    auto dy_at = [&](std::size_t jj) {
        if (k == 0) return (at(jj, 1) - at(jj, 0)) / dy;
        if (k + 1 == ny) return (at(jj, ny - 1) - at(jj, ny - 2)) / dy;
        return (at(jj, k + 1) - at(jj, k - 1)) / (2.0 * dy);
    };

    Derivatives d;
    d.v = at(j, k);
    std::size_t jm = j;
    std::size_t jp = j;
    std::size_t jc = j;
    double hx = 2.0 * dx;
    if (j == 0) {
        jp = 1;
        jc = 1;
        hx = dx;
    } else if (j + 1 == g.nx) {
        jm = j - 1;
        jc = j - 1;
        hx = dx;
    } else {
        jm = j - 1;
        jp = j + 1;
    }
    d.v_x = (at(jp, k) - at(jm, k)) / hx;
    d.v_xx = (at(jc + 1, k) - 2.0 * at(jc, k) + at(jc - 1, k)) / (dx * dx);
    d.v_xy = (dy_at(jp) - dy_at(jm)) / hx;

    d.v_y = dy_at(j);
    const std::size_t kc = k == 0 ? 1 : (k + 1 == ny ? k - 1 : k);
    d.v_yy = (at(j, kc + 1) - 2.0 * at(j, kc) + at(j, kc - 1)) / (dy * dy);
    return d;
}

// v(x_j, y + u) on one slice.
double slice_jump(const double* s, const GridSpec& g, std::size_t j, double y, double u) {
    const double* col = s + j * g.ny;
    const double dy = g.dy();
    const double q = y + u;
    const double pos = (q - g.y_min) / dy;
    const double last = static_cast<double>(g.ny - 1);
    if (pos <= 0.0) return col[0] + (q - g.y_min) * (col[1] - col[0]) / dy;
    if (pos >= last) return col[g.ny - 1] + (q - g.y_max) * (col[g.ny - 1] - col[g.ny - 2]) / dy;
    const double r = std::round(pos);
    if (std::abs(pos - r) < kNodeSnap) return col[static_cast<std::size_t>(r)];
    const auto k = static_cast<std::size_t>(std::floor(pos));
    return lerp(col[k], col[k + 1], pos - static_cast<double>(k));
}

double snap_zero(double x) { return x == 0.0 ? 0.0 : x; }

std::vector<double> range_axis(const ControlRange& r) {
    std::vector<double> out(r.points);
    for (std::size_t n = 0; n < r.points; ++n) out[n] = r.value(n);
    return out;
}

double coarse_step(const ControlRange& r) {
    return r.points > 1 ? (r.hi - r.lo) / static_cast<double>(r.points - 1) : 0.0;
}

// Window of `points` values centred on `centre`, clipped to [lo, hi].
std::vector<double> window(double centre, double half, std::size_t points, double lo, double hi) {
    std::vector<double> out;
    out.reserve(points);
    if (points == 1 || half <= 0.0) {
        out.push_back(centre);
        return out;
    }
    for (std::size_t n = 0; n < points; ++n) {
        const double w = -1.0 + 2.0 * static_cast<double>(n) / static_cast<double>(points - 1);
        out.push_back(std::clamp(centre + half * w, lo, hi));
    }
    if (points % 2 == 1) out[points / 2] = centre;
    return out;
}

bool better(double value, double norm2, double best, double best_norm2, double tie_tol) {
    const double tol = tie_tol * (1.0 + std::abs(best));
    if (value > best + tol) return true;
    return value >= best - tol && norm2 < best_norm2;
}

struct SliceCoefficients {
    std::vector<std::array<double, 5>> a;
    std::vector<double> jc;
    std::vector<double> u;
    double rate = 0.0;       // max diffusion / drift rate over interior nodes
    double jump_scale = 0.0; // max |jc| over interior nodes
};

SliceCoefficients slice_coefficients(const ControlSearch& cs, const GridSpec& g,
                                     const ScalarControls* controls) {
    SliceCoefficients sc;
    const std::size_t n = g.slice_size();
    sc.a.resize(n);
    sc.jc.resize(n);
    sc.u.resize(n);
    const double dx = g.dx();
    const double dy = g.dy();
    const double eta = cs.market().eta;
    for (std::size_t idx = 0; idx < n; ++idx) {
        const ScalarControls& c = controls[idx];
        const auto coef = cs.coefficients(c.z, c.z_x, c.g, c.g_x);
        std::copy(std::begin(coef.a), std::end(coef.a), sc.a[idx].begin());
        sc.jc[idx] = std::expm1(-eta * c.u) / eta;
        sc.u[idx] = c.u;
        const std::size_t j = idx / g.ny;
        const std::size_t k = idx % g.ny;
        if (j == 0 || k == 0 || j + 1 == g.nx || k + 1 == g.ny) continue;
        const auto& a = sc.a[idx];
        const double r = 2.0 * a[1] / (dx * dx) + 2.0 * a[3] / (dy * dy) + std::abs(a[0]) / dx +
                         std::abs(a[2]) / dy + std::abs(a[4]) / (dx * dy);
        sc.rate = std::max(sc.rate, r);
        sc.jump_scale = std::max(sc.jump_scale, std::abs(sc.jc[idx]));
    }
    return sc;
}

void extrapolate_boundary(double* s, const GridSpec& g) {
    const std::size_t nx = g.nx;
    const std::size_t ny = g.ny;
    for (std::size_t k = 0; k < ny; ++k) {
        s[k] = 2.0 * s[ny + k] - s[2 * ny + k];
        s[(nx - 1) * ny + k] = 2.0 * s[(nx - 2) * ny + k] - s[(nx - 3) * ny + k];
    }
    for (std::size_t j = 0; j < nx; ++j) {
        double* col = s + j * ny;
        col[0] = 2.0 * col[1] - col[2];
        col[ny - 1] = 2.0 * col[ny - 2] - col[ny - 3];
    }
}

std::vector<double> propagate(const ControlSearch& cs, const DefaultModel& m, const GridSpec& g,
                              const ScalarControls* controls, const double* later, std::size_t i,
                              std::size_t* substeps) {
    const SolverConfig& cfg = cs.config();
    const SliceCoefficients sc = slice_coefficients(cs, g, controls);
    const std::size_t n = g.slice_size();
    std::vector<double> cur(later, later + n);
    std::vector<double> next(n);

    const double t_end = g.t(i);
    double t_hi = g.t(i + 1);
    auto lambda = [&](double t) { return cfg.include_jumps ? m.hazard(t) : 0.0; };
    const double dy = g.dy();
    const double jump_rate = 1.0 + sc.jump_scale / dy;
    std::size_t count = 0;

    while (t_hi > t_end) {
        const double remaining = t_hi - t_end;
        const double lam = lambda(t_hi);
        auto step_for = [&](double l) {
            const double rate = sc.rate + l * jump_rate;
            return rate > 0.0 ? cfg.cfl_safety / rate : remaining;
        };
        double delta = std::min(step_for(lam), remaining);
        const double lam_lo = lambda(t_hi - delta);
        if (lam_lo > lam) delta = std::min(step_for(lam_lo), remaining);
        // Avoid a sliver at the end of the interval.
        const double t_lo = delta >= remaining * (1.0 - 1e-12) ? t_end : t_hi - delta;
        delta = t_hi - t_lo;
        if (++count > cfg.max_substeps)
            throw StepSizeError("explicit step bound requires more than " + std::to_string(cfg.max_substeps) +
                                " sub-steps on [" + std::to_string(t_end) + ", " + std::to_string(g.t(i + 1)) +
                                "]");

        const double mass = m.survival(t_lo) - m.survival(t_hi);
        parallel_for(g.nx - 2, [&](std::size_t begin, std::size_t end) {
            for (std::size_t jj = begin; jj < end; ++jj) {
                const std::size_t j = jj + 1;
                const double x = g.x(j);
                for (std::size_t k = 1; k + 1 < g.ny; ++k) {
                    const std::size_t idx = j * g.ny + k;
                    const Derivatives d = slice_derivatives(cur.data(), g, j, k);
                    const auto& a = sc.a[idx];
                    double h = d.v_x * a[0] + d.v_xx * a[1] + d.v_y * a[2] + d.v_yy * a[3] + d.v_xy * a[4];
                    if (lam > 0.0)
                        h += lam * (d.v_y * sc.jc[idx] + slice_jump(cur.data(), g, j, g.y(k), sc.u[idx]) - d.v);
                    next[idx] = d.v + (x - g.y(k)) * mass + delta * h;
                }
            }
        });
        extrapolate_boundary(next.data(), g);
        std::swap(cur, next);
        t_hi = t_lo;
    }
    if (substeps) *substeps += count;
    return cur;
}

std::vector<ScalarControls> maximize_slice(const ControlSearch& cs, const DefaultModel& m, const ValueGrid& v,
                                           std::size_t i) {
    const GridSpec& g = v.spec;
    std::vector<ScalarControls> out(g.slice_size());
    parallel_for(g.nx, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j)
            for (std::size_t k = 0; k < g.ny; ++k) out[j * g.ny + k] = cs.maximize(m, v, {i, j, k}).controls;
    });
    return out;
}

std::string format_double(double x, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, x);
    return buf;
}

}  // namespace

std::string_view to_string(PdeCase c) { return c == PdeCase::Bounded ? "bounded" : "unbounded"; }

PdeCase pde_case_from_string(std::string_view name) {
    if (name == "bounded") return PdeCase::Bounded;
    if (name == "unbounded") return PdeCase::Unbounded;
    throw ConfigError("case", "unknown case '" + std::string(name) + "' (expected bounded or unbounded)");
}

std::string_view to_string(ContractClass c) {
    switch (c) {
        case ContractClass::General: return "general";
        case ContractClass::Linear: return "linear";
        case ContractClass::NoS: return "no_s";
    }
    return "unknown";
}

ContractClass contract_class_from_string(std::string_view name) {
    if (name == "general") return ContractClass::General;
    if (name == "linear") return ContractClass::Linear;
    if (name == "no_s") return ContractClass::NoS;
    throw ConfigError("contract_class", "unknown contract class '" + std::string(name) + "'");
}

void validate_case(PdeCase c, const DefaultModel& m) {
    if (m.family() == DefaultFamily::None) return;
    if (c == PdeCase::Bounded && !m.is_bounded())
        throw ConfigError("case", "default law '" + m.label() +
                                      "' has unbounded support and needs the unbounded case");
    if (c == PdeCase::Unbounded && m.is_bounded())
        throw ConfigError("case", "default law '" + m.label() +
                                      "' is supported in [0, T] and needs the bounded case");
}

void GridSpec::validate() const {
    if (nt < 2) throw ConfigError("nt", "need at least 2 time nodes");
    if (nx < 8) throw ConfigError("nx", "need at least 8 wealth nodes");
    if (ny < 8) throw ConfigError("ny", "need at least 8 contract-value nodes");
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("horizon", "must be positive");
    if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
        throw ConfigError("x_max", "wealth range must be a finite non-empty interval");
    if (!(y_max > y_min) || !std::isfinite(y_min) || !std::isfinite(y_max))
        throw ConfigError("y_max", "contract-value range must be a finite non-empty interval");
}

double ValueGrid::interpolate(double t, double x, double y) const {
    const Cell ct = locate(t, 0.0, spec.dt(), spec.nt);
    const Cell cx = locate(x, spec.x_min, spec.dx(), spec.nx);
    const Cell cy = locate(y, spec.y_min, spec.dy(), spec.ny);
    auto plane = [&](std::size_t i) {
        const double a = lerp(at(i, cx.lo, cy.lo), at(i, cx.lo, cy.lo + 1), cy.frac);
        const double b = lerp(at(i, cx.lo + 1, cy.lo), at(i, cx.lo + 1, cy.lo + 1), cy.frac);
        return lerp(a, b, cx.frac);
    };
    return lerp(plane(ct.lo), plane(ct.lo + 1), ct.frac);
}

ScalarControls PolicyGrid::interpolate(double t, double x, double y) const {
    const Cell ct = locate(t, 0.0, spec.dt(), spec.nt);
    const Cell cx = locate(x, spec.x_min, spec.dx(), spec.nx);
    const Cell cy = locate(y, spec.y_min, spec.dy(), spec.ny);
    ScalarControls out;
    for (int c = 0; c < 8; ++c) {
        const std::size_t di = c & 1;
        const std::size_t dj = (c >> 1) & 1;
        const std::size_t dk = (c >> 2) & 1;
        const double w = (di ? ct.frac : 1.0 - ct.frac) * (dj ? cx.frac : 1.0 - cx.frac) *
                         (dk ? cy.frac : 1.0 - cy.frac);
        if (w == 0.0) continue;
        const ScalarControls& s = at(ct.lo + di, cx.lo + dj, cy.lo + dk);
        out.z += w * s.z;
        out.z_x += w * s.z_x;
        out.g += w * s.g;
        out.g_x += w * s.g_x;
        out.u += w * s.u;
    }
    return out;
}

double ControlRange::value(std::size_t n) const {
    if (points <= 1) return 0.5 * (lo + hi);
    if (n + 1 == points) return hi;
    return lo + (hi - lo) * static_cast<double>(n) / static_cast<double>(points - 1);
}

double SolverConfig::relaxation(std::size_t k) const {
    if (ramp == 0) return w_end;
    return std::min(w_end, w_start + static_cast<double>(k) * (w_end - w_start) / static_cast<double>(ramp));
}

ControlRange SolverConfig::resolved_g_x(const ScalarMarket& s) const {
    ControlRange r = g_x;
    if (std::isnan(r.hi)) r.hi = 1.0 / s.cov - 1e-3;
    return r;
}

void SolverConfig::validate(const ScalarMarket& s) const {
    auto check = [](const ControlRange& r, const char* key) {
        if (r.points == 0) throw ConfigError(key, "control grid needs at least one point");
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
            throw ConfigError(key, "control range must be a finite interval with lo <= hi");
    };
    check(z, "z_range");
    check(z_x, "z_x_range");
    check(g, "g_range");
    check(u, "u_range");
    const ControlRange gx = resolved_g_x(s);
    check(gx, "g_x_range");
    if (!s.admissible(gx.hi))
        throw ConfigError("g_x_range", "upper end " + std::to_string(gx.hi) + " must stay below 1 / sigma^2 = " +
                                           std::to_string(1.0 / s.cov));
    if (max_iter == 0) throw ConfigError("max_iter", "must be positive");
    if (!(tol > 0.0)) throw ConfigError("tol", "must be positive");
    if (!(w_start > 0.0 && w_start <= 1.0)) throw ConfigError("w_start", "must lie in (0, 1]");
    if (!(w_end > 0.0 && w_end <= 1.0)) throw ConfigError("w_end", "must lie in (0, 1]");
    if (refine_points == 0 || u_refine_points == 0)
        throw ConfigError("refine_points", "must be positive");
    if (!(shrink > 1.0)) throw ConfigError("shrink", "must exceed 1");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw ConfigError("cfl_safety", "must lie in (0, 1]");
    if (!(tie_tol >= 0.0)) throw ConfigError("tie_tol", "must be nonnegative");
    if (!(residual_tol > 0.0)) throw ConfigError("residual_tol", "must be positive");
    if (contract_class == ContractClass::Linear && !std::isfinite(linear_p))
        throw ConfigError("p", "linear contract percentage must be finite");
}

Derivatives derivatives(const ValueGrid& v, const Node& node) {
    return slice_derivatives(v.slice(node.i), v.spec, node.j, node.k);
}

double terminal_condition(PdeCase c, const DefaultModel& m, double x, double y) {
    if (c == PdeCase::Bounded) return 0.0;
    return m.survival(m.horizon()) * (x - y);
}

double jump_evaluate(const ValueGrid& v, std::size_t i, std::size_t j, double y, double u) {
    return slice_jump(v.slice(i), v.spec, j, y, u);
}

double hamiltonian(const MarketParams& p, const DefaultModel& m, const ValueGrid& v, const Node& node,
                   const ControlTuple& ct, const Derivatives& d, bool include_jumps) {
    require_admissible(p, ct);
    const double lambda = include_jumps ? m.hazard(v.spec.t(node.i)) : 0.0;
    const Eigen::MatrixXd cov = p.covariance();
    const Eigen::VectorXd pi = agent_strategy(p, ct);
    const double F = generator_F(p, ct, lambda);
    const double pi_s2 = pi.dot(cov * pi);
    const Eigen::VectorXd y_vol = ct.z + ct.z_x * pi;

    const double drift_y = ct.z.dot(p.b) + ct.z_x * pi.dot(p.b) + 0.5 * pi_s2 * (ct.g_x + p.eta * ct.z_x * ct.z_x) +
                           pi.dot(cov * ct.g) - F;
    double h = d.v_x * pi.dot(p.b) + 0.5 * d.v_xx * pi_s2 + d.v_y * drift_y + 0.5 * d.v_yy * y_vol.dot(cov * y_vol) +
               d.v_xy * pi.dot(cov * y_vol);
    if (lambda > 0.0) {
        const double y = v.spec.y(node.k);
        h += lambda * (jump_evaluate(v, node.i, node.j, y, ct.u) - v.at(node.i, node.j, node.k));
    }
    return h;
}

ControlSearch::ControlSearch(const MarketParams& p, const SolverConfig& cfg)
    : s_(ScalarMarket::from(p)), cfg_(cfg) {
    cfg_.validate(s_);
    gx_range_ = cfg_.resolved_g_x(s_);

    const std::vector<double> zs = axis(cfg_.z, 0);
    const std::vector<double> zxs = axis(cfg_.z_x, 1);
    const std::vector<double> gs = axis(cfg_.g, 2);
    std::vector<double> gxs;
    for (double v : axis(gx_range_, 3))
        if (s_.admissible(v)) gxs.push_back(v);
    if (gxs.empty()) throw ConfigError("g_x_range", "no admissible g_x value on the control grid");
    u_axis_ = axis(cfg_.u, 4);

    std::map<std::array<std::uint64_t, 5>, std::size_t> seen;
    for (double z : zs)
        for (double zx : zxs)
            for (double g : gs)
                for (double gx : gxs) {
                    CoarseEntry e{coefficients(z, zx, g, gx), z, zx, g, gx, z * z + zx * zx + g * g + gx * gx};
                    std::array<std::uint64_t, 5> key;
                    for (int n = 0; n < 5; ++n) key[n] = std::bit_cast<std::uint64_t>(snap_zero(e.coef.a[n]));
                    const auto [it, inserted] = seen.emplace(key, coarse_.size());
                    if (inserted) coarse_.push_back(e);
                    else if (e.norm2 < coarse_[it->second].norm2) coarse_[it->second] = e;
                }
}

std::vector<double> ControlSearch::axis(const ControlRange& r, int which) const {
    const bool linear = cfg_.contract_class == ContractClass::Linear;
    const bool no_s = cfg_.contract_class == ContractClass::NoS;
    if (which == 1 && linear) return {cfg_.linear_p};
    if ((which == 0 || which == 2) && no_s) return {0.0};
    return range_axis(r);
}

ControlSearch::Coefficients ControlSearch::coefficients(double z, double z_x, double g, double g_x) const {
    const double pi = s_.strategy(z, z_x, g, g_x);
    const double f0 = s_.f_no_jump(z, z_x, g, g_x, pi);
    const double vol_y = z + z_x * pi;
    Coefficients c;
    c.a[0] = pi * s_.b;
    c.a[1] = 0.5 * pi * pi * s_.cov;
    c.a[2] = z * s_.b + z_x * pi * s_.b + 0.5 * pi * pi * s_.cov * (g_x + s_.eta * z_x * z_x) + pi * s_.cov * g - f0;
    c.a[3] = 0.5 * vol_y * vol_y * s_.cov;
    c.a[4] = pi * vol_y * s_.cov;
    return c;
}

std::vector<ScalarControls> ControlSearch::coarse_tuples() const {
    std::vector<ScalarControls> out;
    out.reserve(coarse_.size() * u_axis_.size());
    for (const auto& e : coarse_)
        for (double u : u_axis_) out.push_back({e.z, e.z_x, e.g, e.g_x, u});
    return out;
}

SearchResult ControlSearch::maximize(const DefaultModel& m, const ValueGrid& v, const Node& node) const {
    return maximize(m, v, node, cfg_.refine_levels);
}

SearchResult ControlSearch::maximize(const DefaultModel& m, const ValueGrid& v, const Node& node,
                                     std::size_t refine_levels) const {
    const GridSpec& g = v.spec;
    const Derivatives d = derivatives(v, node);
    const double w[5] = {d.v_x, d.v_xx, d.v_y, d.v_yy, d.v_xy};
    auto dot = [&](const Coefficients& c) {
        return w[0] * c.a[0] + w[1] * c.a[1] + w[2] * c.a[2] + w[3] * c.a[3] + w[4] * c.a[4];
    };

    SearchResult res;
    const double tie = cfg_.tie_tol;

    // (z, z_x, g, g_x)
    double best = -std::numeric_limits<double>::infinity();
    double best_n2 = std::numeric_limits<double>::infinity();
    ScalarControls& c = res.controls;
    for (const auto& e : coarse_) {
        const double h = dot(e.coef);
        if (better(h, e.norm2, best, best_n2, tie)) {
            best = h;
            best_n2 = e.norm2;
            c = {e.z, e.z_x, e.g, e.g_x, 0.0};
        }
    }
    res.evaluations += coarse_.size();

    const ControlRange ranges[4] = {cfg_.z, cfg_.z_x, cfg_.g, gx_range_};
    const bool pinned[4] = {cfg_.contract_class == ContractClass::NoS || cfg_.z.points <= 1,
                            cfg_.contract_class == ContractClass::Linear || cfg_.z_x.points <= 1,
                            cfg_.contract_class == ContractClass::NoS || cfg_.g.points <= 1, gx_range_.points <= 1};
    for (std::size_t level = 1; level <= refine_levels; ++level) {
        const double scale = std::pow(cfg_.shrink, static_cast<double>(level - 1));
        std::vector<double> ax[4];
        const double centre[4] = {c.z, c.z_x, c.g, c.g_x};
        for (int n = 0; n < 4; ++n) {
            if (pinned[n]) ax[n] = {centre[n]};
            else ax[n] = window(centre[n], coarse_step(ranges[n]) / scale, cfg_.refine_points, ranges[n].lo,
                                ranges[n].hi);
        }
        for (double z : ax[0])
            for (double zx : ax[1])
                for (double gg : ax[2])
                    for (double gx : ax[3]) {
                        if (!s_.admissible(gx)) continue;
                        const double n2 = z * z + zx * zx + gg * gg + gx * gx;
                        const double h = dot(coefficients(z, zx, gg, gx));
                        ++res.evaluations;
                        if (better(h, n2, best, best_n2, tie)) {
                            best = h;
                            best_n2 = n2;
                            c = {z, zx, gg, gx, 0.0};
                        }
                    }
    }

    // u enters only through the jump terms.
    const double lambda = cfg_.include_jumps ? m.hazard(g.t(node.i)) : 0.0;
    const double y = g.y(node.k);
    const double* slice = v.slice(node.i);
    double best_u = 0.0;
    double best_hu = -std::numeric_limits<double>::infinity();
    double best_u2 = std::numeric_limits<double>::infinity();
    if (lambda == 0.0) {
        for (double u : u_axis_)
            if (u * u < best_u2) {
                best_u2 = u * u;
                best_u = u;
            }
        best_hu = 0.0;
    } else {
        auto hu = [&](double u) {
            return lambda * (d.v_y * std::expm1(-s_.eta * u) / s_.eta + slice_jump(slice, g, node.j, y, u) - d.v);
        };
        auto consider = [&](double u) {
            const double h = hu(u);
            ++res.evaluations;
            if (better(h, u * u, best_hu, best_u2, tie)) {
                best_hu = h;
                best_u2 = u * u;
                best_u = u;
            }
        };
        for (double u : u_axis_) consider(u);
        if (cfg_.u.points > 1) {
            for (std::size_t level = 1; level <= refine_levels; ++level) {
                const double scale = std::pow(cfg_.shrink, static_cast<double>(level - 1));
                for (double u : window(best_u, coarse_step(cfg_.u) / scale, cfg_.u_refine_points, cfg_.u.lo, cfg_.u.hi))
                    consider(u);
            }
        }
    }
    c.u = best_u;
    res.value = best + best_hu;
    return res;
}

SearchResult maximize_hamiltonian(const MarketParams& p, const DefaultModel& m, const ValueGrid& v,
                                  const Node& node, const SolverConfig& cfg) {
    return ControlSearch(p, cfg).maximize(m, v, node);
}

std::vector<double> propagate_interval(const ControlSearch& cs, const DefaultModel& m, const GridSpec& spec,
                                       const std::vector<ScalarControls>& controls, const double* later,
                                       std::size_t i, std::size_t* substeps) {
    if (controls.size() != spec.slice_size()) throw DomainError("propagate_interval: control slice size mismatch");
    return propagate(cs, m, spec, controls.data(), later, i, substeps);
}

ValueGrid solve_pde_frozen(const MarketParams& p, const DefaultModel& m, const PolicyGrid& policy, PdeCase c,
                           const SolverConfig& cfg, PdeStats* stats) {
    const GridSpec& g = policy.spec;
    g.validate();
    const ControlSearch cs(p, cfg);
    ValueGrid v(g);
    double* last = v.slice(g.nt - 1);
    for (std::size_t j = 0; j < g.nx; ++j)
        for (std::size_t k = 0; k < g.ny; ++k) last[j * g.ny + k] = terminal_condition(c, m, g.x(j), g.y(k));

    std::size_t substeps = 0;
    for (std::size_t i = g.nt - 1; i-- > 0;) {
        const ScalarControls* ctrl = policy.controls.data() + i * g.slice_size();
        const std::vector<double> s = propagate(cs, m, g, ctrl, v.slice(i + 1), i, &substeps);
        std::copy(s.begin(), s.end(), v.slice(i));
    }
    if (stats) stats->substeps += substeps;
    return v;
}

ResidualReport hjb_residual(const MarketParams& p, const DefaultModel& m, const ValueGrid& v,
                            const SolverConfig& cfg) {
    const GridSpec& g = v.spec;
    const ControlSearch cs(p, cfg);
    std::vector<double> scaled;
    scaled.reserve((g.nt - 1) * (g.nx - 2) * (g.ny - 2));
    for (std::size_t i = 0; i + 1 < g.nt; ++i) {
        const std::vector<ScalarControls> ctrl = maximize_slice(cs, m, v, i);
        const std::vector<double> s = propagate(cs, m, g, ctrl.data(), v.slice(i + 1), i, nullptr);
        const double* stored = v.slice(i);
        const double step = g.t(i + 1) - g.t(i);
        for (std::size_t j = 1; j + 1 < g.nx; ++j)
            for (std::size_t k = 1; k + 1 < g.ny; ++k) {
                const std::size_t idx = j * g.ny + k;
                scaled.push_back(std::abs(s[idx] - stored[idx]) / step / (1.0 + std::abs(stored[idx])));
            }
    }
    ResidualReport rep;
    rep.interior_nodes = scaled.size();
    if (scaled.empty()) return rep;
    const auto within = std::count_if(scaled.begin(), scaled.end(), [&](double r) { return r <= cfg.residual_tol; });
    rep.fraction_within = static_cast<double>(within) / static_cast<double>(scaled.size());
    rep.max = *std::max_element(scaled.begin(), scaled.end());
    const auto q = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(scaled.size()))) - 1;
    std::nth_element(scaled.begin(), scaled.begin() + static_cast<std::ptrdiff_t>(q), scaled.end());
    rep.q99 = scaled[q];
    return rep;
}

ScalarControls initial_controls(const SolverConfig& cfg) {
    ScalarControls c;
    if (cfg.contract_class == ContractClass::Linear) c.z_x = cfg.linear_p;
    return c;
}

SolveResult actor_critic(const MarketParams& p, const DefaultModel& m, const GridSpec& grid,
                         const SolverConfig& cfg, PdeCase c) {
    const auto start = std::chrono::steady_clock::now();
    grid.validate();
    validate_case(c, m);
    if (std::abs(grid.t_max - m.horizon()) > 1e-12 * std::max(1.0, m.horizon()))
        throw ConfigError("horizon", "grid horizon and default-law horizon differ");
    const ControlSearch cs(p, cfg);

    PolicyGrid policy(grid, initial_controls(cfg));
    PdeStats stats;
    ValueGrid v = solve_pde_frozen(p, m, policy, c, cfg, &stats);

    SolveResult best{v, policy, {}};
    double best_change = std::numeric_limits<double>::infinity();
    SolverDiagnostics diag;
    const std::size_t n = grid.slice_size();

    for (std::size_t k = 0; k < cfg.max_iter; ++k) {
        const double w = cfg.relaxation(k);
        for (std::size_t i = 0; i + 1 < grid.nt; ++i) {
            const std::vector<ScalarControls> fresh = maximize_slice(cs, m, v, i);
            ScalarControls* dst = policy.controls.data() + i * n;
            for (std::size_t idx = 0; idx < n; ++idx) {
                ScalarControls& o = dst[idx];
                const ScalarControls& f = fresh[idx];
                o.z = (1.0 - w) * o.z + w * f.z;
                o.z_x = (1.0 - w) * o.z_x + w * f.z_x;
                o.g = (1.0 - w) * o.g + w * f.g;
                o.g_x = (1.0 - w) * o.g_x + w * f.g_x;
                o.u = (1.0 - w) * o.u + w * f.u;
            }
        }
        std::copy(policy.controls.begin() + static_cast<std::ptrdiff_t>((grid.nt - 2) * n),
                  policy.controls.begin() + static_cast<std::ptrdiff_t>((grid.nt - 1) * n),
                  policy.controls.begin() + static_cast<std::ptrdiff_t>((grid.nt - 1) * n));

        ValueGrid next = solve_pde_frozen(p, m, policy, c, cfg, &stats);
        double change = 0.0;
        for (std::size_t idx = 0; idx < next.values.size(); ++idx)
            change = std::max(change, std::abs(next.values[idx] - v.values[idx]));
        v = std::move(next);
        diag.value_changes.push_back(change);
        diag.iterations = k + 1;
        if (change < best_change) {
            best_change = change;
            best.value = v;
            best.policy = policy;
        }
        if (change <= cfg.tol) {
            diag.converged = true;
            break;
        }
    }
    diag.substeps = stats.substeps;
    diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    best.diagnostics = std::move(diag);
    return best;
}

double principal_value(const ValueGrid& v, const MarketParams& p, double R) {
    const GridSpec& g = v.spec;
    if (p.x0 < g.x_min || p.x0 > g.x_max)
        throw DomainError("x0 = " + std::to_string(p.x0) + " lies outside the wealth grid");
    if (0.0 < g.y_min || 0.0 > g.y_max) throw DomainError("y = 0 lies outside the contract-value grid");
    return v.interpolate(0.0, p.x0, 0.0) - reservation_y0(R, p.eta);
}

void write_solution_csv(const std::filesystem::path& path, const ValueGrid& v, const PolicyGrid& policy) {
    if (v.spec.size() != policy.spec.size()) throw DomainError("value and policy grids differ in size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "t,x,y,value,z,z_x,g,g_x,u\n";
    const GridSpec& g = v.spec;
    const char* fmt = "%.17g";
    for (std::size_t i = 0; i < g.nt; ++i)
        for (std::size_t j = 0; j < g.nx; ++j)
            for (std::size_t k = 0; k < g.ny; ++k) {
                const ScalarControls& c = policy.at(i, j, k);
                out << format_double(g.t(i), fmt) << ',' << format_double(g.x(j), fmt) << ','
                    << format_double(g.y(k), fmt) << ',' << format_double(v.at(i, j, k), fmt) << ','
                    << format_double(c.z, fmt) << ',' << format_double(c.z_x, fmt) << ','
                    << format_double(c.g, fmt) << ',' << format_double(c.g_x, fmt) << ','
                    << format_double(c.u, fmt) << '\n';
            }
    if (!out) throw Error("write failed: " + path.string());
}

LoadedSolution read_solution_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open solution dump " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "t,x,y,value,z,z_x,g,g_x,u")
        throw Error(path.string() + ": unexpected header");
    std::vector<std::array<double, 9>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::array<double, 9> r{};
        const char* s = line.c_str();
        for (int n = 0; n < 9; ++n) {
            char* end = nullptr;
            r[n] = std::strtod(s, &end);
            if (end == s) throw Error(path.string() + ": malformed row " + std::to_string(rows.size() + 2));
            s = *end == ',' ? end + 1 : end;
        }
        rows.push_back(r);
    }
    if (rows.empty()) throw Error(path.string() + ": no rows");
    std::size_t ny = 0;
    while (ny < rows.size() && rows[ny][0] == rows[0][0] && rows[ny][1] == rows[0][1]) ++ny;
    std::size_t slice = 0;
    while (slice < rows.size() && rows[slice][0] == rows[0][0]) ++slice;
    if (ny == 0 || slice % ny != 0 || rows.size() % slice != 0) throw Error(path.string() + ": not a full grid");
    GridSpec g;
    g.ny = ny;
    g.nx = slice / ny;
    g.nt = rows.size() / slice;
    g.t_max = rows.back()[0];
    g.x_min = rows.front()[1];
    g.x_max = rows.back()[1];
    g.y_min = rows.front()[2];
    g.y_max = rows.back()[2];
    g.validate();
    LoadedSolution sol{ValueGrid(g), PolicyGrid(g)};
    for (std::size_t n = 0; n < rows.size(); ++n) {
        const auto& r = rows[n];
        sol.value.values[n] = r[3];
        sol.policy.controls[n] = {r[4], r[5], r[6], r[7], r[8]};
    }
    return sol;
}

}  // namespace palab
