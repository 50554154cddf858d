#include "palab/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "palab/errors.hpp"
#include "palab/parallel.hpp"

namespace palab {

namespace {

constexpr std::size_t kBlock = 1024;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed of stream `counter`; independent of how many paths are simulated.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t counter) {
    return splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

struct Welford {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        n += 1.0;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }

    void merge(const Welford& o) {
        if (o.n == 0.0) return;
        if (n == 0.0) {
            *this = o;
            return;
        }
        const double total = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / total;
        m2 += o.m2 + d * d * n * o.n / total;
        n = total;
    }

    double se() const { return n > 1.0 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0; }
};

enum Series { kWealth, kStrategy, kY, kU, kZx, kGx, kSeries };

struct NodeAcc {
    Welford carry[kSeries];
    Welford alive[kSeries];
};

struct BlockResult {
    std::vector<NodeAcc> nodes;
    Welford utility;
    SimDiagnostics diag;
};

Aggregates finish(const std::vector<NodeAcc>& nodes, bool alive_only, double n_paths) {
    Aggregates a;
    SeriesStats* series[kSeries] = {&a.wealth, &a.strategy, &a.Y, &a.u, &a.z_x, &a.g_x};
    for (const NodeAcc& acc : nodes) {
        const Welford* w = alive_only ? acc.alive : acc.carry;
        for (int s = 0; s < kSeries; ++s) {
            const bool empty = w[s].n == 0.0;
            series[s]->mean.push_back(empty ? std::numeric_limits<double>::quiet_NaN() : w[s].mean);
            series[s]->se.push_back(empty ? std::numeric_limits<double>::quiet_NaN() : w[s].se());
        }
        a.alive_frac.push_back(acc.alive[kWealth].n / n_paths);
        a.count.push_back(static_cast<std::size_t>(w[kWealth].n));
    }
    return a;
}

std::string fmt9(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

}  // namespace

std::string_view to_string(FreezeMode f) {
    switch (f) {
        case FreezeMode::CarryLast: return "carry_last";
        case FreezeMode::AliveOnly: return "alive_only";
        case FreezeMode::Both: return "both";
    }
    return "unknown";
}

FreezeMode freeze_mode_from_string(std::string_view name) {
    if (name == "carry_last") return FreezeMode::CarryLast;
    if (name == "alive_only") return FreezeMode::AliveOnly;
    if (name == "both") return FreezeMode::Both;
    throw ConfigError("freeze_mode", "unknown freeze mode '" + std::string(name) + "'");
}

double SimConfig::step(double grid_dt) const { return dt > 0.0 ? dt : grid_dt; }

void SimConfig::validate(double T, double grid_dt) const {
    if (n_paths == 0) throw ConfigError("n_paths", "need at least one path");
    if (dt < 0.0 || !std::isfinite(dt)) throw ConfigError("dt", "must be nonnegative (0 selects the grid step)");
    const double h = step(grid_dt);
    const double ratio = T / h;
    if (!(h > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("dt", "must divide the horizon");
    if (!(R < 0.0)) throw ConfigError("r", "reservation utility must be negative");
}

PathEnsemble simulate(const MarketParams& p, const DefaultModel& m, const PolicyGrid& policy,
                      const ValueGrid& v, const SimConfig& cfg, const SolverConfig& solver) {
    (void)v;
    const ScalarMarket s = ScalarMarket::from(p);
    const GridSpec& g = policy.spec;
    const double T = g.t_max;
    cfg.validate(T, g.dt());
    const double h = cfg.step(g.dt());
    const auto n_steps = static_cast<std::size_t>(std::llround(T / h));
    const double gx_max = solver.resolved_g_x(s).hi;
    const double Y0 = reservation_y0(cfg.R, p.eta);

    PathEnsemble out;
    out.Y0 = Y0;
    out.times.resize(n_steps + 1);
    for (std::size_t n = 0; n <= n_steps; ++n)
        out.times[n] = n == n_steps ? T : h * static_cast<double>(n);
    const std::vector<double>& times = out.times;
    if (cfg.keep_paths) out.paths.resize(cfg.n_paths);

    const std::size_t n_blocks = (cfg.n_paths + kBlock - 1) / kBlock;
    std::vector<BlockResult> blocks(n_blocks);

    auto run_block = [&](std::size_t b) {
        BlockResult& res = blocks[b];
        res.nodes.assign(n_steps + 1, NodeAcc{});
        const std::size_t first = b * kBlock;
        const std::size_t last = std::min(cfg.n_paths, first + kBlock);
        for (std::size_t path = first; path < last; ++path) {
            std::mt19937_64 noise(stream_seed(cfg.seed, 2 * path));
            std::mt19937_64 clock(stream_seed(cfg.seed, 2 * path + 1));
            std::normal_distribution<double> normal(0.0, 1.0);
            const double tau = m.sample(clock);

            PathRecord* rec = cfg.keep_paths ? &out.paths[path] : nullptr;
            if (rec) {
                rec->tau = tau;
                rec->default_step = n_steps + 1;
            }
            double X = p.x0;
            double Yhat = 0.0;
            double effort = 0.0;
            bool alive = true;
            std::size_t clamps = 0;
            ScalarControls c;
            double pi = 0.0;

            for (std::size_t n = 0; n <= n_steps; ++n) {
                const double t = times[n];
                if (alive) {
                    if (X < g.x_min || X > g.x_max || Yhat < g.y_min || Yhat > g.y_max) ++clamps;
                    c = policy.interpolate(t, X, Yhat);
                    c.g_x = std::min(c.g_x, gx_max);
                    pi = cfg.forced_strategy ? *cfg.forced_strategy : s.strategy(c.z, c.z_x, c.g, c.g_x);
                }
                const double vals[kSeries] = {X, pi, Y0 + Yhat, c.u, c.z_x, c.g_x};
                NodeAcc& acc = res.nodes[n];
                for (int k = 0; k < kSeries; ++k) {
                    acc.carry[k].add(vals[k]);
                    if (alive) acc.alive[k].add(vals[k]);
                }
                if (rec) {
                    rec->X.push_back(X);
                    rec->Y.push_back(Y0 + Yhat);
                    rec->strategy.push_back(pi);
                    rec->controls.push_back(c);
                }
                if (n == n_steps || !alive) continue;

                const double t_next = times[n + 1];
                const bool defaults = tau <= t_next;
                const double dt_eff = defaults ? std::max(0.0, tau - t) : t_next - t;
                const double dW = std::sqrt(dt_eff) * normal(noise);
                const double lambda = m.hazard(t);
                const double pi_star = s.strategy(c.z, c.z_x, c.g, c.g_x);
                const double F = s.f_no_jump(c.z, c.z_x, c.g, c.g_x, pi_star) + s.jump_term(lambda, c.u);
                const double drift = c.z * s.b + c.z_x * pi * s.b +
                                     0.5 * pi * pi * s.cov * (c.g_x + s.eta * c.z_x * c.z_x) + pi * s.cov * c.g - F;
                const double dY_drift = drift * dt_eff;
                const double dY_diff = (c.z + c.z_x * pi) * s.vol * dW;
                X += pi * s.b * dt_eff + pi * s.vol * dW;
                Yhat += dY_drift + dY_diff;
                const double dev = pi - s.alpha;
                effort += 0.5 * dev * dev * dt_eff;
                if (rec) {
                    rec->dY_drift.push_back(dY_drift);
                    rec->dY_diffusion.push_back(dY_diff);
                }
                if (defaults) {
                    Yhat += c.u;
                    alive = false;
                    ++res.diag.defaults;
                    if (rec) {
                        rec->dY_jump = c.u;
                        rec->defaulted = true;
                        rec->default_step = n + 1;
                    }
                }
            }
            if (rec) rec->effort = effort;
            res.diag.clamp_events += clamps;
            if (clamps > 0) ++res.diag.clamped_paths;
            res.utility.add(-std::exp(-p.eta * (Y0 + Yhat - effort)));
        }
    };

    parallel_for(n_blocks, [&](std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) run_block(b);
    });

    // Fixed-order reduction: identical results for any worker count.
    std::vector<NodeAcc> nodes(n_steps + 1);
    Welford utility;
    for (const BlockResult& b : blocks) {
        for (std::size_t n = 0; n <= n_steps; ++n)
            for (int k = 0; k < kSeries; ++k) {
                nodes[n].carry[k].merge(b.nodes[n].carry[k]);
                nodes[n].alive[k].merge(b.nodes[n].alive[k]);
            }
        utility.merge(b.utility);
        out.diagnostics.clamp_events += b.diag.clamp_events;
        out.diagnostics.clamped_paths += b.diag.clamped_paths;
        out.diagnostics.defaults += b.diag.defaults;
    }
    const auto total = static_cast<double>(cfg.n_paths);
    out.carry_last = finish(nodes, false, total);
    out.alive_only = finish(nodes, true, total);
    out.utility_mean = utility.mean;
    out.utility_se = utility.se();
    return out;
}

MartingaleReport martingale_check(const MarketParams& p, const DefaultModel& m, const PolicyGrid& policy,
                                  const SimConfig& cfg, const SolverConfig& solver) {
    SimConfig c = cfg;
    c.keep_paths = false;
    const PathEnsemble e = simulate(p, m, policy, ValueGrid(policy.spec), c, solver);
    MartingaleReport r;
    r.mean = e.utility_mean;
    r.se = e.utility_se;
    r.target = -std::exp(-p.eta * e.Y0);
    r.n_paths = c.n_paths;
    const double diff = r.mean - r.target;
    r.deviation = r.se > 0.0 ? diff / r.se : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
    return r;
}

void write_aggregates_csv(const std::filesystem::path& path, const std::vector<double>& times, const Aggregates& a) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "t,mean_wealth,se_wealth,mean_strategy,se_strategy,mean_Y,se_Y,mean_u,mean_zx,mean_gx,alive_frac\n";
    for (std::size_t n = 0; n < times.size(); ++n) {
        out << fmt9(times[n]) << ',' << fmt9(a.wealth.mean[n]) << ',' << fmt9(a.wealth.se[n]) << ','
            << fmt9(a.strategy.mean[n]) << ',' << fmt9(a.strategy.se[n]) << ',' << fmt9(a.Y.mean[n]) << ','
            << fmt9(a.Y.se[n]) << ',' << fmt9(a.u.mean[n]) << ',' << fmt9(a.z_x.mean[n]) << ','
            << fmt9(a.g_x.mean[n]) << ',' << fmt9(a.alive_frac[n]) << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<std::filesystem::path> write_ensemble(const std::filesystem::path& dir, const std::string& name,
                                                  const PathEnsemble& e, FreezeMode mode) {
    std::vector<std::filesystem::path> files;
    if (mode != FreezeMode::AliveOnly) {
        files.push_back(dir / (name + ".csv"));
        write_aggregates_csv(files.back(), e.times, e.carry_last);
    }
    if (mode != FreezeMode::CarryLast) {
        files.push_back(dir / (name + "_alive_only.csv"));
        write_aggregates_csv(files.back(), e.times, e.alive_only);
    }
    return files;
}

std::shared_ptr<const SolveResult> SolveCache::get(const ExperimentSettings& s, const ModelSpec& spec) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s|%s|%s|%.17g|%zu|%zu|%zu", spec.model.label().c_str(),
                  std::string(to_string(spec.pde_case)).c_str(), std::string(to_string(spec.contract_class)).c_str(),
                  spec.p, s.grid.nt, s.grid.nx, s.grid.ny);
    const std::string key = buf;
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    SolverConfig cfg = s.solver;
    cfg.contract_class = spec.contract_class;
    cfg.linear_p = spec.p;
    auto res = std::make_shared<const SolveResult>(actor_critic(s.market, spec.model, s.grid, cfg, spec.pde_case));
    entries_.emplace(key, res);
    return res;
}

namespace {

std::shared_ptr<const SolveResult> solve_with(SolveCache* cache, const ExperimentSettings& s, const ModelSpec& spec) {
    if (cache) return cache->get(s, spec);
    SolveCache local;
    return local.get(s, spec);
}

}  // namespace

LinearReport compare_linear(const ExperimentSettings& s, const DefaultModel& m, PdeCase c,
                            const std::vector<double>& p_grid, SolveCache* cache) {
    if (p_grid.empty()) throw ConfigError("p_grid", "needs at least one percentage");
    const double R = s.sim.R;
    LinearReport rep;
    const ModelSpec general{m.label(), m, c};
    const auto g = solve_with(cache, s, general);
    rep.general_value = principal_value(g->value, s.market, R);
    rep.general_converged = g->diagnostics.converged;
    const PathEnsemble e = simulate(s.market, m, g->policy, g->value, s.sim, s.solver);
    double sum = 0.0;
    for (double zx : e.carry_last.z_x.mean) sum += zx;
    rep.general_mean_zx = sum / static_cast<double>(e.carry_last.z_x.mean.size());

    double best_value = -std::numeric_limits<double>::infinity();
    for (double pct : p_grid) {
        const ModelSpec lin{m.label() + "_linear", m, c, ContractClass::Linear, pct};
        const auto l = solve_with(cache, s, lin);
        LinearEntry entry;
        entry.p = pct;
        entry.value = principal_value(l->value, s.market, R);
        entry.gap = rep.general_value - entry.value;
        entry.converged = l->diagnostics.converged;
        if (entry.value > best_value) {
            best_value = entry.value;
            rep.best_p = pct;
            rep.best_gap = entry.gap;
        }
        rep.entries.push_back(entry);
    }
    return rep;
}

std::vector<ModelSpec> scenario_models(std::string_view scenario, double horizon, double cap) {
    const auto beta24 = DefaultModel::beta(2.0, 4.0, horizon, cap);
    const auto beta42 = DefaultModel::beta(4.0, 2.0, horizon, cap);
    const auto uniform = DefaultModel::uniform(horizon, cap);
    const auto none = DefaultModel::none(horizon);
    if (scenario == "fig1" || scenario == "fig2")
        return {{"beta24", beta24, PdeCase::Bounded},
                {"uniform", uniform, PdeCase::Bounded},
                {"beta42", beta42, PdeCase::Bounded},
                {"none", none, PdeCase::Unbounded}};
    if (scenario == "fig3")
        return {{"uniform_general", uniform, PdeCase::Bounded},
                {"uniform_linear", uniform, PdeCase::Bounded, ContractClass::Linear}};
    if (scenario == "fig4")
        return {{"none", none, PdeCase::Unbounded},
                {"uniform", uniform, PdeCase::Bounded},
                {"exponential2", DefaultModel::exponential(2.0, horizon, cap), PdeCase::Unbounded}};
    throw ConfigError("scenario", "unknown scenario '" + std::string(scenario) + "' (expected fig1..fig4)");
}

ExperimentResult experiment_suite(std::string_view scenario, const std::filesystem::path& out_dir,
                                  const ExperimentSettings& s, SolveCache* cache) {
    std::vector<ModelSpec> models = scenario_models(scenario, s.grid.t_max, s.hazard_cap);
    SolveCache local;
    if (!cache) cache = &local;

    ExperimentResult result;
    result.scenario = std::string(scenario);
    if (scenario == "fig3") {
        result.linear = compare_linear(s, models[0].model, models[0].pde_case, s.p_grid, cache);
        models[1].p = result.linear->best_p;
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());

    for (const ModelSpec& spec : models) {
        const auto sol = cache->get(s, spec);
        ModelOutcome o{spec, 0.0, false, 0, {}};
        o.value = principal_value(sol->value, s.market, s.sim.R);
        o.converged = sol->diagnostics.converged;
        o.iterations = sol->diagnostics.iterations;
        o.ensemble = simulate(s.market, spec.model, sol->policy, sol->value, s.sim, s.solver);
        for (auto& f : write_ensemble(out_dir, spec.name, o.ensemble, s.sim.freeze_mode)) result.files.push_back(f);
        result.models.push_back(std::move(o));
    }
    return result;
}

}  // namespace palab
