#include "palab/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>

#include "palab/contract.hpp"
#include "palab/errors.hpp"

namespace palab {

namespace {

std::string format(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const ModelOutcome& find(const ExperimentResult& r, const std::string& name) {
    for (const auto& m : r.models)
        if (m.spec.name == name) return m;
    throw Error("model " + name + " missing from scenario " + r.scenario);
}

}  // namespace

CheckResult check_hazard_identity(double horizon) {
    CheckResult r{"hazard/survival identity", true, ""};
    const DefaultModel models[] = {DefaultModel::beta(2, 4, horizon), DefaultModel::uniform(horizon),
                                   DefaultModel::beta(4, 2, horizon), DefaultModel::exponential(2, horizon)};
    const int n = 2000;
    for (const auto& m : models) {
        double worst = 0.0;
        for (int k = 0; k <= n; ++k) {
            const double t = 0.999 * horizon * k / n;
            worst = std::max(worst, std::abs(std::exp(-m.cumulative_hazard(t)) - m.survival(t)));
        }
        r.passed = r.passed && worst < 1e-8;
        r.detail += format("%s %.2e; ", m.label().c_str(), worst);
    }
    r.detail += "bound 1e-8";
    return r;
}

CheckResult check_strategy_oracle(std::size_t n, std::uint64_t seed) {
    CheckResult r{"agent-strategy oracle", true, ""};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const double step = 1e-3;
    double worst_f = 0.0;
    double worst_arg = 0.0;
    std::size_t failures = 0;
    for (std::size_t k = 0; k < n; ++k) {
        MarketParams p = MarketParams::scalar(draw(0.0, 0.3), draw(0.1, 0.5), 5.0, draw(-0.5, 1.5), draw(0.5, 2.0));
        const double cov = p.sigma(0, 0) * p.sigma(0, 0);
        const ControlTuple ct = ControlTuple::scalar(draw(-2, 2), draw(-2, 2), draw(-2, 2),
                                                     draw(-2, (1.0 - 1e-3) / cov), draw(-1, 1));
        const double lambda = draw(0.0, 5.0);
        const double F = generator_F(p, ct, lambda);
        const double pi = agent_strategy(p, ct)[0];
        const double lo = p.c_lo[0];
        const double hi = p.c_hi[0];
        const auto cells = static_cast<std::size_t>(std::llround((hi - lo) / step));
        double best = -std::numeric_limits<double>::infinity();
        double arg = lo;
        Eigen::VectorXd nu(1);
        for (std::size_t c = 0; c <= cells; ++c) {
            nu[0] = c == cells ? hi : lo + step * static_cast<double>(c);
            const double f = raw_f(p, ct, lambda, nu);
            if (f > best) {
                best = f;
                arg = nu[0];
            }
        }
        const double df = std::abs(F - best);
        const double da = std::abs(arg - pi);
        worst_f = std::max(worst_f, df);
        worst_arg = std::max(worst_arg, da);
        if (df > 5e-6 || da > step * (1.0 + 1e-9)) ++failures;
    }
    r.passed = failures == 0;
    r.detail = format("%zu tuples, max |F - grid max| %.2e (bound 5e-6), max |argmax - pi*| %.2e (cell 1e-3), "
                      "%zu failures",
                      n, worst_f, worst_arg, failures);
    return r;
}

std::vector<CheckResult> check_martingale(const ExperimentSettings& s, SolveCache& cache, std::size_t n_paths,
                                          double perturbed) {
    const ModelSpec spec{"uniform", DefaultModel::uniform(s.grid.t_max, s.hazard_cap), PdeCase::Bounded};
    const auto sol = cache.get(s, spec);
    SimConfig cfg = s.sim;
    cfg.n_paths = n_paths;
    cfg.forced_strategy.reset();
    const MartingaleReport opt = martingale_check(s.market, spec.model, sol->policy, cfg, s.solver);
    CheckResult a{"martingale optimality", std::abs(opt.deviation) <= 3.0 || std::abs(opt.mean - opt.target) <= 1e-12,
                  format("E[R] = %.10f, target %.10f, SE %.3e, deviation %.2f SE (n = %zu)", opt.mean, opt.target,
                         opt.se, opt.deviation, opt.n_paths)};
    cfg.forced_strategy = perturbed;
    const MartingaleReport sub = martingale_check(s.market, spec.model, sol->policy, cfg, s.solver);
    const double drop = (sub.target - sub.mean) / sub.se;
    CheckResult b{"martingale supermartingale (perturbed strategy)", drop > 3.0,
                  format("pi = %.3f: E[R] = %.8f, target %.8f, lower by %.1f SE", perturbed, sub.mean, sub.target, drop)};
    return {a, b};
}

CheckResult check_degenerate(const ExperimentSettings& s, std::size_t n) {
    GridSpec g = s.grid;
    g.nt = g.nx = g.ny = n;
    SolverConfig cfg = s.solver;
    cfg.u = {0.0, 0.0, 1};
    const DefaultModel none = DefaultModel::none(g.t_max);
    CheckResult r{"no-default degeneration", true, ""};
    for (PdeCase c : {PdeCase::Bounded, PdeCase::Unbounded}) {
        SolverConfig with = cfg;
        with.include_jumps = true;
        SolverConfig without = cfg;
        without.include_jumps = false;
        const SolveResult a = actor_critic(s.market, none, g, with, c);
        const SolveResult b = actor_critic(s.market, none, g, without, c);
        double sup = 0.0;
        for (std::size_t k = 0; k < a.value.values.size(); ++k)
            sup = std::max(sup, std::abs(a.value.values[k] - b.value.values[k]));
        r.passed = r.passed && sup <= 1e-6;
        r.detail += format("%s sup|v - v_nojump| = %.2e; ", std::string(to_string(c)).c_str(), sup);
    }
    r.detail += format("%zu^3 grid, bound 1e-6", n);
    return r;
}

CheckResult check_residual(const ExperimentSettings& s, SolveCache& cache) {
    const ModelSpec spec{"uniform", DefaultModel::uniform(s.grid.t_max, s.hazard_cap), PdeCase::Bounded};
    const auto sol = cache.get(s, spec);
    const ResidualReport rep = hjb_residual(s.market, spec.model, sol->value, s.solver);
    const bool ok = sol->diagnostics.converged && rep.fraction_within >= 0.99;
    return {"discrete HJB residual",
            ok,
            format("converged %s after %zu iterations; %.4f of %zu interior nodes within %.0e (1 + |v|); "
                   "q99 %.3e, max %.3e",
                   sol->diagnostics.converged ? "yes" : "no", sol->diagnostics.iterations, rep.fraction_within,
                   rep.interior_nodes, s.solver.residual_tol, rep.q99, rep.max)};
}

CheckResult check_fig1_ordering(const ExperimentSettings& s, SolveCache& cache, const std::filesystem::path& out) {
    const ExperimentResult r = experiment_suite("fig1", out, s, &cache);
    const char* order[] = {"none", "beta42", "uniform", "beta24"};
    CheckResult res{"figure-1 wealth ordering", true, ""};
    for (int k = 0; k < 3; ++k) {
        const auto& a = find(r, order[k]).ensemble.carry_last.wealth;
        const auto& b = find(r, order[k + 1]).ensemble.carry_last.wealth;
        const double gap = a.mean.back() - b.mean.back();
        const double se = std::hypot(a.se.back(), b.se.back());
        res.passed = res.passed && gap > se;
        res.detail += format("%s - %s = %.5f (%.1f SE); ", order[k], order[k + 1], gap, gap / se);
    }
    res.detail += format("%zu paths", s.sim.n_paths);
    return res;
}

CheckResult check_fig4_sandwich(const ExperimentSettings& s, SolveCache& cache, const std::filesystem::path& out) {
    const ExperimentResult r = experiment_suite("fig4", out, s, &cache);
    const auto& none = find(r, "none").ensemble;
    const auto& uni = find(r, "uniform").ensemble.carry_last.strategy;
    const auto& ex = find(r, "exponential2").ensemble.carry_last.strategy;
    const auto& nn = none.carry_last.strategy;
    const double T = none.times.back();
    std::size_t checked = 0;
    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t n = 0; n < none.times.size(); ++n) {
        if (none.times[n] < 0.75 * T) continue;
        ++checked;
        const bool none_low = nn.mean[n] <= uni.mean[n];
        const double lo = none_low ? nn.mean[n] : uni.mean[n];
        const double hi = none_low ? uni.mean[n] : nn.mean[n];
        const double se_lo = none_low ? nn.se[n] : uni.se[n];
        const double se_hi = none_low ? uni.se[n] : nn.se[n];
        const double below = (lo - ex.mean[n]) - std::hypot(ex.se[n], se_lo);
        const double above = (ex.mean[n] - hi) - std::hypot(ex.se[n], se_hi);
        const double excess = std::max(below, above);
        worst = std::max(worst, excess);
        if (excess > 0.0) ++violations;
    }
    return {"figure-4 strategy sandwich", violations == 0 && checked > 0,
            format("%zu nodes in the last quarter, %zu outside the band by more than 1 SE (worst excess %.2e)", checked,
                   violations, worst)};
}

CheckResult check_linear_dominance(const ExperimentSettings& s, SolveCache& cache, double tol) {
    const DefaultModel uniform = DefaultModel::uniform(s.grid.t_max, s.hazard_cap);
    const LinearReport rep = compare_linear(s, uniform, PdeCase::Bounded, s.p_grid, &cache);
    CheckResult r{"linear-contract dominance", rep.best_gap >= -tol, ""};
    r.detail = format("V_general %.9f; ", rep.general_value);
    for (const auto& e : rep.entries) {
        r.passed = r.passed && e.value <= rep.general_value + tol;
        r.detail += format("p=%.2f gap %.2e; ", e.p, e.gap);
    }
    r.detail += format("best p %.2f gap %.2e (tolerance %.0e)", rep.best_p, rep.best_gap, tol);
    return r;
}

CheckResult check_determinism(const ExperimentSettings& s, const std::filesystem::path& out) {
    const DefaultModel m = DefaultModel::uniform(s.grid.t_max, s.hazard_cap);
    std::vector<std::string> bytes[2];
    for (int run = 0; run < 2; ++run) {
        const auto dir = out / (run == 0 ? "run_a" : "run_b");
        std::filesystem::create_directories(dir);
        const SolveResult sol = actor_critic(s.market, m, s.grid, s.solver, PdeCase::Bounded);
        write_solution_csv(dir / "solution.csv", sol.value, sol.policy);
        const PathEnsemble e = simulate(s.market, m, sol.policy, sol.value, s.sim, s.solver);
        auto files = write_ensemble(dir, "uniform", e, FreezeMode::Both);
        files.insert(files.begin(), dir / "solution.csv");
        for (const auto& f : files) bytes[run].push_back(read_bytes(f));
    }
    const bool same = bytes[0] == bytes[1];
    return {"determinism", same,
            format("%zu files per run, %s", bytes[0].size(), same ? "byte-identical" : "contents differ")};
}

}  // namespace palab
