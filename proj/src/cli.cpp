#include "palab/cli.hpp"

#include <fstream>
#include <functional>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include "palab/checks.hpp"
#include "palab/errors.hpp"

namespace palab {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: invalid configuration: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

RunConfig load(const std::optional<std::filesystem::path>& path, const SimOverrides& o) {
    RunConfig cfg = path ? load_config(*path) : RunConfig{};
    o.apply(cfg);
    cfg.validate();
    return cfg;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

json versions() {
    return {{"palab", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"compiler", __VERSION__}};
}

json to_json(const RunConfig& c) {
    const ExperimentSettings s = c.settings();
    auto range = [](const ControlRange& r) { return json{{"min", r.lo}, {"max", r.hi}, {"points", r.points}}; };
    json gx = range(s.solver.resolved_g_x(ScalarMarket::from(s.market)));
    return {{"market",
             {{"b", s.market.b[0]},
              {"sigma", s.market.sigma(0, 0)},
              {"x0", s.market.x0},
              {"alpha", s.market.alpha[0]},
              {"eta", s.market.eta},
              {"c_lo", s.market.c_lo[0]},
              {"c_hi", s.market.c_hi[0]}}},
            {"default",
             {{"family", std::string(to_string(c.default_law.family))},
              {"a", c.default_law.a},
              {"b", c.default_law.b},
              {"rate", c.default_law.rate},
              {"horizon", c.default_law.horizon},
              {"hazard_cap", c.default_law.hazard_cap}}},
            {"agent", {{"r", c.R}, {"contract_class", std::string(to_string(c.contract_class))}, {"p", c.p}}},
            {"grid",
             {{"nt", s.grid.nt},
              {"nx", s.grid.nx},
              {"ny", s.grid.ny},
              {"x_min", s.grid.x_min},
              {"x_max", s.grid.x_max},
              {"y_min", s.grid.y_min},
              {"y_max", s.grid.y_max}}},
            {"solver",
             {{"max_iter", s.solver.max_iter},
              {"tol", s.solver.tol},
              {"z", range(s.solver.z)},
              {"z_x", range(s.solver.z_x)},
              {"g", range(s.solver.g)},
              {"g_x", gx},
              {"u", range(s.solver.u)},
              {"refine_levels", s.solver.refine_levels},
              {"refine_points", s.solver.refine_points},
              {"shrink", s.solver.shrink},
              {"w_start", s.solver.w_start},
              {"w_end", s.solver.w_end},
              {"ramp", s.solver.ramp}}},
            {"sim",
             {{"n_paths", s.sim.n_paths},
              {"dt", s.sim.step(s.grid.dt())},
              {"seed", s.sim.seed},
              {"freeze_mode", std::string(to_string(s.sim.freeze_mode))},
              {"p_grid", s.p_grid}}}};
}

json diagnostics_json(const SolveResult& r, const ResidualReport& rep, double value) {
    return {{"iterations", r.diagnostics.iterations},
            {"converged", r.diagnostics.converged},
            {"value_changes", r.diagnostics.value_changes},
            {"substeps", r.diagnostics.substeps},
            {"seconds", r.diagnostics.seconds},
            {"principal_value", value},
            {"residual",
             {{"interior_nodes", rep.interior_nodes},
              {"fraction_within", rep.fraction_within},
              {"q99", rep.q99},
              {"max", rep.max}}}};
}

std::string fs_string(const std::filesystem::path& p) { return p.generic_string(); }

}  // namespace

void SimOverrides::apply(RunConfig& cfg) const {
    if (paths) cfg.sim.n_paths = *paths;
    if (seed) cfg.sim.seed = *seed;
    if (freeze_mode) cfg.sim.freeze_mode = freeze_mode_from_string(*freeze_mode);
    if (p_grid) cfg.p_grid = parse_real_list(*p_grid, "p_grid");
}

int cmd_solve(const std::filesystem::path& config, std::string_view case_name, const std::filesystem::path& out,
              std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = load(config, {});
        const PdeCase c = pde_case_from_string(case_name);
        const DefaultModel m = cfg.default_law.model();
        validate_case(c, m);
        const ExperimentSettings s = cfg.settings();
        ensure_dir(out);

        const SolveResult r = actor_critic(s.market, m, s.grid, s.solver, c);
        const ResidualReport rep = hjb_residual(s.market, m, r.value, s.solver);
        const double value = principal_value(r.value, s.market, cfg.R);
        write_solution_csv(out / "solution.csv", r.value, r.policy);
        json d = diagnostics_json(r, rep, value);
        d["case"] = std::string(to_string(c));
        d["model"] = m.label();
        d["config"] = to_json(cfg);
        write_json(out / "diagnostics.json", d);
        log << m.label() << " (" << to_string(c) << "): " << (r.diagnostics.converged ? "converged" : "NOT converged")
            << " after " << r.diagnostics.iterations << " iterations, V0 = " << value << '\n';
        return 0;
    });
}

int cmd_simulate(const std::filesystem::path& config, const std::filesystem::path& policy,
                 const std::filesystem::path& out, const SimOverrides& o, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = load(config, o);
        if (!std::filesystem::exists(policy)) throw Error("policy file not found: " + policy.string());
        const LoadedSolution sol = read_solution_csv(policy);
        const DefaultModel m = cfg.default_law.model();
        if (std::abs(sol.value.spec.t_max - m.horizon()) > 1e-9)
            throw ConfigError("default.horizon", "differs from the horizon of the policy dump");
        const ExperimentSettings s = cfg.settings();
        ensure_dir(out);
        const PathEnsemble e = simulate(s.market, m, sol.policy, sol.value, s.sim, s.solver);
        const auto files = write_ensemble(out, m.label(), e, s.sim.freeze_mode);
        for (const auto& f : files) log << f.string() << '\n';
        if (e.diagnostics.clamp_events > 0)
            log << "warning: " << e.diagnostics.clamped_paths << " paths left the policy grid ("
                << e.diagnostics.clamp_events << " clamped lookups)\n";
        return 0;
    });
}

int cmd_compare_linear(const std::filesystem::path& config, std::string_view case_name,
                       const std::filesystem::path& out, const SimOverrides& o, std::ostream& log,
                       std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = load(config, o);
        const PdeCase c = pde_case_from_string(case_name);
        const DefaultModel m = cfg.default_law.model();
        validate_case(c, m);
        ensure_dir(out);
        SolveCache cache;
        const LinearReport rep = compare_linear(cfg.settings(), m, c, cfg.p_grid, &cache);
        json entries = json::array();
        for (const auto& e : rep.entries)
            entries.push_back({{"p", e.p}, {"value", e.value}, {"gap", e.gap}, {"converged", e.converged}});
        write_json(out / "linear.json", {{"model", m.label()},
                                         {"case", std::string(to_string(c))},
                                         {"general_value", rep.general_value},
                                         {"general_converged", rep.general_converged},
                                         {"general_mean_zx", rep.general_mean_zx},
                                         {"entries", entries},
                                         {"best_p", rep.best_p},
                                         {"best_gap", rep.best_gap}});
        log << "best p = " << rep.best_p << ", optimality gap = " << rep.best_gap << '\n';
        return 0;
    });
}

int cmd_experiments(std::string_view scenario, const std::filesystem::path& out,
                    const std::optional<std::filesystem::path>& config, const SimOverrides& o, std::ostream& log,
                    std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = load(config, o);
        scenario_models(scenario, cfg.default_law.horizon, cfg.default_law.hazard_cap);
        SolveCache cache;
        const ExperimentResult r = experiment_suite(scenario, out, cfg.settings(), &cache);

        json files = json::array();
        for (const auto& f : r.files) files.push_back(fs_string(f.filename()));
        json models = json::array();
        for (const auto& m : r.models) {
            const auto& w = m.ensemble.carry_last.wealth;
            models.push_back({{"name", m.spec.name},
                              {"family", std::string(to_string(m.spec.model.family()))},
                              {"case", std::string(to_string(m.spec.pde_case))},
                              {"contract_class", std::string(to_string(m.spec.contract_class))},
                              {"p", m.spec.p},
                              {"principal_value", m.value},
                              {"converged", m.converged},
                              {"iterations", m.iterations},
                              {"terminal_mean_wealth", w.mean.back()},
                              {"terminal_se_wealth", w.se.back()},
                              {"clamped_paths", m.ensemble.diagnostics.clamped_paths}});
        }
        json configs = to_json(cfg);
        configs["models"] = models;
        json manifest{{"scenario", r.scenario}, {"files", files}, {"configs", configs}, {"versions", versions()}};
        if (r.linear) {
            json entries = json::array();
            for (const auto& e : r.linear->entries) entries.push_back({{"p", e.p}, {"value", e.value}, {"gap", e.gap}});
            manifest["optimality_gap"] = {{"general_value", r.linear->general_value},
                                          {"best_p", r.linear->best_p},
                                          {"gap", r.linear->best_gap},
                                          {"entries", entries}};
        }
        write_json(out / "manifest.json", manifest);
        for (const auto& f : r.files) log << f.string() << '\n';
        return 0;
    });
}

int cmd_check(std::string_view suite, const std::optional<std::filesystem::path>& config, std::ostream& log,
              std::ostream& err) {
    return guarded(err, [&] {
        std::vector<CheckResult> results;
        if (suite == "hazard") {
            results.push_back(check_hazard_identity());
        } else if (suite == "oracle") {
            results.push_back(check_strategy_oracle());
        } else if (suite == "martingale") {
            const RunConfig cfg = load(config, {});
            SolveCache cache;
            results = check_martingale(cfg.settings(), cache);
        } else if (suite == "degenerate") {
            const RunConfig cfg = load(config, {});
            results.push_back(check_degenerate(cfg.settings()));
        } else {
            throw ConfigError("suite", "unknown suite '" + std::string(suite) +
                                           "' (expected hazard, oracle, martingale or degenerate)");
        }
        bool ok = true;
        for (const auto& r : results) {
            log << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
            ok = ok && r.passed;
        }
        return ok ? 0 : 1;
    });
}

}  // namespace palab
